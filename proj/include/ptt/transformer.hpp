/******************************************************************************
 * Copyright 2026 The PTTrack Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#ifndef PTT_TRANSFORMER_HPP
#define PTT_TRANSFORMER_HPP

#include <string>
#include <vector>

#include "ptt/autograd.hpp"
#include "ptt/geometry.hpp"
#include "ptt/tensor.hpp"

namespace ptt {

class Rng;

/// N interest points: a coordinate c_i plus a D-dim descriptor f_i each.
struct SeedSet {
  std::vector<Point3> coords;
  Tensor feats;  // [N, D]

  std::size_t size() const { return coords.size(); }
  std::size_t feat_width() const { return feats.rank() == 2 ? feats.shape[1] : 0; }
  void validate() const;
};

/// Vector self-attention block over seed neighborhoods: feature embedding,
/// relative-coordinate position encoding, channel-wise subtraction relation,
/// residual output.
struct PttConfig {
  std::size_t input_dim = 0;     // D
  std::size_t embed_dim = 0;     // M; defaults to D when left 0
  std::size_t neighbors = 16;    // k, clamped to N at runtime via knn padding
  std::size_t heads = 1;
  std::size_t layers = 1;
  bool scalar_relation = false;  // dot-product relation instead of subtraction
  bool position_on_value = true; // false: P added to the gathered K used as values

  std::size_t resolved_embed_dim() const { return embed_dim == 0 ? input_dim : embed_dim; }
  void validate() const;  // embed dim divisible by heads, dims positive
};

/// Registers all layer parameters under `prefix` (embedding, Q/K/V maps per
/// head, position MLP, attention MLP, output projection).
void init_ptt_params(ParamStore& store, const std::string& prefix,
                     const PttConfig& config, Rng& rng);

/// Per-point linear map D -> M.
Value feature_embed_graph(Graph& g, Value feats, ParamStore& store,
                          const std::string& prefix);
Tensor feature_embed(const Tensor& feats, ParamStore& store, const std::string& prefix);

/// eta(c_i - c_j) for every neighbor pair: two linear layers with one ReLU,
/// applied to relative offsets. Output [N, k, M].
Value position_encode_graph(Graph& g, std::span<const Point3> coords,
                            const IndexMatrix& neighbor_idx, ParamStore& store,
                            const std::string& prefix);
Tensor position_encode(std::span<const Point3> coords, const IndexMatrix& neighbor_idx,
                       ParamStore& store, const std::string& prefix);

struct PttForward {
  Value output;                 // [N, D] refined features (residual added)
  std::vector<Value> weights;   // per layer, post-softmax [N, k, M]
  std::vector<IndexMatrix> idx; // per layer kNN table
};

/// Full module: repeated layers of embed -> QKV -> relation -> softmax over
/// neighbors (per channel) -> weighted (V + P) sum -> projection -> residual.
PttForward ptt_forward_graph(Graph& g, const SeedSet& seeds, const PttConfig& config,
                             ParamStore& store, const std::string& prefix,
                             Value feats_override = Value{});

Tensor ptt_forward(const SeedSet& seeds, const PttConfig& config, ParamStore& store,
                   const std::string& prefix);

/// Post-softmax weights of the last layer, for inspection dumps.
Tensor attention_weights(const SeedSet& seeds, const PttConfig& config,
                         ParamStore& store, const std::string& prefix);

}  // namespace ptt

#endif  // PTT_TRANSFORMER_HPP
