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
#ifndef PTT_BACKBONE_HPP
#define PTT_BACKBONE_HPP

#include <string>
#include <vector>

#include "ptt/autograd.hpp"
#include "ptt/geometry.hpp"
#include "ptt/sampling.hpp"
#include "ptt/transformer.hpp"

namespace ptt {

/// One set-abstraction level: FPS-selected centers, ball-query grouping,
/// a two-layer per-neighbor MLP on (relative offset, feature), max pool.
struct BackboneLevel {
  std::size_t centers = 128;
  double radius = 0.5;        // meters
  std::size_t group_cap = 16; // neighbors per center, padded by repetition
  std::size_t hidden = 32;
  std::size_t out = 64;
};

struct BackboneConfig {
  std::vector<BackboneLevel> levels;
  std::size_t input_feat_dim = 0;             // raw clouds carry no features
  SamplerKind sampler = SamplerKind::kFps;    // center selection strategy
  std::uint64_t sampler_seed = 0;             // used by the random sampler

  std::size_t seed_count() const { return levels.back().centers; }
  std::size_t descriptor_dim() const { return levels.back().out; }
  void validate() const;  // non-empty, strictly decreasing center counts

  static BackboneConfig defaults();  // 512 -> 128 centers, radii 0.3/0.5, D=64
};

void init_backbone_params(ParamStore& store, const std::string& prefix,
                          const BackboneConfig& config, Rng& rng);

struct BackboneOut {
  std::vector<Point3> coords;  // [N]
  Value feats;                 // [N, D]
};

/// Hierarchical grouping over the cloud; pads by FPS cycling when the cloud
/// is smaller than the first level's center count. The cloud must be
/// non-empty.
BackboneOut backbone_forward_graph(Graph& g, const PointCloud& cloud,
                                   const BackboneConfig& config, ParamStore& store,
                                   const std::string& prefix);

SeedSet backbone_forward(const PointCloud& cloud, const BackboneConfig& config,
                         ParamStore& store, const std::string& prefix);

}  // namespace ptt

#endif  // PTT_BACKBONE_HPP
