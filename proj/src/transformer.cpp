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
#include "ptt/transformer.hpp"

#include <stdexcept>

#include "ptt/rng.hpp"
#include "ptt/sampling.hpp"

namespace ptt {
namespace {

std::string layer_prefix(const std::string& prefix, std::size_t layer) {
  return prefix + ".layer" + std::to_string(layer);
}

void add_linear(ParamStore& store, const std::string& name, std::size_t in,
                std::size_t out, Rng& rng) {
  store.add(name + ".w", init_linear_weight(in, out, rng));
  Tensor b = Tensor::zeros({out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : b.data) v = rng.uniform(-bound, bound);
  store.add(name + ".b", std::move(b));
}

Value apply_linear(Graph& g, Value x, ParamStore& store, const std::string& name) {
  return g.linear(x, g.param(store, name + ".w"), g.param(store, name + ".b"));
}

Value apply_mlp2(Graph& g, Value x, ParamStore& store, const std::string& name) {
  return mlp2_relu(g, x, g.param(store, name + ".l1.w"), g.param(store, name + ".l1.b"),
                   g.param(store, name + ".l2.w"), g.param(store, name + ".l2.b"));
}

Tensor offsets_tensor(std::span<const Point3> coords, const IndexMatrix& idx) {
  Tensor t = Tensor::zeros({idx.rows, idx.cols, 3});
  for (std::size_t i = 0; i < idx.rows; ++i) {
    for (std::size_t j = 0; j < idx.cols; ++j) {
      const Point3 d = coords[i] - coords[static_cast<std::size_t>(idx.at(i, j))];
      t.at3(i, j, 0) = d.x;
      t.at3(i, j, 1) = d.y;
      t.at3(i, j, 2) = d.z;
    }
  }
  return t;
}

}  // namespace

void SeedSet::validate() const {
  if (coords.empty()) throw std::invalid_argument("SeedSet: empty");
  if (feats.rank() != 2 || feats.shape[0] != coords.size() || feats.shape[1] == 0) {
    throw std::invalid_argument("SeedSet: feats shape " + shape_str(feats.shape) +
                                " does not match " + std::to_string(coords.size()) + " coords");
  }
  for (const Point3& p : coords) {
    if (!p.finite()) throw std::invalid_argument("SeedSet: non-finite coordinate");
  }
  if (!feats.all_finite()) throw std::invalid_argument("SeedSet: non-finite descriptor");
}

void PttConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("PttConfig: input_dim must be set");
  const std::size_t m = resolved_embed_dim();
  if (m == 0 || neighbors == 0 || heads == 0 || layers == 0) {
    throw std::invalid_argument("PttConfig: dimensions must be positive");
  }
  if (m % heads != 0) {
    throw std::invalid_argument("PttConfig: embed dim " + std::to_string(m) +
                                " not divisible by " + std::to_string(heads) + " heads");
  }
}

void init_ptt_params(ParamStore& store, const std::string& prefix,
                     const PttConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.input_dim;
  const std::size_t m = config.resolved_embed_dim();
  const std::size_t mh = m / config.heads;
  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    const std::string lp = layer_prefix(prefix, layer);
    add_linear(store, lp + ".embed", d, m, rng);
    for (std::size_t h = 0; h < config.heads; ++h) {
      const std::string hp = lp + ".h" + std::to_string(h);
      add_linear(store, hp + ".q", mh, mh, rng);
      add_linear(store, hp + ".k", mh, mh, rng);
      add_linear(store, hp + ".v", mh, mh, rng);
    }
    add_linear(store, lp + ".pos.l1", 3, m, rng);
    add_linear(store, lp + ".pos.l2", m, m, rng);
    add_linear(store, lp + ".attn.l1", m, m, rng);
    add_linear(store, lp + ".attn.l2", m, m, rng);
    add_linear(store, lp + ".proj", m, d, rng);
  }
}

Value feature_embed_graph(Graph& g, Value feats, ParamStore& store,
                          const std::string& prefix) {
  return apply_linear(g, feats, store, prefix + ".embed");
}

Tensor feature_embed(const Tensor& feats, ParamStore& store, const std::string& prefix) {
  Graph g;
  return g.value(feature_embed_graph(g, g.constant(feats), store, prefix));
}

Value position_encode_graph(Graph& g, std::span<const Point3> coords,
                            const IndexMatrix& neighbor_idx, ParamStore& store,
                            const std::string& prefix) {
  for (std::int32_t v : neighbor_idx.data) {
    if (v < 0 || static_cast<std::size_t>(v) >= coords.size()) {
      throw std::invalid_argument("position_encode: neighbor index out of range");
    }
  }
  Value offsets = g.constant(offsets_tensor(coords, neighbor_idx));
  return apply_mlp2(g, offsets, store, prefix + ".pos");
}

Tensor position_encode(std::span<const Point3> coords, const IndexMatrix& neighbor_idx,
                       ParamStore& store, const std::string& prefix) {
  Graph g;
  return g.value(position_encode_graph(g, coords, neighbor_idx, store, prefix));
}

PttForward ptt_forward_graph(Graph& g, const SeedSet& seeds, const PttConfig& config,
                             ParamStore& store, const std::string& prefix,
                             Value feats_override) {
  seeds.validate();
  config.validate();
  if (seeds.feat_width() != config.input_dim) {
    throw std::invalid_argument("ptt_forward: seed width " +
                                std::to_string(seeds.feat_width()) +
                                " does not match config input_dim " +
                                std::to_string(config.input_dim));
  }
  const std::size_t k = config.neighbors;
  const std::size_t m = config.resolved_embed_dim();
  const std::size_t mh = m / config.heads;

  PttForward fwd;
  Value f = feats_override.valid() ? feats_override : g.constant(seeds.feats);
  const IndexMatrix idx = knn(seeds.coords, seeds.coords, k);

  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    const std::string lp = layer_prefix(prefix, layer);
    Value emb = feature_embed_graph(g, f, store, lp);
    Value pos = position_encode_graph(g, seeds.coords, idx, store, lp);

    std::vector<Value> relations;
    std::vector<Value> values;
    relations.reserve(config.heads);
    values.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
      const std::string hp = lp + ".h" + std::to_string(h);
      Value gh = config.heads == 1 ? emb : g.slice_last(emb, h * mh, mh);
      Value q = apply_linear(g, gh, store, hp + ".q");
      Value key = g.gather_rows(apply_linear(g, gh, store, hp + ".k"), idx);
      Value val = g.gather_rows(apply_linear(g, gh, store, hp + ".v"), idx);
      Value qe = g.expand_mid(q, k);
      if (config.scalar_relation) {
        // Eq-style dot product, broadcast back over the channel axis.
        Value dot = g.sum_axis(g.mul(qe, key), 2);  // [N, k]
        relations.push_back(g.expand_last(dot, mh));
      } else {
        relations.push_back(g.sub(qe, key));  // channel-wise subtraction
      }
      values.push_back(config.position_on_value ? val : key);
    }
    Value sigma = config.heads == 1 ? relations[0] : g.concat_last(relations);
    Value pre = g.add(sigma, pos);
    Value gam = apply_mlp2(g, pre, store, lp + ".attn");
    Value weights = g.softmax(gam, 1);  // per channel, over the k neighbors
    Value vcat = config.heads == 1 ? values[0] : g.concat_last(values);
    Value vterm = g.add(vcat, pos);
    Value attended = g.sum_axis(g.mul(weights, vterm), 1);  // [N, M]
    f = g.add(f, apply_linear(g, attended, store, lp + ".proj"));

    fwd.weights.push_back(weights);
    fwd.idx.push_back(idx);
  }
  fwd.output = f;
  return fwd;
}

Tensor ptt_forward(const SeedSet& seeds, const PttConfig& config, ParamStore& store,
                   const std::string& prefix) {
  Graph g;
  return g.value(ptt_forward_graph(g, seeds, config, store, prefix).output);
}

Tensor attention_weights(const SeedSet& seeds, const PttConfig& config,
                         ParamStore& store, const std::string& prefix) {
  Graph g;
  PttForward fwd = ptt_forward_graph(g, seeds, config, store, prefix);
  return g.value(fwd.weights.back());
}

}  // namespace ptt
