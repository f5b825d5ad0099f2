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
#include "ptt/backbone.hpp"

#include <stdexcept>

#include "ptt/rng.hpp"

namespace ptt {
namespace {

void add_linear(ParamStore& store, const std::string& name, std::size_t in,
                std::size_t out, Rng& rng) {
  store.add(name + ".w", init_linear_weight(in, out, rng));
  Tensor b = Tensor::zeros({out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : b.data) v = rng.uniform(-bound, bound);
  store.add(name + ".b", std::move(b));
}

// Neighbors within `radius` of each center, scan order, capped and padded by
// repeating the first member; falls back to the nearest point when the ball
// is empty.
IndexMatrix ball_group(std::span<const Point3> centers, std::span<const Point3> points,
                       double radius, std::size_t cap) {
  const double r2 = radius * radius;
  IndexMatrix idx(centers.size(), cap);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    std::size_t found = 0;
    for (std::size_t i = 0; i < points.size() && found < cap; ++i) {
      if (squared_distance(centers[c], points[i]) <= r2) {
        idx.at(c, found++) = static_cast<std::int32_t>(i);
      }
    }
    if (found == 0) {
      std::size_t best = 0;
      double best_d = squared_distance(centers[c], points[0]);
      for (std::size_t i = 1; i < points.size(); ++i) {
        const double d = squared_distance(centers[c], points[i]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      idx.at(c, found++) = static_cast<std::int32_t>(best);
    }
    for (std::size_t j = found; j < cap; ++j) idx.at(c, j) = idx.at(c, 0);
  }
  return idx;
}

SampleResult select_centers(std::span<const Point3> coords, const Tensor* feats,
                            const BackboneConfig& config, std::size_t count,
                            std::size_t level) {
  SampleSpec spec;
  spec.count = count;
  spec.rng_seed = mix_seed(config.sampler_seed, level);
  switch (config.sampler) {
    case SamplerKind::kRandom:
      spec.method = SamplerKind::kRandom;
      return sample_random(coords, spec);
    case SamplerKind::kFeatFps:
      // Feature-space selection needs descriptors; the first level has none.
      if (feats != nullptr && feats->rank() == 2 && feats->shape[1] > 0) {
        spec.method = SamplerKind::kFeatFps;
        return sample_feat_fps(*feats, spec);
      }
      [[fallthrough]];
    case SamplerKind::kFps:
      spec.method = SamplerKind::kFps;
      return sample_fps(coords, spec);
  }
  throw std::logic_error("select_centers: unreachable");
}

}  // namespace

void BackboneConfig::validate() const {
  if (levels.empty()) throw std::invalid_argument("BackboneConfig: no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const BackboneLevel& l = levels[i];
    if (l.centers == 0 || l.group_cap == 0 || l.hidden == 0 || l.out == 0 || l.radius <= 0.0) {
      throw std::invalid_argument("BackboneConfig: invalid level " + std::to_string(i));
    }
    if (i > 0 && l.centers >= levels[i - 1].centers) {
      throw std::invalid_argument("BackboneConfig: center counts must strictly decrease");
    }
  }
}

BackboneConfig BackboneConfig::defaults() {
  BackboneConfig c;
  c.levels = {{512, 0.3, 16, 32, 64}, {128, 0.5, 16, 64, 64}};
  return c;
}

void init_backbone_params(ParamStore& store, const std::string& prefix,
                          const BackboneConfig& config, Rng& rng) {
  config.validate();
  std::size_t in_dim = config.input_feat_dim;
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    const BackboneLevel& l = config.levels[i];
    const std::string lp = prefix + ".level" + std::to_string(i);
    add_linear(store, lp + ".l1", 3 + in_dim, l.hidden, rng);
    add_linear(store, lp + ".l2", l.hidden, l.out, rng);
    in_dim = l.out;
  }
}

BackboneOut backbone_forward_graph(Graph& g, const PointCloud& cloud,
                                   const BackboneConfig& config, ParamStore& store,
                                   const std::string& prefix) {
  config.validate();
  cloud.validate();
  if (cloud.empty()) throw std::invalid_argument("backbone_forward: empty cloud");
  if (cloud.feature_width != config.input_feat_dim) {
    throw std::invalid_argument("backbone_forward: cloud feature width " +
                                std::to_string(cloud.feature_width) +
                                " does not match config " +
                                std::to_string(config.input_feat_dim));
  }

  std::vector<Point3> coords = cloud.points;
  Value feats{};
  Tensor feats_value;
  if (config.input_feat_dim > 0) {
    feats_value = Tensor({cloud.size(), config.input_feat_dim}, cloud.features);
    feats = g.constant(feats_value);
  }

  for (std::size_t li = 0; li < config.levels.size(); ++li) {
    const BackboneLevel& level = config.levels[li];
    const std::string lp = prefix + ".level" + std::to_string(li);
    const SampleResult centers_sel =
        select_centers(coords, feats.valid() ? &feats_value : nullptr, config,
                       level.centers, li);

    std::vector<Point3> centers(level.centers);
    for (std::size_t c = 0; c < level.centers; ++c) {
      centers[c] = coords[static_cast<std::size_t>(centers_sel.indices[c])];
    }
    const IndexMatrix group = ball_group(centers, coords, level.radius, level.group_cap);

    // Per-neighbor input rows: (neighbor - center, neighbor feature).
    Tensor offs = Tensor::zeros({level.centers, level.group_cap, 3});
    for (std::size_t c = 0; c < level.centers; ++c) {
      for (std::size_t j = 0; j < level.group_cap; ++j) {
        const Point3 d = coords[static_cast<std::size_t>(group.at(c, j))] - centers[c];
        offs.at3(c, j, 0) = d.x;
        offs.at3(c, j, 1) = d.y;
        offs.at3(c, j, 2) = d.z;
      }
    }
    Value rows = g.constant(std::move(offs));
    if (feats.valid()) {
      rows = g.concat_last({rows, g.gather_rows(feats, group)});
    }
    Value h1 = g.relu(g.linear(rows, g.param(store, lp + ".l1.w"), g.param(store, lp + ".l1.b")));
    Value h2 = g.relu(g.linear(h1, g.param(store, lp + ".l2.w"), g.param(store, lp + ".l2.b")));
    feats = g.max_axis(h2, 1);  // [centers, out]
    feats_value = g.value(feats);
    coords = std::move(centers);
  }
  return {std::move(coords), feats};
}

SeedSet backbone_forward(const PointCloud& cloud, const BackboneConfig& config,
                         ParamStore& store, const std::string& prefix) {
  Graph g;
  BackboneOut out = backbone_forward_graph(g, cloud, config, store, prefix);
  return {std::move(out.coords), g.value(out.feats)};
}

}  // namespace ptt
