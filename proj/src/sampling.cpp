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
#include "ptt/sampling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ptt/rng.hpp"

namespace ptt {
namespace {

// Generic FPS over any squared-distance callable. Ties go to the lowest
// unselected index; selections cycle when count > n.
SampleResult fps_generic(std::size_t n, const SampleSpec& spec,
                         const std::function<double(std::size_t, std::size_t)>& dist2) {
  if (n == 0) throw std::invalid_argument("sample_fps: empty input");
  std::size_t start = spec.start_index;
  if (spec.seeded_start) {
    Rng rng(spec.rng_seed);
    start = static_cast<std::size_t>(rng.below(n));
  }
  if (start >= n) throw std::invalid_argument("sample_fps: start index out of range");

  SampleResult out;
  out.indices.reserve(spec.count);
  const std::size_t unique = std::min(spec.count, n);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<char> selected(n, 0);

  std::size_t last = start;
  out.indices.push_back(static_cast<std::int32_t>(last));
  selected[last] = 1;
  for (std::size_t s = 1; s < unique; ++s) {
    double best = -1.0;
    std::size_t best_i = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      const double d = std::min(min_d[i], dist2(last, i));
      min_d[i] = d;
      if (d > best) {  // strict: keeps the lowest index on ties
        best = d;
        best_i = i;
      }
    }
    last = best_i;
    out.indices.push_back(static_cast<std::int32_t>(last));
    selected[last] = 1;
  }
  for (std::size_t s = unique; s < spec.count; ++s) {
    out.indices.push_back(out.indices[s % unique]);
    out.repeated = true;
  }
  return out;
}

}  // namespace

SamplerKind sampler_from_string(const std::string& s) {
  if (s == "rs" || s == "random") return SamplerKind::kRandom;
  if (s == "fps") return SamplerKind::kFps;
  if (s == "feat-fps" || s == "feat_fps") return SamplerKind::kFeatFps;
  throw std::invalid_argument("unknown sampler '" + s + "'");
}

const char* sampler_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::kRandom: return "rs";
    case SamplerKind::kFps: return "fps";
    case SamplerKind::kFeatFps: return "feat-fps";
  }
  return "?";
}

void SampleSpec::validate() const {
  if (count < 1) throw std::invalid_argument("SampleSpec: count must be >= 1");
}

SampleResult sample_random(std::span<const Point3> points, const SampleSpec& spec) {
  spec.validate();
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("sample_random: empty input");
  Rng rng(spec.rng_seed);
  SampleResult out;
  out.indices.reserve(spec.count);
  if (spec.count <= n) {
    std::vector<std::int32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    // Partial Fisher-Yates: the first `count` entries are the draw.
    for (std::size_t i = 0; i < spec.count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(perm[i], perm[j]);
    }
    out.indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(spec.count));
  } else {
    out.repeated = true;
    for (std::size_t i = 0; i < spec.count; ++i) {
      out.indices.push_back(static_cast<std::int32_t>(rng.below(n)));
    }
  }
  return out;
}

SampleResult sample_random(const PointCloud& cloud, const SampleSpec& spec) {
  return sample_random(std::span<const Point3>(cloud.points), spec);
}

SampleResult sample_fps(std::span<const Point3> points, const SampleSpec& spec) {
  spec.validate();
  return fps_generic(points.size(), spec, [&points](std::size_t a, std::size_t b) {
    return squared_distance(points[a], points[b]);
  });
}

SampleResult sample_fps(const PointCloud& cloud, const SampleSpec& spec) {
  return sample_fps(std::span<const Point3>(cloud.points), spec);
}

SampleResult sample_feat_fps(const Tensor& feats, const SampleSpec& spec) {
  spec.validate();
  if (feats.rank() != 2 || feats.shape[1] == 0) {
    throw std::invalid_argument("sample_feat_fps: descriptors required, got shape " +
                                shape_str(feats.shape));
  }
  const std::size_t d = feats.shape[1];
  return fps_generic(feats.shape[0], spec, [&feats, d](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = feats.at2(a, t) - feats.at2(b, t);
      acc += diff * diff;
    }
    return acc;
  });
}

IndexMatrix knn(std::span<const Point3> query, std::span<const Point3> base,
                std::size_t k) {
  if (base.empty()) throw std::invalid_argument("knn: empty base set");
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  const std::size_t m = base.size();
  const std::size_t keep = std::min(k, m);
  IndexMatrix idx(query.size(), k);
  std::vector<std::pair<double, std::int32_t>> cand(m);
  for (std::size_t q = 0; q < query.size(); ++q) {
    for (std::size_t i = 0; i < m; ++i) {
      cand[i] = {squared_distance(query[q], base[i]), static_cast<std::int32_t>(i)};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep),
                      cand.end());
    for (std::size_t j = 0; j < keep; ++j) idx.at(q, j) = cand[j].second;
    for (std::size_t j = keep; j < k; ++j) idx.at(q, j) = cand[0].second;
  }
  return idx;
}

}  // namespace ptt
