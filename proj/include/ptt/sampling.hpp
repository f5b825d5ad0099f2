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
#ifndef PTT_SAMPLING_HPP
#define PTT_SAMPLING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ptt/autograd.hpp"
#include "ptt/geometry.hpp"
#include "ptt/tensor.hpp"

namespace ptt {

enum class SamplerKind { kRandom, kFps, kFeatFps };

SamplerKind sampler_from_string(const std::string& s);
const char* sampler_name(SamplerKind k);

struct SampleSpec {
  SamplerKind method = SamplerKind::kFps;
  std::size_t count = 1;
  std::uint64_t rng_seed = 0;
  std::size_t start_index = 0;   // FPS start point
  bool seeded_start = false;     // draw the start index from rng_seed instead

  void validate() const;
};

struct SampleResult {
  std::vector<std::int32_t> indices;
  bool repeated = false;  // count exceeded the input size, indices cycled
};

/// Uniform sampling: without replacement when count <= N (a permutation
/// prefix), with replacement otherwise. Reproducible from rng_seed.
SampleResult sample_random(std::span<const Point3> points, const SampleSpec& spec);
SampleResult sample_random(const PointCloud& cloud, const SampleSpec& spec);

/// Farthest point sampling in Euclidean coordinate space. Deterministic
/// given (point order, start index); ties broken by lowest index. If
/// count > N the selected indices cycle and `repeated` is set.
SampleResult sample_fps(std::span<const Point3> points, const SampleSpec& spec);
SampleResult sample_fps(const PointCloud& cloud, const SampleSpec& spec);

/// Farthest point sampling where the metric is Euclidean distance between
/// descriptor rows of `feats` [N, D].
SampleResult sample_feat_fps(const Tensor& feats, const SampleSpec& spec);

/// For each query point, indices of the k nearest base points, sorted by
/// ascending distance with ties broken by lower index. When the base has
/// fewer than k points the nearest index pads the remaining columns.
IndexMatrix knn(std::span<const Point3> query, std::span<const Point3> base,
                std::size_t k);

}  // namespace ptt

#endif  // PTT_SAMPLING_HPP
