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
#ifndef PTT_TRAIN_HPP
#define PTT_TRAIN_HPP

#include <span>
#include <vector>

#include "ptt/loss.hpp"
#include "ptt/pipeline.hpp"
#include "ptt/sequence.hpp"

namespace ptt {

struct TrainConfig {
  double lr = 1e-3;
  double decay_factor = 0.2;     // once, after decay_after_epochs
  int decay_after_epochs = 12;   // 0 disables the decay
  int epochs = 200;
  int batch_size = 8;
  std::uint64_t seed = 0;
  LossConfig loss;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// One supervised frame: canonicalized template/search clouds plus the
/// ground-truth box expressed in the search canonical frame.
struct TrainSample {
  PointCloud template_cloud;
  PointCloud search_cloud;
  OrientedBox3 gt_canonical;
};

/// Builds (template, search, label) triplets from sequences: template from
/// the first-frame ground truth, search area centered on the per-frame
/// ground truth perturbed by augment_offsets. Frames with empty crops are
/// skipped.
std::vector<TrainSample> build_training_samples(std::span<const TrackSequence> sequences,
                                                const TrackerConfig& tracker,
                                                const SearchAreaPolicy& search_policy,
                                                const AugmentConfig& augment,
                                                std::uint64_t seed);

class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore& store, double beta1, double beta2, double eps);
  /// Applies one update from the gradients accumulated in `g`. Parameters
  /// absent from the graph are untouched.
  void step(const Graph& g, double lr);
  int steps() const { return t_; }

 private:
  ParamStore& store_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct StepRecord {
  int step = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<StepRecord> curve;
  bool diverged = false;
  int divergence_step = -1;
};

/// Deterministic Adam loop over the sample set. Batches are drawn by a
/// seeded shuffle each epoch; gradients average the per-sample losses.
/// Divergence (non-finite loss) aborts with the offending step index.
TrainResult train_toy(ParamStore& store, std::span<const TrainSample> samples,
                      const TrackerConfig& tracker, const TrainConfig& config);

}  // namespace ptt

#endif  // PTT_TRAIN_HPP
