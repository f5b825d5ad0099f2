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
#ifndef PTT_LOSS_HPP
#define PTT_LOSS_HPP

#include <span>

#include "ptt/autograd.hpp"
#include "ptt/geometry.hpp"
#include "ptt/pipeline.hpp"

namespace ptt {

class Rng;

struct LossConfig {
  double lambda1 = 1.0;  // proposal classification weight
  double lambda2 = 1.0;  // vote regression weight
  double lambda3 = 1.0;  // proposal regression weight
  double vote_positive_radius = 0.0;        // extra center-distance cap, 0 = box only
  double proposal_positive_threshold = 0.3; // meters, center proximity
  double smooth_l1_delta = 1.0;
};

/// Seeds inside the ground-truth box are positive; positives regress the
/// offset to the box center, negatives are masked out of the regression.
struct VoteLabels {
  Tensor cls;             // [N], 0/1
  Tensor offset_targets;  // [N, 3] gt center - seed coord (zeros for negatives)
  Tensor mask;            // [N, 3]
  std::size_t positives = 0;
};

VoteLabels assign_vote_labels(std::span<const Point3> seed_coords,
                              const OrientedBox3& gt_box,
                              const LossConfig& config = {});

/// Proposals whose cluster center lands within the threshold of the
/// ground-truth center are positive (vote regression pulls foreground
/// clusters inside the threshold, so positives appear as training
/// progresses). Labels are computed from forward values and enter the graph
/// as constants; the decision margin is noted as a kink.
struct ProposalLabels {
  Tensor cls;      // [C]
  Tensor targets;  // [C, 4] gt (x, y, z, heading), zeros for negatives
  Tensor mask;     // [C, 4]
  std::size_t positives = 0;
};

ProposalLabels assign_proposal_labels(Graph& g, const Tensor& proposal_centers,
                                      const OrientedBox3& gt_box,
                                      const LossConfig& config);

struct LossValues {
  Value cv;   // vote classification
  Value cb;   // proposal classification
  Value rv;   // vote regression (positives only)
  Value rb;   // proposal regression (positives only)
  Value all;  // cv + l1*cb + l2*rv + l3*rb
};

struct LossBreakdown {
  double cv = 0.0, cb = 0.0, rv = 0.0, rb = 0.0, all = 0.0;
};

/// Four-term objective over one forward pass. Classification terms are mean
/// BCE on logits; regression terms are smooth-L1 averaged over positive
/// entries (exactly zero when there are no positives).
LossValues compute_loss_graph(Graph& g, const StageOutputs& outputs,
                              const OrientedBox3& gt_canonical, const LossConfig& config);

LossBreakdown read_loss(const Graph& g, const LossValues& values);

struct AugmentConfig {
  double xyz_range = 0.3;      // meters, uniform in +-range
  double yaw_range_deg = 5.0;  // degrees, uniform in +-range
};

/// Uniform perturbation of center and heading used when simulating search
/// areas during training.
OrientedBox3 augment_offsets(const OrientedBox3& gt_box, Rng& rng,
                             const AugmentConfig& config = {});

}  // namespace ptt

#endif  // PTT_LOSS_HPP
