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
#include "ptt/loss.hpp"

#include <cmath>

#include "ptt/rng.hpp"

namespace ptt {
namespace {

// Mean of masked elementwise losses over the positive entries; exactly zero
// when there are none.
Value masked_mean(Graph& g, Value elementwise, const Tensor& mask, std::size_t positive_entries) {
  Value masked = g.mul(elementwise, g.constant(mask));
  const double denom = positive_entries > 0 ? static_cast<double>(positive_entries) : 1.0;
  return g.scale(g.sum_all(masked), 1.0 / denom);
}

}  // namespace

VoteLabels assign_vote_labels(std::span<const Point3> seed_coords,
                              const OrientedBox3& gt_box, const LossConfig& config) {
  if (!gt_box.valid()) throw std::invalid_argument("assign_vote_labels: invalid box");
  const std::size_t n = seed_coords.size();
  VoteLabels labels;
  labels.cls = Tensor::zeros({n});
  labels.offset_targets = Tensor::zeros({n, 3});
  labels.mask = Tensor::zeros({n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    bool positive = box_contains(gt_box, seed_coords[i]);
    if (positive && config.vote_positive_radius > 0.0) {
      positive = squared_distance(seed_coords[i], gt_box.center) <=
                 config.vote_positive_radius * config.vote_positive_radius;
    }
    if (!positive) continue;
    labels.cls[i] = 1.0;
    const Point3 off = gt_box.center - seed_coords[i];
    labels.offset_targets.at2(i, 0) = off.x;
    labels.offset_targets.at2(i, 1) = off.y;
    labels.offset_targets.at2(i, 2) = off.z;
    for (std::size_t t = 0; t < 3; ++t) labels.mask.at2(i, t) = 1.0;
    ++labels.positives;
  }
  return labels;
}

ProposalLabels assign_proposal_labels(Graph& g, const Tensor& proposal_centers,
                                      const OrientedBox3& gt_box, const LossConfig& config) {
  const std::size_t c = proposal_centers.shape[0];
  ProposalLabels labels;
  labels.cls = Tensor::zeros({c});
  labels.targets = Tensor::zeros({c, 4});
  labels.mask = Tensor::zeros({c, 4});
  for (std::size_t i = 0; i < c; ++i) {
    const Point3 center{proposal_centers.at2(i, 0), proposal_centers.at2(i, 1),
                        proposal_centers.at2(i, 2)};
    const double dist = std::sqrt(squared_distance(center, gt_box.center));
    // Labels flip when a center crosses the threshold; record the margin so
    // finite-difference checks can skip near-flips.
    g.note_kink_distance(std::abs(dist - config.proposal_positive_threshold));
    if (dist >= config.proposal_positive_threshold) continue;
    labels.cls[i] = 1.0;
    labels.targets.at2(i, 0) = gt_box.center.x;
    labels.targets.at2(i, 1) = gt_box.center.y;
    labels.targets.at2(i, 2) = gt_box.center.z;
    labels.targets.at2(i, 3) = gt_box.heading;
    for (std::size_t t = 0; t < 4; ++t) labels.mask.at2(i, t) = 1.0;
    ++labels.positives;
  }
  return labels;
}

LossValues compute_loss_graph(Graph& g, const StageOutputs& outputs,
                              const OrientedBox3& gt_canonical, const LossConfig& config) {
  const VoteLabels vl = assign_vote_labels(outputs.seed_coords, gt_canonical, config);
  LossValues values;
  values.cv = g.mean_all(g.bce_with_logits(outputs.seed_logits, g.constant(vl.cls)));
  values.rv = masked_mean(
      g,
      g.smooth_l1(outputs.vote_offsets, g.constant(vl.offset_targets), config.smooth_l1_delta),
      vl.mask, vl.positives * 3);

  // Proposal positives are keyed on the cluster centers; the regression then
  // supervises the predicted (x, y, z, heading) of those positives.
  const Tensor& label_centers = outputs.cluster_centers_value.valid()
                                    ? g.value(outputs.cluster_centers_value)
                                    : g.value(outputs.proposal_centers);
  const ProposalLabels pl = assign_proposal_labels(g, label_centers, gt_canonical, config);
  values.cb = g.mean_all(g.bce_with_logits(outputs.proposal_logits, g.constant(pl.cls)));
  const std::size_t c = g.value(outputs.proposal_logits).shape[0];
  Value pred4 = g.concat_last(
      {outputs.proposal_centers, g.reshape(outputs.proposal_headings, {c, 1})});
  values.rb = masked_mean(
      g, g.smooth_l1(pred4, g.constant(pl.targets), config.smooth_l1_delta), pl.mask,
      pl.positives * 4);

  values.all = g.add(g.add(values.cv, g.scale(values.cb, config.lambda1)),
                     g.add(g.scale(values.rv, config.lambda2),
                           g.scale(values.rb, config.lambda3)));
  return values;
}

LossBreakdown read_loss(const Graph& g, const LossValues& values) {
  LossBreakdown b;
  b.cv = g.value(values.cv).item();
  b.cb = g.value(values.cb).item();
  b.rv = g.value(values.rv).item();
  b.rb = g.value(values.rb).item();
  b.all = g.value(values.all).item();
  return b;
}

OrientedBox3 augment_offsets(const OrientedBox3& gt_box, Rng& rng,
                             const AugmentConfig& config) {
  const double dx = rng.uniform(-config.xyz_range, config.xyz_range);
  const double dy = rng.uniform(-config.xyz_range, config.xyz_range);
  const double dz = rng.uniform(-config.xyz_range, config.xyz_range);
  const double yaw_range = config.yaw_range_deg * 3.14159265358979323846 / 180.0;
  const double dyaw = rng.uniform(-yaw_range, yaw_range);
  return OrientedBox3::make({gt_box.center.x + dx, gt_box.center.y + dy, gt_box.center.z + dz},
                            gt_box.w, gt_box.h, gt_box.l, gt_box.heading + dyaw);
}

}  // namespace ptt
