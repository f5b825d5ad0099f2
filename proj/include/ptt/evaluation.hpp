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
#ifndef PTT_EVALUATION_HPP
#define PTT_EVALUATION_HPP

#include <array>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptt/geometry.hpp"
#include "ptt/sequence.hpp"

namespace ptt {

struct OpeConfig {
  std::vector<double> overlap_thresholds;  // strictly increasing on [0, 1]
  std::vector<double> error_thresholds;    // strictly increasing on [0, 2] m
  bool bev_center_error = false;           // ground-plane distance instead of 3D

  static OpeConfig defaults();  // 21 uniform points on each range
  void validate() const;
};

struct OpeResult {
  double success = 0.0;    // percent
  double precision = 0.0;  // percent
  std::vector<double> overlaps;       // per evaluated frame
  std::vector<double> center_errors;  // per evaluated frame
};

/// AUC (trapezoid rule, percent of threshold range) of the fraction of
/// frames with overlap > t, and with center error < t.
OpeResult ope_from_samples(std::span<const double> overlaps,
                           std::span<const double> center_errors, const OpeConfig& config);

/// Per-frame IoU/center error between prediction and ground truth; the first
/// frame is the initialization and is excluded.
OpeResult ope_metrics(std::span<const OrientedBox3> pred, std::span<const OrientedBox3> gt,
                      const OpeConfig& config);

// Point-sparsity intervals: <20, 20-100, 100-500, >500 points inside the
// ground-truth box.
inline constexpr std::array<const char*, 4> kSparsityLabels = {"<20", "20-100", "100-500", ">500"};
std::size_t sparsity_bucket_index(std::size_t points);
std::size_t points_in_box(const PointCloud& cloud, const OrientedBox3& box);

struct SparsityBucket {
  std::string label;
  std::size_t frames = 0;
  double fraction = 0.0;
};

std::vector<SparsityBucket> sparsity_histogram(std::span<const TrackSequence> sequences);

/// Per-sequence evaluated samples tagged with the first-frame point count.
struct SequenceEval {
  std::size_t first_frame_points = 0;
  std::vector<double> overlaps;
  std::vector<double> center_errors;
};

SequenceEval make_sequence_eval(const TrackSequence& seq,
                                std::span<const OrientedBox3> pred, const OpeConfig& config);

struct IntervalOpe {
  std::string label;
  bool populated = false;
  OpeResult ope;
  std::size_t frames = 0;
};

struct PerIntervalReport {
  std::vector<IntervalOpe> intervals;  // fixed bucket order
  double mean_success = 0.0;           // frame-count weighted
  double mean_precision = 0.0;
  std::size_t total_frames = 0;
};

PerIntervalReport per_interval_ope(std::span<const SequenceEval> sequences,
                                   const OpeConfig& config);

// --------------------------------------------------------------------------
// KITTI tracking label conversion (MOT labels -> per-ID SOT tracklets).

struct KittiLabelRow {
  int frame = 0;
  int track_id = 0;
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox{};  // 2D left, top, right, bottom
  double h = 0.0, w = 0.0, l = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;  // camera frame, bottom-center
  double rotation_y = 0.0;
};

struct KittiTracklet {
  std::string scene;
  int track_id = 0;
  std::string type;
  std::vector<KittiLabelRow> rows;  // frames strictly ascending
};

class KittiParseError : public std::runtime_error {
 public:
  KittiParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Groups rows by track id into frame-ordered tracklets. DontCare rows are
/// skipped; malformed rows and non-monotonic frames raise KittiParseError.
std::vector<KittiTracklet> convert_kitti_labels(std::istream& is, const std::string& scene);

/// Camera frame (x right, y down, z forward; location = bottom-face center,
/// yaw = rotation_y about the camera y axis) to the library's z-up frame:
/// X = z_cam, Y = -x_cam, Z = h/2 - y_cam, heading = rotation_y + pi/2.
OrientedBox3 kitti_box_z_up(const KittiLabelRow& row);

/// Round-trip serialization of one label row (17 whitespace-separated
/// fields, shortest-exact doubles).
std::string serialize_kitti_row(const KittiLabelRow& row);

}  // namespace ptt

#endif  // PTT_EVALUATION_HPP
