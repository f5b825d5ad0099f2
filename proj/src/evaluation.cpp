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
#include "ptt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>

namespace ptt {
namespace {

double auc_percent(std::span<const double> samples, std::span<const double> thresholds,
                   bool exceed) {
  // Fraction of samples strictly above (overlap) / below (error) each
  // threshold, integrated by the trapezoid rule over the grid and expressed
  // as a percentage of the threshold range.
  std::vector<double> frac(thresholds.size(), 0.0);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    std::size_t hits = 0;
    for (double v : samples) {
      if (exceed ? (v > thresholds[i]) : (v < thresholds[i])) ++hits;
    }
    frac[i] = samples.empty() ? 0.0 : static_cast<double>(hits) / samples.size();
  }
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
    area += 0.5 * (frac[i] + frac[i + 1]) * (thresholds[i + 1] - thresholds[i]);
  }
  const double range = thresholds.back() - thresholds.front();
  return 100.0 * area / range;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

OpeConfig OpeConfig::defaults() {
  OpeConfig c;
  for (int i = 0; i <= 20; ++i) {
    c.overlap_thresholds.push_back(i * 0.05);
    c.error_thresholds.push_back(i * 0.1);
  }
  return c;
}

void OpeConfig::validate() const {
  auto ok = [](const std::vector<double>& g) {
    if (g.size() < 2) return false;
    for (std::size_t i = 1; i < g.size(); ++i) {
      if (g[i] <= g[i - 1]) return false;
    }
    return true;
  };
  if (!ok(overlap_thresholds) || !ok(error_thresholds)) {
    throw std::invalid_argument("OpeConfig: threshold grids must be strictly increasing");
  }
}

OpeResult ope_from_samples(std::span<const double> overlaps,
                           std::span<const double> center_errors, const OpeConfig& config) {
  config.validate();
  if (overlaps.size() != center_errors.size()) {
    throw std::invalid_argument("ope_from_samples: length mismatch");
  }
  OpeResult r;
  r.overlaps.assign(overlaps.begin(), overlaps.end());
  r.center_errors.assign(center_errors.begin(), center_errors.end());
  r.success = auc_percent(overlaps, config.overlap_thresholds, /*exceed=*/true);
  r.precision = auc_percent(center_errors, config.error_thresholds, /*exceed=*/false);
  return r;
}

OpeResult ope_metrics(std::span<const OrientedBox3> pred, std::span<const OrientedBox3> gt,
                      const OpeConfig& config) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("ope_metrics: prediction/ground-truth length mismatch");
  }
  if (pred.empty()) throw std::invalid_argument("ope_metrics: empty sequence");
  std::vector<double> overlaps, errors;
  for (std::size_t t = 1; t < pred.size(); ++t) {  // frame 0 is the initialization
    overlaps.push_back(iou_3d(pred[t], gt[t]));
    const Point3 d = pred[t].center - gt[t].center;
    errors.push_back(config.bev_center_error ? std::hypot(d.x, d.y) : d.norm());
  }
  return ope_from_samples(overlaps, errors, config);
}

std::size_t sparsity_bucket_index(std::size_t points) {
  if (points < 20) return 0;
  if (points < 100) return 1;
  if (points < 500) return 2;
  return 3;
}

std::size_t points_in_box(const PointCloud& cloud, const OrientedBox3& box) {
  std::size_t n = 0;
  for (const Point3& p : cloud.points) {
    if (box_contains(box, p)) ++n;
  }
  return n;
}

std::vector<SparsityBucket> sparsity_histogram(std::span<const TrackSequence> sequences) {
  std::array<std::size_t, 4> counts{};
  std::size_t total = 0;
  for (const TrackSequence& seq : sequences) {
    for (const Frame& f : seq.frames) {
      ++counts[sparsity_bucket_index(points_in_box(f.cloud, f.gt_box))];
      ++total;
    }
  }
  std::vector<SparsityBucket> out(4);
  for (std::size_t b = 0; b < 4; ++b) {
    out[b].label = kSparsityLabels[b];
    out[b].frames = counts[b];
    out[b].fraction = total ? static_cast<double>(counts[b]) / total : 0.0;
  }
  return out;
}

SequenceEval make_sequence_eval(const TrackSequence& seq,
                                std::span<const OrientedBox3> pred, const OpeConfig& config) {
  std::vector<OrientedBox3> gt;
  gt.reserve(seq.size());
  for (const Frame& f : seq.frames) gt.push_back(f.gt_box);
  const OpeResult r = ope_metrics(pred, gt, config);
  SequenceEval e;
  e.first_frame_points = points_in_box(seq.frames[0].cloud, seq.frames[0].gt_box);
  e.overlaps = r.overlaps;
  e.center_errors = r.center_errors;
  return e;
}

PerIntervalReport per_interval_ope(std::span<const SequenceEval> sequences,
                                   const OpeConfig& config) {
  PerIntervalReport report;
  std::array<std::vector<double>, 4> overlaps, errors;
  for (const SequenceEval& s : sequences) {
    const std::size_t b = sparsity_bucket_index(s.first_frame_points);
    overlaps[b].insert(overlaps[b].end(), s.overlaps.begin(), s.overlaps.end());
    errors[b].insert(errors[b].end(), s.center_errors.begin(), s.center_errors.end());
  }
  double acc_s = 0.0, acc_p = 0.0;
  for (std::size_t b = 0; b < 4; ++b) {
    IntervalOpe io;
    io.label = kSparsityLabels[b];
    io.frames = overlaps[b].size();
    if (io.frames > 0) {
      io.populated = true;
      io.ope = ope_from_samples(overlaps[b], errors[b], config);
      acc_s += io.ope.success * io.frames;
      acc_p += io.ope.precision * io.frames;
      report.total_frames += io.frames;
    }
    report.intervals.push_back(std::move(io));
  }
  if (report.total_frames > 0) {
    report.mean_success = acc_s / report.total_frames;
    report.mean_precision = acc_p / report.total_frames;
  }
  return report;
}

// ---------------------------------------------------------------------------
// KITTI labels

std::vector<KittiTracklet> convert_kitti_labels(std::istream& is, const std::string& scene) {
  std::map<int, KittiTracklet> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    KittiLabelRow row;
    if (!(ss >> row.frame >> row.track_id >> row.type >> row.truncated >> row.occluded >>
          row.alpha >> row.bbox[0] >> row.bbox[1] >> row.bbox[2] >> row.bbox[3] >> row.h >>
          row.w >> row.l >> row.x >> row.y >> row.z >> row.rotation_y)) {
      throw KittiParseError(line_no, "malformed label row");
    }
    std::string extra;
    if (ss >> extra) {
      // KITTI detection-style files append a score column; anything else is
      // malformed.
      double score;
      std::istringstream check(extra);
      if (!(check >> score) || (check >> extra)) {
        throw KittiParseError(line_no, "unexpected trailing fields");
      }
    }
    if (row.type == "DontCare") continue;
    KittiTracklet& tr = by_id.try_emplace(row.track_id, KittiTracklet{scene, row.track_id,
                                                                      row.type, {}}).first->second;
    if (!tr.rows.empty() && row.frame <= tr.rows.back().frame) {
      throw KittiParseError(line_no, "non-monotonic frame index for track " +
                                         std::to_string(row.track_id));
    }
    tr.rows.push_back(std::move(row));
  }
  std::vector<KittiTracklet> out;
  out.reserve(by_id.size());
  for (auto& [id, tr] : by_id) out.push_back(std::move(tr));
  return out;
}

OrientedBox3 kitti_box_z_up(const KittiLabelRow& row) {
  const Point3 center{row.z, -row.x, 0.5 * row.h - row.y};
  return OrientedBox3::make(center, row.w, row.h, row.l,
                            normalize_angle(row.rotation_y + 1.5707963267948966));
}

std::string serialize_kitti_row(const KittiLabelRow& row) {
  std::ostringstream os;
  os << row.frame << ' ' << row.track_id << ' ' << row.type << ' '
     << format_double(row.truncated) << ' ' << row.occluded << ' '
     << format_double(row.alpha);
  for (double v : row.bbox) os << ' ' << format_double(v);
  os << ' ' << format_double(row.h) << ' ' << format_double(row.w) << ' '
     << format_double(row.l) << ' ' << format_double(row.x) << ' '
     << format_double(row.y) << ' ' << format_double(row.z) << ' '
     << format_double(row.rotation_y);
  return os.str();
}

}  // namespace ptt
