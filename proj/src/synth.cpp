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
#include "ptt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ptt/io.hpp"
#include "ptt/rng.hpp"

namespace ptt {
namespace {

constexpr double kShellInset = 1e-9;  // keeps surface samples inside the box

// Box faces in local coordinates: index 0..3 side faces (+x, -x, +y, -y),
// 4 top, 5 bottom.
struct Face {
  int axis;     // 0=x, 1=y, 2=z (the fixed coordinate)
  double sign;  // +1 or -1
  double area;
};

std::array<Face, 6> box_faces(double w, double h, double l) {
  return {{{0, +1.0, w * h},
           {0, -1.0, w * h},
           {1, +1.0, l * h},
           {1, -1.0, l * h},
           {2, +1.0, l * w},
           {2, -1.0, l * w}}};
}

Point3 sample_face(const Face& face, double w, double h, double l, Rng& rng) {
  const double hx = 0.5 * l - kShellInset;
  const double hy = 0.5 * w - kShellInset;
  const double hz = 0.5 * h - kShellInset;
  Point3 p{rng.uniform(-hx, hx), rng.uniform(-hy, hy), rng.uniform(-hz, hz)};
  if (face.axis == 0) p.x = face.sign * hx;
  if (face.axis == 1) p.y = face.sign * hy;
  if (face.axis == 2) p.z = face.sign * hz;
  return p;
}

// The two side faces an origin sensor sees best at this pose.
std::array<Face, 2> visible_side_faces(const OrientedBox3& box) {
  const auto faces = box_faces(box.w, box.h, box.l);
  std::array<std::pair<double, std::size_t>, 4> scored;
  for (std::size_t i = 0; i < 4; ++i) {
    const Face& f = faces[i];
    Point3 normal_local{0.0, 0.0, 0.0};
    Point3 center_local{0.0, 0.0, 0.0};
    if (f.axis == 0) {
      normal_local.x = f.sign;
      center_local.x = f.sign * 0.5 * box.l;
    } else {
      normal_local.y = f.sign;
      center_local.y = f.sign * 0.5 * box.w;
    }
    const Point3 center_world = from_box_frame(box, center_local);
    const Point3 normal_world = from_box_frame(box, normal_local) - box.center;
    const Point3 to_sensor = Point3{0.0, 0.0, center_world.z} - center_world;
    scored[i] = {normal_world.dot(to_sensor), i};
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  return {faces[scored[0].second], faces[scored[1].second]};
}

}  // namespace

void TrackSequence::validate() const {
  if (frames.size() < 2) throw std::invalid_argument("TrackSequence: needs >= 2 frames");
  for (const Frame& f : frames) {
    if (!f.gt_box.valid()) throw std::invalid_argument("TrackSequence: invalid GT box");
    f.cloud.validate();
  }
}

TargetShape target_shape_from_string(const std::string& s) {
  if (s == "box-shell") return TargetShape::kBoxShell;
  if (s == "l-shell") return TargetShape::kLShell;
  throw std::invalid_argument("unknown target shape '" + s + "'");
}

const char* target_shape_name(TargetShape s) {
  return s == TargetShape::kBoxShell ? "box-shell" : "l-shell";
}

Pose trajectory_pose(const TrajectorySpec& traj, std::size_t frame) {
  const double t = traj.dt * static_cast<double>(frame);
  const double theta = traj.heading0 + traj.turn_rate * t;
  Pose pose;
  pose.heading = normalize_angle(theta);
  if (std::abs(traj.turn_rate) < 1e-12) {
    pose.position = {traj.start.x + traj.speed * t * std::cos(traj.heading0),
                     traj.start.y - traj.speed * t * std::sin(traj.heading0),
                     traj.start.z};
  } else {
    const double r = traj.speed / traj.turn_rate;
    pose.position = {traj.start.x + r * (std::sin(theta) - std::sin(traj.heading0)),
                     traj.start.y + r * (std::cos(theta) - std::cos(traj.heading0)),
                     traj.start.z};
  }
  return pose;
}

void SceneSpec::validate() const {
  if (frames < 2) throw std::invalid_argument("SceneSpec: needs >= 2 frames");
  if (target_w <= 0.0 || target_h <= 0.0 || target_l <= 0.0) {
    throw std::invalid_argument("SceneSpec: target size must be positive");
  }
  if (points_min > points_max) {
    throw std::invalid_argument("SceneSpec: points_min > points_max");
  }
  if (!per_frame_counts.empty() && per_frame_counts.size() != frames) {
    throw std::invalid_argument("SceneSpec: per-frame plan length mismatch");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("SceneSpec: dropout must be in [0, 1)");
  }
}

std::string SceneSpec::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  eat(scene_id.data(), scene_id.size());
  const int shape_tag = static_cast<int>(shape);
  eat(&shape_tag, sizeof(shape_tag));
  const double doubles[] = {target_w,       target_h,        target_l,
                            clutter_radius, dropout,         traj.start.x,
                            traj.start.y,   traj.start.z,    traj.heading0,
                            traj.speed,     traj.turn_rate,  traj.dt};
  eat(doubles, sizeof(doubles));
  const std::uint64_t sizes[] = {frames, points_min, points_max, clutter_points, seed};
  eat(sizes, sizeof(sizes));
  for (std::size_t c : per_frame_counts) eat(&c, sizeof(c));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrackSequence generate_sequence(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  TrackSequence seq;
  seq.scene_id = spec.scene_id;
  seq.frames.reserve(spec.frames);

  for (std::size_t t = 0; t < spec.frames; ++t) {
    const Pose pose = trajectory_pose(spec.traj, t);
    const OrientedBox3 box = OrientedBox3::make(pose.position, spec.target_w, spec.target_h,
                                                spec.target_l, pose.heading);
    const std::size_t requested =
        spec.per_frame_counts.empty()
            ? static_cast<std::size_t>(rng.uniform_int(
                  static_cast<std::int64_t>(spec.points_min),
                  static_cast<std::int64_t>(spec.points_max)))
            : spec.per_frame_counts[t];

    Frame frame;
    frame.gt_box = box;
    frame.cloud.points.reserve(requested + spec.clutter_points);

    const auto all_faces = box_faces(spec.target_w, spec.target_h, spec.target_l);
    std::array<Face, 2> l_faces{};
    double total_area = 0.0;
    if (spec.shape == TargetShape::kLShell) {
      l_faces = visible_side_faces(box);
      total_area = l_faces[0].area + l_faces[1].area;
    } else {
      for (const Face& f : all_faces) total_area += f.area;
    }

    for (std::size_t i = 0; i < requested; ++i) {
      double pick = rng.uniform() * total_area;
      const Face* face = nullptr;
      if (spec.shape == TargetShape::kLShell) {
        face = pick < l_faces[0].area ? &l_faces[0] : &l_faces[1];
      } else {
        for (const Face& f : all_faces) {
          if (pick < f.area) {
            face = &f;
            break;
          }
          pick -= f.area;
        }
        if (face == nullptr) face = &all_faces.back();
      }
      const Point3 local = sample_face(*face, spec.target_w, spec.target_h, spec.target_l, rng);
      frame.cloud.points.push_back(from_box_frame(box, local));
    }
    if (spec.dropout > 0.0) {
      std::vector<Point3> kept;
      kept.reserve(frame.cloud.points.size());
      for (const Point3& p : frame.cloud.points) {
        if (rng.uniform() >= spec.dropout) kept.push_back(p);
      }
      frame.cloud.points = std::move(kept);
    }

    for (std::size_t i = 0; i < spec.clutter_points; ++i) {
      Point3 p;
      for (int attempt = 0; attempt < 256; ++attempt) {
        p = {box.center.x + rng.uniform(-spec.clutter_radius, spec.clutter_radius),
             box.center.y + rng.uniform(-spec.clutter_radius, spec.clutter_radius),
             box.center.z + rng.uniform(-spec.target_h, spec.target_h)};
        if (!box_contains(box, p)) break;
      }
      frame.cloud.points.push_back(p);
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<CorpusEntry> generate_corpus(std::span<const SceneSpec> specs,
                                         const std::filesystem::path& dir) {
  if (specs.empty()) throw std::invalid_argument("generate_corpus: no specs");
  std::filesystem::create_directories(dir);
  std::vector<CorpusEntry> entries;
  entries.reserve(specs.size());
  for (const SceneSpec& spec : specs) {
    const TrackSequence seq = generate_sequence(spec);
    const std::string filename = spec.scene_id + ".ptsq";
    write_sequence(dir / filename, seq);
    entries.push_back({spec.scene_id, filename, spec.seed, spec.digest()});
  }
  write_manifest(dir / "manifest.tsv", entries);
  return entries;
}

std::vector<SceneSpec> kitti_like_specs(std::size_t sequences, std::size_t frames_per_seq,
                                        std::uint64_t seed) {
  if (sequences == 0 || frames_per_seq < 2) {
    throw std::invalid_argument("kitti_like_specs: need >= 1 sequence of >= 2 frames");
  }
  const std::size_t total = sequences * frames_per_seq;

  // Largest-remainder quotas: the corpus hits the target mix exactly up to
  // integer rounding.
  std::array<std::size_t, 4> quota{};
  std::array<double, 4> remainder{};
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    const double exact = kKittiSparsityFractions[b] * static_cast<double>(total);
    quota[b] = static_cast<std::size_t>(exact);
    remainder[b] = exact - static_cast<double>(quota[b]);
    assigned += quota[b];
  }
  while (assigned < total) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < 4; ++b) {
      if (remainder[b] > remainder[best]) best = b;
    }
    ++quota[best];
    remainder[best] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> buckets;
  buckets.reserve(total);
  for (std::size_t b = 0; b < 4; ++b) {
    buckets.insert(buckets.end(), quota[b], b);
  }
  Rng rng(mix_seed(seed, 0x515a));
  rng.shuffle(buckets);

  static constexpr std::array<std::pair<std::size_t, std::size_t>, 4> kRanges = {
      {{5, 19}, {20, 99}, {100, 499}, {500, 900}}};

  std::vector<SceneSpec> specs;
  specs.reserve(sequences);
  for (std::size_t s = 0; s < sequences; ++s) {
    SceneSpec spec;
    char name[32];
    std::snprintf(name, sizeof(name), "kitti_like_%03zu", s);
    spec.scene_id = name;
    spec.frames = frames_per_seq;
    spec.seed = mix_seed(seed, s + 1);
    spec.traj.start = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), 0.8};
    spec.traj.heading0 = rng.uniform(-3.0, 3.0);
    spec.traj.speed = rng.uniform(0.0, 3.0);
    spec.traj.turn_rate = rng.uniform(-0.2, 0.2);
    spec.clutter_points = 120;
    spec.per_frame_counts.reserve(frames_per_seq);
    for (std::size_t t = 0; t < frames_per_seq; ++t) {
      const std::size_t b = buckets[s * frames_per_seq + t];
      spec.per_frame_counts.push_back(static_cast<std::size_t>(rng.uniform_int(
          static_cast<std::int64_t>(kRanges[b].first),
          static_cast<std::int64_t>(kRanges[b].second))));
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace ptt
