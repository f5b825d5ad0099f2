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
#ifndef PTT_SYNTH_HPP
#define PTT_SYNTH_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ptt/geometry.hpp"
#include "ptt/sequence.hpp"

namespace ptt {

enum class TargetShape { kBoxShell, kLShell };
TargetShape target_shape_from_string(const std::string& s);
const char* target_shape_name(TargetShape s);

struct Pose {
  Point3 position;
  double heading = 0.0;
};

/// Constant-speed, constant-turn-rate ground motion, evaluated in closed
/// form (no integration drift).
struct TrajectorySpec {
  Point3 start{0.0, 0.0, 0.8};
  double heading0 = 0.0;   // radians
  double speed = 1.0;      // m/s
  double turn_rate = 0.0;  // rad/s
  double dt = 0.1;         // seconds per frame
};

Pose trajectory_pose(const TrajectorySpec& traj, std::size_t frame);

struct SceneSpec {
  std::string scene_id = "scene";
  TargetShape shape = TargetShape::kLShell;
  double target_w = 1.8;
  double target_h = 1.6;
  double target_l = 4.2;
  std::size_t frames = 10;
  std::size_t points_min = 50;   // on-target points per frame, pre-dropout
  std::size_t points_max = 200;
  std::vector<std::size_t> per_frame_counts;  // optional explicit plan
  std::size_t clutter_points = 100;
  double clutter_radius = 10.0;  // meters around the target center
  double dropout = 0.0;          // fraction of target points removed
  TrajectorySpec traj;
  std::uint64_t seed = 1;

  void validate() const;
  /// Stable FNV-1a digest over every field (hex string).
  std::string digest() const;
};

/// Deterministic per seed. On-target point counts are honored exactly
/// before dropout: surface samples are inset by 1e-9 m so every one tests
/// inside the box, and clutter is rejected from the box.
TrackSequence generate_sequence(const SceneSpec& spec);

struct CorpusEntry {
  std::string scene_id;
  std::string path;  // relative to the manifest directory
  std::uint64_t seed = 0;
  std::string digest;
};

/// Writes one sequence file per spec plus `manifest.tsv` into `dir`.
std::vector<CorpusEntry> generate_corpus(std::span<const SceneSpec> specs,
                                         const std::filesystem::path& dir);

// Fig-style per-frame sparsity mix for the KITTI-like preset.
inline constexpr std::array<double, 4> kKittiSparsityFractions = {0.2610, 0.3169, 0.2495,
                                                                  0.1725};

/// Sequences whose per-frame on-target counts follow the KITTI-like
/// sparsity mix exactly (largest-remainder quotas over all frames, shuffled
/// deterministically).
std::vector<SceneSpec> kitti_like_specs(std::size_t sequences, std::size_t frames_per_seq,
                                        std::uint64_t seed);

}  // namespace ptt

#endif  // PTT_SYNTH_HPP
