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
#ifndef PTT_IO_HPP
#define PTT_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ptt/geometry.hpp"
#include "ptt/pipeline.hpp"
#include "ptt/sequence.hpp"
#include "ptt/synth.hpp"
#include "ptt/train.hpp"

namespace ptt {

/// Binary point-cloud block: magic "PTPC", version byte, u64 point count,
/// u32 feature width, then little-endian f64 xyz rows and feature rows.
void write_point_cloud(std::ostream& os, const PointCloud& cloud);
PointCloud read_point_cloud(std::istream& is);
void write_point_cloud_file(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_point_cloud_file(const std::filesystem::path& path);

/// Sequence container: magic "PTSQ", version byte, scene id, frame count,
/// then per frame a 7-double box (cx cy cz w h l heading) and an embedded
/// point-cloud block.
void write_sequence(const std::filesystem::path& path, const TrackSequence& seq);
TrackSequence read_sequence(const std::filesystem::path& path);

/// Manifest: one tab-separated line per sequence:
/// scene_id <TAB> path <TAB> seed <TAB> digest
void write_manifest(const std::filesystem::path& path, std::span<const CorpusEntry> entries);
std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path);
std::vector<TrackSequence> load_corpus(const std::filesystem::path& manifest_path);

/// Tracking trace: one line per frame,
/// frame cx cy cz w h l heading score iou empty_search
void write_trace(std::ostream& os, std::span<const FrameTrace> frames);
void write_trace_file(const std::filesystem::path& path, std::span<const FrameTrace> frames);

/// Loss curve: one line per step, "step L_cv L_cb L_rv L_rb L_all".
void write_loss_curve(std::ostream& os, std::span<const StepRecord> records);
void write_loss_curve_file(const std::filesystem::path& path,
                           std::span<const StepRecord> records);

/// Shortest exact decimal form of a double ("%.17g").
std::string format_double(double v);

}  // namespace ptt

#endif  // PTT_IO_HPP
