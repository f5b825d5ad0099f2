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
#include "ptt/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ptt {
namespace {

constexpr char kCloudMagic[4] = {'P', 'T', 'P', 'C'};
constexpr char kSequenceMagic[4] = {'P', 'T', 'S', 'Q'};
constexpr unsigned char kFormatVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  write_u64(os, v);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  const std::uint64_t v = read_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void expect_magic(std::istream& is, const char (&magic)[4], const char* what) {
  char got[4];
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0) {
    throw std::runtime_error(std::string("bad magic for ") + what);
  }
  const int version = is.get();
  if (version != kFormatVersion) {
    throw std::runtime_error(std::string(what) + ": unsupported version " +
                             std::to_string(version));
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_point_cloud(std::ostream& os, const PointCloud& cloud) {
  cloud.validate();
  os.write(kCloudMagic, 4);
  os.put(static_cast<char>(kFormatVersion));
  write_u64(os, cloud.size());
  write_u32(os, static_cast<std::uint32_t>(cloud.feature_width));
  for (const Point3& p : cloud.points) {
    write_f64(os, p.x);
    write_f64(os, p.y);
    write_f64(os, p.z);
  }
  for (double v : cloud.features) write_f64(os, v);
}

PointCloud read_point_cloud(std::istream& is) {
  expect_magic(is, kCloudMagic, "point cloud");
  PointCloud cloud;
  const std::uint64_t count = read_u64(is);
  cloud.feature_width = read_u32(is);
  cloud.points.resize(count);
  for (Point3& p : cloud.points) {
    p.x = read_f64(is);
    p.y = read_f64(is);
    p.z = read_f64(is);
  }
  cloud.features.resize(count * cloud.feature_width);
  for (double& v : cloud.features) v = read_f64(is);
  if (!is) throw std::runtime_error("truncated point cloud block");
  return cloud;
}

void write_point_cloud_file(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  write_point_cloud(os, cloud);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

PointCloud read_point_cloud_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  return read_point_cloud(is);
}

void write_sequence(const std::filesystem::path& path, const TrackSequence& seq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os.write(kSequenceMagic, 4);
  os.put(static_cast<char>(kFormatVersion));
  write_u32(os, static_cast<std::uint32_t>(seq.scene_id.size()));
  os.write(seq.scene_id.data(), static_cast<std::streamsize>(seq.scene_id.size()));
  write_u64(os, seq.frames.size());
  for (const Frame& f : seq.frames) {
    write_f64(os, f.gt_box.center.x);
    write_f64(os, f.gt_box.center.y);
    write_f64(os, f.gt_box.center.z);
    write_f64(os, f.gt_box.w);
    write_f64(os, f.gt_box.h);
    write_f64(os, f.gt_box.l);
    write_f64(os, f.gt_box.heading);
    write_point_cloud(os, f.cloud);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

TrackSequence read_sequence(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  expect_magic(is, kSequenceMagic, "sequence");
  TrackSequence seq;
  const std::uint32_t id_len = read_u32(is);
  seq.scene_id.resize(id_len);
  is.read(seq.scene_id.data(), id_len);
  const std::uint64_t frames = read_u64(is);
  seq.frames.reserve(frames);
  for (std::uint64_t t = 0; t < frames; ++t) {
    Frame f;
    const double cx = read_f64(is), cy = read_f64(is), cz = read_f64(is);
    const double w = read_f64(is), h = read_f64(is), l = read_f64(is);
    const double heading = read_f64(is);
    if (!is) throw std::runtime_error("truncated sequence file: " + path.string());
    f.gt_box = OrientedBox3::make({cx, cy, cz}, w, h, l, heading);
    f.cloud = read_point_cloud(is);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

void write_manifest(const std::filesystem::path& path, std::span<const CorpusEntry> entries) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  for (const CorpusEntry& e : entries) {
    os << e.scene_id << '\t' << e.path << '\t' << e.seed << '\t' << e.digest << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::vector<CorpusEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    CorpusEntry e;
    std::string seed;
    if (!std::getline(ss, e.scene_id, '\t') || !std::getline(ss, e.path, '\t') ||
        !std::getline(ss, seed, '\t') || !std::getline(ss, e.digest)) {
      throw std::runtime_error("manifest " + path.string() + " line " +
                               std::to_string(line_no) + ": malformed entry");
    }
    e.seed = std::stoull(seed);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<TrackSequence> load_corpus(const std::filesystem::path& manifest_path) {
  const std::filesystem::path dir = manifest_path.parent_path();
  std::vector<TrackSequence> sequences;
  for (const CorpusEntry& e : read_manifest(manifest_path)) {
    sequences.push_back(read_sequence(dir / e.path));
  }
  return sequences;
}

void write_trace(std::ostream& os, std::span<const FrameTrace> frames) {
  for (const FrameTrace& f : frames) {
    os << f.frame << ' ' << format_double(f.box.center.x) << ' '
       << format_double(f.box.center.y) << ' ' << format_double(f.box.center.z) << ' '
       << format_double(f.box.w) << ' ' << format_double(f.box.h) << ' '
       << format_double(f.box.l) << ' ' << format_double(f.box.heading) << ' '
       << format_double(f.score) << ' ' << format_double(f.iou) << ' '
       << (f.empty_search ? 1 : 0) << '\n';
  }
}

void write_trace_file(const std::filesystem::path& path, std::span<const FrameTrace> frames) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  write_trace(os, frames);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_loss_curve(std::ostream& os, std::span<const StepRecord> records) {
  for (const StepRecord& r : records) {
    os << r.step << ' ' << format_double(r.loss.cv) << ' ' << format_double(r.loss.cb)
       << ' ' << format_double(r.loss.rv) << ' ' << format_double(r.loss.rb) << ' '
       << format_double(r.loss.all) << '\n';
  }
}

void write_loss_curve_file(const std::filesystem::path& path,
                           std::span<const StepRecord> records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  write_loss_curve(os, records);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace ptt
