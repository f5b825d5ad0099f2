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
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ptt/checks.hpp"
#include "ptt/evaluation.hpp"
#include "ptt/io.hpp"
#include "ptt/loss.hpp"
#include "ptt/pipeline.hpp"
#include "ptt/rng.hpp"
#include "ptt/synth.hpp"
#include "ptt/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ptt;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

json default_config() {
  return json{
      {"profile", "desk"},
      {"tracker",
       {{"sampler", "fps"},
        {"ptt", "all"},
        {"neighbors", 16},
        {"heads", 1},
        {"layers", 1},
        {"scalar_relation", false},
        {"position_on_value", true},
        {"template_budget", 512},
        {"search_budget", 1024},
        {"cluster_count", 16},
        {"cluster_radius", 0.3}}},
      {"policies",
       {{"template", "first+prev"},
        {"search", "prev-result"},
        {"margin_x", 2.0},
        {"margin_y", 2.0},
        {"margin_z", 1.0}}},
      {"train",
       {{"lr", 1e-3},
        {"decay_factor", 0.2},
        {"decay_after_epochs", 12},
        {"epochs", 60},
        {"batch", 8},
        {"lambda1", 1.0},
        {"lambda2", 1.0},
        {"lambda3", 1.0},
        {"augment_xyz", 0.3},
        {"augment_yaw_deg", 5.0},
        {"proposal_positive_threshold", 0.3},
        {"vote_positive_radius", 0.0}}},
      {"synth", {{"preset", "kitti-like"}, {"sequences", 10}, {"frames", 10}}},
      {"eval", {{"bev_center_error", false}}}};
}

void merge_into(json& base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

void apply_override(json& config, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos) {
    throw CLI::ValidationError("--set expects key=value, got '" + kv + "'");
  }
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // plain string
  }
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? key.size() - start
                                                                        : dot - start);
    if (part.empty()) throw CLI::ValidationError("--set: empty key segment in '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

struct RunContext {
  json config;
  fs::path out_dir;
  std::uint64_t seed = 0;
};

// The resolved configuration lands in the output directory before any work.
RunContext make_context(const std::string& command, const std::string& config_path,
                        const std::vector<std::string>& overrides, const std::string& out,
                        std::uint64_t seed) {
  RunContext ctx;
  ctx.config = default_config();
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw std::invalid_argument("config file not found: " + config_path);
    json file_config = json::parse(is);
    merge_into(ctx.config, file_config);
  }
  for (const std::string& kv : overrides) apply_override(ctx.config, kv);
  ctx.seed = seed;
  ctx.out_dir = out;
  fs::create_directories(ctx.out_dir);
  json resolved = ctx.config;
  resolved["command"] = command;
  resolved["seed"] = seed;
  std::ofstream os(ctx.out_dir / "config.json");
  os << resolved.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write " + (ctx.out_dir / "config.json").string());
  return ctx;
}

TrackerConfig tracker_from(const json& config) {
  TrackerConfig c = config.value("profile", "desk") == std::string("small")
                        ? TrackerConfig::small_profile()
                        : TrackerConfig::desk_defaults();
  const json& t = config.at("tracker");
  c.backbone.sampler = sampler_from_string(t.value("sampler", "fps"));
  c.placement = ptt_placement_from_string(t.value("ptt", "all"));
  c.ptt.neighbors = t.value("neighbors", c.ptt.neighbors);
  c.ptt.heads = t.value("heads", c.ptt.heads);
  c.ptt.layers = t.value("layers", c.ptt.layers);
  c.ptt.scalar_relation = t.value("scalar_relation", false);
  c.ptt.position_on_value = t.value("position_on_value", true);
  c.template_budget = t.value("template_budget", c.template_budget);
  c.search_budget = t.value("search_budget", c.search_budget);
  c.cluster_count = t.value("cluster_count", c.cluster_count);
  c.cluster_radius = t.value("cluster_radius", c.cluster_radius);
  c.finalize();
  return c;
}

TemplatePolicy template_policy_from(const json& config) {
  return {template_mode_from_string(config.at("policies").value("template", "first+prev"))};
}

SearchAreaPolicy search_policy_from(const json& config) {
  const json& p = config.at("policies");
  SearchAreaPolicy policy;
  policy.mode = search_mode_from_string(p.value("search", "prev-result"));
  policy.margin_x = p.value("margin_x", 2.0);
  policy.margin_y = p.value("margin_y", 2.0);
  policy.margin_z = p.value("margin_z", 1.0);
  return policy;
}

TrainConfig train_from(const json& config, std::uint64_t seed) {
  const json& t = config.at("train");
  TrainConfig c;
  c.lr = t.value("lr", 1e-3);
  c.decay_factor = t.value("decay_factor", 0.2);
  c.decay_after_epochs = t.value("decay_after_epochs", 12);
  c.epochs = t.value("epochs", 60);
  c.batch_size = t.value("batch", 8);
  c.seed = seed;
  c.loss.lambda1 = t.value("lambda1", 1.0);
  c.loss.lambda2 = t.value("lambda2", 1.0);
  c.loss.lambda3 = t.value("lambda3", 1.0);
  c.loss.proposal_positive_threshold = t.value("proposal_positive_threshold", 0.3);
  c.loss.vote_positive_radius = t.value("vote_positive_radius", 0.0);
  return c;
}

AugmentConfig augment_from(const json& config) {
  const json& t = config.at("train");
  AugmentConfig a;
  a.xyz_range = t.value("augment_xyz", 0.3);
  a.yaw_range_deg = t.value("augment_yaw_deg", 5.0);
  return a;
}

SceneSpec scene_spec_from(const json& j) {
  SceneSpec spec;
  spec.scene_id = j.value("scene_id", spec.scene_id);
  if (j.contains("shape")) spec.shape = target_shape_from_string(j.at("shape"));
  spec.target_w = j.value("target_w", spec.target_w);
  spec.target_h = j.value("target_h", spec.target_h);
  spec.target_l = j.value("target_l", spec.target_l);
  spec.frames = j.value("frames", spec.frames);
  spec.points_min = j.value("points_min", spec.points_min);
  spec.points_max = j.value("points_max", spec.points_max);
  if (j.contains("per_frame_counts")) {
    spec.per_frame_counts = j.at("per_frame_counts").get<std::vector<std::size_t>>();
  }
  spec.clutter_points = j.value("clutter_points", spec.clutter_points);
  spec.clutter_radius = j.value("clutter_radius", spec.clutter_radius);
  spec.dropout = j.value("dropout", spec.dropout);
  spec.seed = j.value("seed", spec.seed);
  spec.traj.start.x = j.value("start_x", spec.traj.start.x);
  spec.traj.start.y = j.value("start_y", spec.traj.start.y);
  spec.traj.start.z = j.value("start_z", spec.traj.start.z);
  spec.traj.heading0 = j.value("heading0", spec.traj.heading0);
  spec.traj.speed = j.value("speed", spec.traj.speed);
  spec.traj.turn_rate = j.value("turn_rate", spec.traj.turn_rate);
  spec.traj.dt = j.value("dt", spec.traj.dt);
  return spec;
}

void print_sparsity_report(std::ostream& os, const std::vector<TrackSequence>& seqs) {
  os << "sparsity histogram (points inside the GT box per frame):\n";
  for (const SparsityBucket& b : sparsity_histogram(seqs)) {
    os << "  " << b.label << ": " << b.frames << " frames (" << 100.0 * b.fraction << "%)\n";
  }
}

int cmd_synth(const RunContext& ctx, const std::string& spec_file) {
  std::vector<SceneSpec> specs;
  const json& sj = ctx.config.at("synth");
  if (!spec_file.empty()) {
    std::ifstream is(spec_file);
    if (!is) throw std::invalid_argument("spec file not found: " + spec_file);
    const json parsed = json::parse(is);
    if (parsed.contains("scenes")) {
      std::size_t index = 0;
      for (const json& sc : parsed.at("scenes")) {
        SceneSpec spec = scene_spec_from(sc);
        if (!sc.contains("seed")) spec.seed = mix_seed(ctx.seed, index);
        ++index;
        specs.push_back(std::move(spec));
      }
    } else if (parsed.value("preset", "") == "kitti-like") {
      specs = kitti_like_specs(parsed.value("sequences", 10), parsed.value("frames", 10),
                               ctx.seed);
    } else {
      throw std::invalid_argument("spec file needs a 'scenes' array or a kitti-like preset");
    }
  } else if (sj.value("preset", "") == "kitti-like") {
    specs = kitti_like_specs(sj.value("sequences", 10), sj.value("frames", 10), ctx.seed);
  } else {
    throw std::invalid_argument("no --spec file and no preset configured");
  }

  const std::vector<CorpusEntry> entries = generate_corpus(specs, ctx.out_dir);
  std::cout << "wrote " << entries.size() << " sequences and manifest.tsv to "
            << ctx.out_dir.string() << "\n";
  print_sparsity_report(std::cout, load_corpus(ctx.out_dir / "manifest.tsv"));
  return 0;
}

int cmd_train(const RunContext& ctx, const std::string& corpus, const std::string& resume) {
  const TrackerConfig tracker = tracker_from(ctx.config);
  const TrainConfig tc = train_from(ctx.config, ctx.seed);

  const std::vector<TrackSequence> seqs = load_corpus(corpus);
  const std::vector<TrainSample> samples = build_training_samples(
      seqs, tracker, search_policy_from(ctx.config), augment_from(ctx.config),
      mix_seed(ctx.seed, 0xda7a));
  if (samples.empty()) throw std::invalid_argument("no usable training frames in " + corpus);

  ParamStore store;
  if (!resume.empty()) {
    store = load_checkpoint(resume);
  } else {
    Rng rng(mix_seed(ctx.seed, 0x1417));
    init_tracker_params(store, tracker, rng);
  }

  const TrainResult result = train_toy(store, samples, tracker, tc);
  write_loss_curve_file(ctx.out_dir / "loss_curve.txt", result.curve);
  save_checkpoint(store, ctx.out_dir / "checkpoint.ckpt");

  if (result.diverged) {
    std::cerr << "training diverged (non-finite loss) at step " << result.divergence_step
              << "\n";
    return kExitNumerical;
  }
  std::cout << "trained " << result.curve.size() << " steps on " << samples.size()
            << " frames\n";
  if (!result.curve.empty()) {
    std::cout << "L_all " << result.curve.front().loss.all << " -> "
              << result.curve.back().loss.all << "\n";
  }
  std::cout << "checkpoint: " << (ctx.out_dir / "checkpoint.ckpt").string() << "\n";
  return 0;
}

struct TrackedCorpus {
  std::vector<TrackSequence> sequences;
  std::vector<TrackResult> results;
  StageTimings timings;
};

TrackedCorpus run_tracking(const RunContext& ctx, const std::string& corpus,
                           const std::string& checkpoint, const TrackOverride& override_,
                           const FrameObserver& observer = {},
                           std::string* scene_cursor = nullptr) {
  TrackedCorpus out;
  out.sequences = load_corpus(corpus);
  const TrackerConfig tracker = tracker_from(ctx.config);

  ParamStore store;
  if (!checkpoint.empty()) {
    store = load_checkpoint(checkpoint);
  } else if (override_.kind == TrackOverride::Kind::kNone) {
    throw std::invalid_argument("--checkpoint is required unless a stub mode is active");
  }

  const TemplatePolicy tpol = template_policy_from(ctx.config);
  const SearchAreaPolicy spol = search_policy_from(ctx.config);
  for (const TrackSequence& seq : out.sequences) {
    if (scene_cursor != nullptr) *scene_cursor = seq.scene_id;
    TrackResult r = track_sequence(seq, tracker, store, tpol, spol, override_, observer);
    write_trace_file(ctx.out_dir / ("trace_" + seq.scene_id + ".txt"), r.frames);
    out.timings.prepare_ms += r.timings.prepare_ms;
    out.timings.forward_ms += r.timings.forward_ms;
    out.timings.post_ms += r.timings.post_ms;
    out.timings.total_ms += r.timings.total_ms;
    out.timings.frames += r.timings.frames;
    out.results.push_back(std::move(r));
  }
  return out;
}

OpeConfig ope_from(const json& config) {
  OpeConfig ope = OpeConfig::defaults();
  ope.bev_center_error = config.at("eval").value("bev_center_error", false);
  return ope;
}

int cmd_track(const RunContext& ctx, const std::string& corpus, const std::string& checkpoint,
              bool oracle_stub, double bias_x) {
  TrackOverride override_;
  if (oracle_stub) {
    override_.kind = TrackOverride::Kind::kOracleGt;
  } else if (bias_x != 0.0) {
    override_.kind = TrackOverride::Kind::kCanonicalConstant;
    override_.offset = {bias_x, 0.0, 0.0};
  }
  const TrackedCorpus tracked = run_tracking(ctx, corpus, checkpoint, override_);

  const OpeConfig ope = ope_from(ctx.config);
  std::vector<SequenceEval> evals;
  std::vector<double> overlaps, errors;
  for (std::size_t s = 0; s < tracked.sequences.size(); ++s) {
    std::vector<OrientedBox3> pred;
    for (const FrameTrace& f : tracked.results[s].frames) pred.push_back(f.box);
    SequenceEval e = make_sequence_eval(tracked.sequences[s], pred, ope);
    overlaps.insert(overlaps.end(), e.overlaps.begin(), e.overlaps.end());
    errors.insert(errors.end(), e.center_errors.begin(), e.center_errors.end());
    evals.push_back(std::move(e));
  }
  const OpeResult overall = ope_from_samples(overlaps, errors, ope);
  const PerIntervalReport intervals = per_interval_ope(evals, ope);

  std::ofstream report(ctx.out_dir / "ope_report.txt");
  auto emit = [&](std::ostream& os) {
    os << "sequences " << tracked.sequences.size() << "\n";
    os << "frames " << overlaps.size() << "\n";
    os << "success " << overall.success << "\n";
    os << "precision " << overall.precision << "\n";
    for (const IntervalOpe& io : intervals.intervals) {
      os << "interval " << io.label << " ";
      if (io.populated) {
        os << "frames " << io.frames << " success " << io.ope.success << " precision "
           << io.ope.precision << "\n";
      } else {
        os << "absent\n";
      }
    }
    os << "interval-mean success " << intervals.mean_success << " precision "
       << intervals.mean_precision << "\n";
  };
  emit(report);
  if (!report) throw std::runtime_error("cannot write ope_report.txt");
  emit(std::cout);

  // Threshold curves for plotting.
  std::ofstream curves(ctx.out_dir / "curves.csv");
  curves << "overlap_threshold,success_fraction,error_threshold,precision_fraction\n";
  const double denom = overlaps.empty() ? 1.0 : static_cast<double>(overlaps.size());
  for (std::size_t i = 0; i < ope.overlap_thresholds.size(); ++i) {
    std::size_t s_hits = 0, p_hits = 0;
    for (double v : overlaps) {
      if (v > ope.overlap_thresholds[i]) ++s_hits;
    }
    for (double v : errors) {
      if (v < ope.error_thresholds[i]) ++p_hits;
    }
    curves << format_double(ope.overlap_thresholds[i]) << ',' << format_double(s_hits / denom)
           << ',' << format_double(ope.error_thresholds[i]) << ','
           << format_double(p_hits / denom) << '\n';
  }
  return 0;
}

int cmd_gradcheck(const RunContext& ctx, const std::string& target, double tolerance,
                  bool corrupt) {
  Graph::corrupt_relu_backward = corrupt;
  std::vector<NamedReport> reports;
  try {
    reports = run_gradcheck(target, tolerance);
  } catch (...) {
    Graph::corrupt_relu_backward = false;
    throw;
  }
  Graph::corrupt_relu_backward = false;

  bool all_pass = true;
  std::ofstream os(ctx.out_dir / "gradcheck_report.txt");
  for (const NamedReport& nr : reports) {
    const std::string line = nr.target + (nr.report.pass ? " PASS" : " FAIL");
    std::cout << line << "\n" << nr.report.summary();
    os << line << "\n" << nr.report.summary();
    all_pass = all_pass && nr.report.pass;
  }
  return all_pass ? 0 : kExitNumerical;
}

int cmd_bench(const RunContext& ctx, const std::string& corpus, const std::string& checkpoint) {
  const TrackedCorpus tracked = run_tracking(ctx, corpus, checkpoint, {});
  const StageTimings& t = tracked.timings;
  const double frames = t.frames > 0 ? static_cast<double>(t.frames) : 1.0;
  std::ofstream os(ctx.out_dir / "bench_report.txt");
  auto emit = [&](std::ostream& o) {
    o << "frames " << t.frames << "\n";
    o << "prepare_ms_mean " << t.prepare_ms / frames << "\n";
    o << "forward_ms_mean " << t.forward_ms / frames << "\n";
    o << "post_ms_mean " << t.post_ms / frames << "\n";
    o << "frame_ms_mean " << t.total_ms / frames << "\n";
    o << "fps " << t.fps() << "\n";
  };
  emit(os);
  emit(std::cout);
  return 0;
}

int cmd_convert_labels(const RunContext& ctx, const std::string& label_dir) {
  if (!fs::is_directory(label_dir)) {
    throw std::invalid_argument("label directory not found: " + label_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(label_dir)) {
    if (entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::size_t tracklets_written = 0;
  std::size_t frames_total = 0;
  for (const fs::path& file : files) {
    std::ifstream is(file);
    if (!is) throw std::invalid_argument("cannot open " + file.string());
    const std::string scene = file.stem().string();
    std::vector<KittiTracklet> tracklets;
    try {
      tracklets = convert_kitti_labels(is, scene);
    } catch (const KittiParseError& e) {
      throw std::invalid_argument(file.string() + ": " + e.what());
    }
    for (const KittiTracklet& tr : tracklets) {
      const fs::path out =
          ctx.out_dir / (scene + "_" + std::to_string(tr.track_id) + ".tracklet");
      std::ofstream os(out);
      os << "# scene " << tr.scene << " track " << tr.track_id << " type " << tr.type << "\n";
      for (const KittiLabelRow& row : tr.rows) os << serialize_kitti_row(row) << "\n";
      if (!os) throw std::runtime_error("cannot write " + out.string());
      ++tracklets_written;
      frames_total += tr.rows.size();
    }
  }
  std::cout << "converted " << files.size() << " label files into " << tracklets_written
            << " tracklets (" << frames_total << " frames)\n";
  return 0;
}

int cmd_dump_attention(const RunContext& ctx, const std::string& corpus,
                       const std::string& checkpoint, const std::string& stage) {
  if (stage != "vote" && stage != "prop") {
    throw std::invalid_argument("--stage must be vote or prop");
  }
  std::ofstream os(ctx.out_dir / "attention.jsonl");
  std::string current_scene;
  const FrameObserver observer = [&](const FrameObservation& obs) {
    const Value attn_value =
        stage == "vote" ? obs.outputs->vote_attention : obs.outputs->prop_attention;
    if (!attn_value.valid()) {
      throw std::invalid_argument("ptt stage '" + stage + "' is disabled in this config");
    }
    const Tensor& w = obs.graph->value(attn_value);  // [N, k, M]
    const std::size_t n = w.shape[0];
    const std::size_t k = w.shape[1];
    const std::size_t m = w.shape[2];
    const std::vector<Point3>& coords =
        stage == "vote" ? obs.outputs->seed_coords : obs.outputs->cluster_centers;

    // Channel-mean weight per neighbor; "received" totals the incoming mean
    // weight per seed.
    const IndexMatrix idx = knn(coords, coords, k);
    std::vector<double> received(n, 0.0);
    std::vector<std::vector<double>> mean_w(n, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < m; ++t) acc += w.at3(i, j, t);
        mean_w[i][j] = acc / static_cast<double>(m);
        received[static_cast<std::size_t>(idx.at(i, j))] += mean_w[i][j];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Point3 world = obs.search->world_from_canonical.apply(coords[i]);
      json rec{{"scene", current_scene}, {"frame", obs.frame}, {"seed", i},
               {"x", world.x},           {"y", world.y},       {"z", world.z},
               {"received", received[i]}};
      json neighbors = json::array();
      json weights = json::array();
      for (std::size_t j = 0; j < k; ++j) {
        neighbors.push_back(idx.at(i, j));
        weights.push_back(mean_w[i][j]);
      }
      rec["neighbors"] = neighbors;
      rec["weights"] = weights;
      os << rec.dump() << "\n";
    }
  };

  if (checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
  run_tracking(ctx, corpus, checkpoint, {}, observer, &current_scene);
  if (!os) throw std::runtime_error("cannot write attention.jsonl");
  std::cout << "attention dump: " << (ctx.out_dir / "attention.jsonl").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer-refined 3D single-object tracker: synthetic data, "
               "training, tracking, evaluation."};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "ptt_out";
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", overrides, "dotted-key config overrides, key=value");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "RNG seed");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string spec_file;
  synth->add_option("--spec", spec_file, "scene spec JSON file");

  auto* train = app.add_subcommand("train", "train on a corpus");
  std::string train_corpus, resume;
  train->add_option("--corpus", train_corpus, "corpus manifest")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");

  auto* track = app.add_subcommand("track", "track a corpus and report OPE metrics");
  std::string track_corpus, track_ckpt;
  bool oracle_stub = false;
  double bias_x = 0.0;
  track->add_option("--corpus", track_corpus, "corpus manifest")->required();
  track->add_option("--checkpoint", track_ckpt, "trained checkpoint");
  track->add_flag("--oracle-stub", oracle_stub, "replace the regressor with the GT oracle");
  track->add_option("--bias", bias_x, "constant canonical x-bias stub (meters)");

  std::string flag_sampler, flag_template, flag_search, flag_ptt;
  int flag_heads = 0, flag_layers = 0;
  for (CLI::App* cmd : {track, train}) {
    cmd->add_option("--sampler", flag_sampler, "rs | fps | feat-fps");
    cmd->add_option("--template", flag_template, "first-gt | prev | first+prev | all-prev");
    cmd->add_option("--search", flag_search, "prev-result | prev-gt | cur-gt");
    cmd->add_option("--ptt", flag_ptt, "none | vote | prop | all");
    cmd->add_option("--heads", flag_heads, "attention heads");
    cmd->add_option("--layers", flag_layers, "attention layers");
  }

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_target = "all";
  double gc_tolerance = 1e-4;
  bool gc_corrupt = false;
  gradcheck->add_option("--target", gc_target,
                        "embed | posenc | attention | vote | proposal | loss | backbone | "
                        "augment | all");
  gradcheck->add_option("--tolerance", gc_tolerance, "max relative error");
  gradcheck->add_flag("--corrupt", gc_corrupt, "negative control: corrupt a backward rule");

  auto* bench = app.add_subcommand("bench", "timing breakdown over a corpus");
  std::string bench_corpus, bench_ckpt;
  bench->add_option("--corpus", bench_corpus, "corpus manifest")->required();
  bench->add_option("--checkpoint", bench_ckpt, "trained checkpoint")->required();

  auto* convert = app.add_subcommand("convert-labels", "KITTI MOT labels -> SOT tracklets");
  std::string label_dir;
  convert->add_option("--labels", label_dir, "directory of KITTI tracking label files")
      ->required();

  auto* dump = app.add_subcommand("dump-attention", "per-frame attention records");
  std::string dump_corpus, dump_ckpt, dump_stage = "vote";
  dump->add_option("--corpus", dump_corpus, "corpus manifest")->required();
  dump->add_option("--checkpoint", dump_ckpt, "trained checkpoint")->required();
  dump->add_option("--stage", dump_stage, "vote | prop");

  // Global options may follow the subcommand name.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    // Ablation flags fold into the config before it is resolved to disk.
    if (!flag_sampler.empty()) overrides.push_back("tracker.sampler=\"" + flag_sampler + "\"");
    if (!flag_template.empty()) {
      overrides.push_back("policies.template=\"" + flag_template + "\"");
    }
    if (!flag_search.empty()) overrides.push_back("policies.search=\"" + flag_search + "\"");
    if (!flag_ptt.empty()) overrides.push_back("tracker.ptt=\"" + flag_ptt + "\"");
    if (flag_heads > 0) overrides.push_back("tracker.heads=" + std::to_string(flag_heads));
    if (flag_layers > 0) overrides.push_back("tracker.layers=" + std::to_string(flag_layers));
    const RunContext ctx = make_context(command, config_path, overrides, out, seed);

    if (synth->parsed()) return cmd_synth(ctx, spec_file);
    if (train->parsed()) return cmd_train(ctx, train_corpus, resume);
    if (track->parsed()) return cmd_track(ctx, track_corpus, track_ckpt, oracle_stub, bias_x);
    if (gradcheck->parsed()) return cmd_gradcheck(ctx, gc_target, gc_tolerance, gc_corrupt);
    if (bench->parsed()) return cmd_bench(ctx, bench_corpus, bench_ckpt);
    if (convert->parsed()) return cmd_convert_labels(ctx, label_dir);
    if (dump->parsed()) return cmd_dump_attention(ctx, dump_corpus, dump_ckpt, dump_stage);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
