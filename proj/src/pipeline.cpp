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
#include "ptt/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ptt/rng.hpp"
#include "ptt/sampling.hpp"

namespace ptt {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void add_linear(ParamStore& store, const std::string& name, std::size_t in,
                std::size_t out, Rng& rng) {
  store.add(name + ".w", init_linear_weight(in, out, rng));
  Tensor b = Tensor::zeros({out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : b.data) v = rng.uniform(-bound, bound);
  store.add(name + ".b", std::move(b));
}

Value apply_mlp2(Graph& g, Value x, ParamStore& store, const std::string& name) {
  return mlp2_relu(g, x, g.param(store, name + ".l1.w"), g.param(store, name + ".l1.b"),
                   g.param(store, name + ".l2.w"), g.param(store, name + ".l2.b"));
}

Tensor coords_tensor(std::span<const Point3> pts) {
  Tensor t = Tensor::zeros({pts.size(), 3});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.at2(i, 0) = pts[i].x;
    t.at2(i, 1) = pts[i].y;
    t.at2(i, 2) = pts[i].z;
  }
  return t;
}

std::vector<Point3> tensor_points(const Tensor& t) {
  std::vector<Point3> pts(t.shape[0]);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = {t.at2(i, 0), t.at2(i, 1), t.at2(i, 2)};
  }
  return pts;
}

// Votes within `radius` of each cluster center, scan order, padded by
// repeating the first member (the center's own vote is always in range).
IndexMatrix radius_group(std::span<const Point3> centers, std::span<const Point3> votes,
                         double radius, std::size_t cap) {
  const double r2 = radius * radius;
  IndexMatrix idx(centers.size(), cap);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    std::size_t found = 0;
    for (std::size_t i = 0; i < votes.size() && found < cap; ++i) {
      if (squared_distance(centers[c], votes[i]) <= r2) {
        idx.at(c, found++) = static_cast<std::int32_t>(i);
      }
    }
    if (found == 0) {
      std::size_t best = 0;
      double best_d = squared_distance(centers[c], votes[0]);
      for (std::size_t i = 1; i < votes.size(); ++i) {
        const double d = squared_distance(centers[c], votes[i]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      idx.at(c, found++) = static_cast<std::int32_t>(best);
    }
    for (std::size_t j = found; j < cap; ++j) idx.at(c, j) = idx.at(c, 0);
  }
  return idx;
}

struct VoteStage {
  Value logits;    // [N]
  Value offsets;   // [N, 3]
  Value centers;   // [N, 3]
  Value feats;     // [N, D]
  Value attention; // invalid unless PTT ran
};

VoteStage vote_stage_graph(Graph& g, std::span<const Point3> coords, Value feats,
                           bool use_ptt, const TrackerConfig& config, ParamStore& store) {
  const std::size_t d = config.backbone.descriptor_dim();
  Value refined = feats;
  Value attention{};
  if (use_ptt) {
    SeedSet seeds{std::vector<Point3>(coords.begin(), coords.end()), g.value(feats)};
    PttForward f = ptt_forward_graph(g, seeds, config.ptt, store, "ptt_vote", feats);
    refined = f.output;
    attention = f.weights.back();
  }
  Value head = apply_mlp2(g, refined, store, "vote.head");  // [N, 3 + D + 1]
  Value offsets = g.slice_last(head, 0, 3);
  Value residual = g.slice_last(head, 3, d);
  Value logits = g.reshape(g.slice_last(head, 3 + d, 1), {coords.size()});
  Value centers = g.add(g.constant(coords_tensor(coords)), offsets);
  return {logits, offsets, centers, g.add(refined, residual), attention};
}

struct ProposalStage {
  std::vector<std::int32_t> cluster_vote_ids;
  std::vector<Point3> cluster_centers;
  Value cluster_centers_value;  // [C, 3]
  Value offsets;                // [C, 4]
  Value centers;                // [C, 3]
  Value headings;               // [C]
  Value logits;                 // [C]
  Value attention;
};

PttConfig proposal_ptt_config(const TrackerConfig& config) {
  PttConfig c = config.ptt;
  c.input_dim = config.cluster_feat_dim;
  c.embed_dim = 0;  // resolve to the cluster feature width
  return c;
}

ProposalStage proposal_stage_graph(Graph& g, Value vote_centers, Value vote_feats,
                                   bool use_ptt, const TrackerConfig& config,
                                   ParamStore& store) {
  const Tensor& centers_num = g.value(vote_centers);
  const std::vector<Point3> vote_pts = tensor_points(centers_num);
  const std::size_t n_votes = vote_pts.size();

  SampleSpec spec;
  spec.method = SamplerKind::kFps;
  spec.count = std::min<std::size_t>(config.cluster_count, n_votes);
  const SampleResult sel = sample_fps(vote_pts, spec);
  const std::size_t c = sel.indices.size();

  ProposalStage out;
  out.cluster_vote_ids = sel.indices;
  IndexMatrix center_idx(c, 1);
  for (std::size_t i = 0; i < c; ++i) center_idx.at(i, 0) = sel.indices[i];
  out.cluster_centers_value = g.reshape(g.gather_rows(vote_centers, center_idx), {c, 3});
  out.cluster_centers = tensor_points(g.value(out.cluster_centers_value));

  const IndexMatrix group =
      radius_group(out.cluster_centers, vote_pts, config.cluster_radius, config.cluster_cap);
  Value member_centers = g.gather_rows(vote_centers, group);          // [C, cap, 3]
  Value rel = g.sub(member_centers, g.expand_mid(out.cluster_centers_value, config.cluster_cap));
  Value member_feats = g.gather_rows(vote_feats, group);              // [C, cap, D]
  Value rows = g.concat_last({rel, member_feats});
  Value h1 = g.relu(g.linear(rows, g.param(store, "proposal.sa.l1.w"),
                             g.param(store, "proposal.sa.l1.b")));
  Value h2 = g.relu(g.linear(h1, g.param(store, "proposal.sa.l2.w"),
                             g.param(store, "proposal.sa.l2.b")));
  Value pooled = g.max_axis(h2, 1);  // [C, Dc]

  Value refined = pooled;
  if (use_ptt) {
    SeedSet seeds{out.cluster_centers, g.value(pooled)};
    PttForward f =
        ptt_forward_graph(g, seeds, proposal_ptt_config(config), store, "ptt_prop", pooled);
    refined = f.output;
    out.attention = f.weights.back();
  }
  Value head = apply_mlp2(g, refined, store, "proposal.head");  // [C, 5]
  out.offsets = g.slice_last(head, 0, 4);
  out.centers = g.add(out.cluster_centers_value, g.slice_last(head, 0, 3));
  out.headings = g.reshape(g.slice_last(head, 3, 1), {c});
  out.logits = g.reshape(g.slice_last(head, 4, 1), {c});
  return out;
}

PointCloud fps_resample(const PointCloud& cloud, std::size_t budget) {
  if (cloud.size() <= budget) return cloud;  // budget caps, never pads
  SampleSpec spec;
  spec.method = SamplerKind::kFps;
  spec.count = budget;
  const SampleResult sel = sample_fps(cloud, spec);
  PointCloud out;
  out.feature_width = cloud.feature_width;
  out.points.reserve(budget);
  for (std::int32_t i : sel.indices) {
    out.points.push_back(cloud.points[static_cast<std::size_t>(i)]);
    if (cloud.has_features()) {
      const auto row = cloud.feature_row(static_cast<std::size_t>(i));
      out.features.insert(out.features.end(), row.begin(), row.end());
    }
  }
  return out;
}

}  // namespace

TemplateMode template_mode_from_string(const std::string& s) {
  if (s == "first-gt") return TemplateMode::kFirstGt;
  if (s == "prev") return TemplateMode::kPreviousResult;
  if (s == "first+prev") return TemplateMode::kFirstAndPrevious;
  if (s == "all-prev") return TemplateMode::kAllPrevious;
  throw std::invalid_argument("unknown template mode '" + s + "'");
}

SearchMode search_mode_from_string(const std::string& s) {
  if (s == "prev-result") return SearchMode::kPreviousResult;
  if (s == "prev-gt") return SearchMode::kPreviousGt;
  if (s == "cur-gt") return SearchMode::kCurrentGt;
  throw std::invalid_argument("unknown search mode '" + s + "'");
}

const char* template_mode_name(TemplateMode m) {
  switch (m) {
    case TemplateMode::kFirstGt: return "first-gt";
    case TemplateMode::kPreviousResult: return "prev";
    case TemplateMode::kFirstAndPrevious: return "first+prev";
    case TemplateMode::kAllPrevious: return "all-prev";
  }
  return "?";
}

const char* search_mode_name(SearchMode m) {
  switch (m) {
    case SearchMode::kPreviousResult: return "prev-result";
    case SearchMode::kPreviousGt: return "prev-gt";
    case SearchMode::kCurrentGt: return "cur-gt";
  }
  return "?";
}

PttPlacement ptt_placement_from_string(const std::string& s) {
  if (s == "none") return PttPlacement::kNone;
  if (s == "vote") return PttPlacement::kVoteOnly;
  if (s == "prop") return PttPlacement::kProposalOnly;
  if (s == "all") return PttPlacement::kAll;
  throw std::invalid_argument("unknown ptt placement '" + s + "'");
}

const char* ptt_placement_name(PttPlacement p) {
  switch (p) {
    case PttPlacement::kNone: return "none";
    case PttPlacement::kVoteOnly: return "vote";
    case PttPlacement::kProposalOnly: return "prop";
    case PttPlacement::kAll: return "all";
  }
  return "?";
}

void TrackerConfig::finalize() {
  backbone.validate();
  ptt.input_dim = backbone.descriptor_dim();
  ptt.validate();
  if (template_budget == 0 || search_budget == 0 || cluster_count == 0 ||
      cluster_cap == 0 || cluster_radius <= 0.0 || cluster_feat_dim == 0) {
    throw std::invalid_argument("TrackerConfig: invalid clustering/budget settings");
  }
}

TrackerConfig TrackerConfig::desk_defaults() {
  TrackerConfig c;
  c.finalize();
  return c;
}

TrackerConfig TrackerConfig::small_profile() {
  TrackerConfig c;
  c.backbone.levels = {{128, 0.4, 8, 16, 32}, {32, 0.7, 8, 32, 32}};
  c.ptt.neighbors = 8;
  c.template_budget = 128;
  c.search_budget = 256;
  c.augment_hidden = 32;
  c.vote_hidden = 32;
  c.cluster_count = 8;
  c.cluster_cap = 8;
  c.cluster_radius = 0.5;
  c.cluster_hidden = 32;
  c.cluster_feat_dim = 32;
  c.proposal_hidden = 32;
  c.finalize();
  return c;
}

void init_tracker_params(ParamStore& store, const TrackerConfig& config, Rng& rng) {
  TrackerConfig cfg = config;
  cfg.finalize();
  const std::size_t n = cfg.backbone.seed_count();
  const std::size_t d = cfg.backbone.descriptor_dim();
  init_backbone_params(store, "backbone", cfg.backbone, rng);
  add_linear(store, "augment.l1", n + 2 * d, cfg.augment_hidden, rng);
  add_linear(store, "augment.l2", cfg.augment_hidden, d, rng);
  // Both stage transformers are registered regardless of placement so one
  // checkpoint can serve every ablation flag.
  init_ptt_params(store, "ptt_vote", cfg.ptt, rng);
  init_ptt_params(store, "ptt_prop", proposal_ptt_config(cfg), rng);
  add_linear(store, "vote.head.l1", d, cfg.vote_hidden, rng);
  add_linear(store, "vote.head.l2", cfg.vote_hidden, 3 + d + 1, rng);
  add_linear(store, "proposal.sa.l1", 3 + d, cfg.cluster_hidden, rng);
  add_linear(store, "proposal.sa.l2", cfg.cluster_hidden, cfg.cluster_feat_dim, rng);
  add_linear(store, "proposal.head.l1", cfg.cluster_feat_dim, cfg.proposal_hidden, rng);
  add_linear(store, "proposal.head.l2", cfg.proposal_hidden, 5, rng);
}

Value augment_similarity_graph(Graph& g, Value search_feats, Value template_feats,
                               ParamStore& store, Value* similarity_out) {
  const Tensor& ts = g.value(search_feats);
  const Tensor& tt = g.value(template_feats);
  if (ts.rank() != 2 || tt.rank() != 2 || ts.shape[1] != tt.shape[1]) {
    throw std::invalid_argument("augment_similarity: width mismatch " +
                                shape_str(ts.shape) + " vs " + shape_str(tt.shape));
  }
  const std::size_t ns = ts.shape[0];
  const std::size_t d = ts.shape[1];
  constexpr double kNormEps = 1e-12;

  auto normalize_rows = [&](Value x) {
    Value sq = g.sum_axis(g.mul(x, x), 1);                   // [N]
    Value norm = g.sqrt(g.add_scalar(sq, kNormEps));         // [N]
    return g.div(x, g.expand_last(norm, d));
  };
  Value sim = g.matmul_nt(normalize_rows(search_feats), normalize_rows(template_feats));
  if (similarity_out != nullptr) *similarity_out = sim;

  // Best-matching template descriptor per search seed (selection is
  // non-differentiable; the gathered values are).
  const Tensor& sim_v = g.value(sim);
  IndexMatrix best(ns, 1);
  for (std::size_t i = 0; i < ns; ++i) {
    double top = sim_v.at2(i, 0);
    double second = -2.0;
    std::size_t arg = 0;
    for (std::size_t j = 1; j < sim_v.shape[1]; ++j) {
      const double v = sim_v.at2(i, j);
      if (v > top) {
        second = top;
        top = v;
        arg = j;
      } else if (v > second) {
        second = v;
      }
    }
    if (sim_v.shape[1] > 1) g.note_kink_distance(top - second);
    best.at(i, 0) = static_cast<std::int32_t>(arg);
  }
  Value best_desc = g.reshape(g.gather_rows(template_feats, best), {ns, d});
  Value rows = g.concat_last({sim, best_desc, search_feats});
  return apply_mlp2(g, rows, store, "augment");
}

SeedSet augment_similarity(const SeedSet& template_seeds, const SeedSet& search_seeds,
                           ParamStore& store) {
  template_seeds.validate();
  search_seeds.validate();
  Graph g;
  Value fused = augment_similarity_graph(g, g.constant(search_seeds.feats),
                                         g.constant(template_seeds.feats), store);
  return {search_seeds.coords, g.value(fused)};
}

StageOutputs tracker_forward_graph(Graph& g, const PointCloud& template_cloud,
                                   const PointCloud& search_cloud,
                                   const TrackerConfig& config, ParamStore& store) {
  BackboneOut tmpl = backbone_forward_graph(g, template_cloud, config.backbone, store, "backbone");
  BackboneOut srch = backbone_forward_graph(g, search_cloud, config.backbone, store, "backbone");
  Value fused = augment_similarity_graph(g, srch.feats, tmpl.feats, store);

  StageOutputs out;
  out.seed_coords = srch.coords;
  VoteStage vs = vote_stage_graph(g, srch.coords, fused, config.ptt_in_vote(), config, store);
  out.seed_logits = vs.logits;
  out.vote_offsets = vs.offsets;
  out.vote_centers = vs.centers;
  out.vote_feats = vs.feats;
  out.vote_attention = vs.attention;

  ProposalStage ps = proposal_stage_graph(g, vs.centers, vs.feats,
                                          config.ptt_in_proposal(), config, store);
  out.cluster_vote_ids = ps.cluster_vote_ids;
  out.cluster_centers = ps.cluster_centers;
  out.cluster_centers_value = ps.cluster_centers_value;
  out.proposal_offsets = ps.offsets;
  out.proposal_centers = ps.centers;
  out.proposal_headings = ps.headings;
  out.proposal_logits = ps.logits;
  out.prop_attention = ps.attention;
  return out;
}

std::vector<Vote> vote(const SeedSet& seeds, bool use_ptt, const TrackerConfig& config,
                       ParamStore& store) {
  seeds.validate();
  TrackerConfig cfg = config;
  cfg.finalize();
  Graph g;
  VoteStage vs = vote_stage_graph(g, seeds.coords, g.constant(seeds.feats), use_ptt,
                                  cfg, store);
  const Tensor& centers = g.value(vs.centers);
  const Tensor& feats = g.value(vs.feats);
  const Tensor& logits = g.value(vs.logits);
  std::vector<Vote> votes(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    votes[i].center = {centers.at2(i, 0), centers.at2(i, 1), centers.at2(i, 2)};
    votes[i].feat.assign(feats.data.begin() + static_cast<std::ptrdiff_t>(i * feats.shape[1]),
                         feats.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * feats.shape[1]));
    votes[i].objectness = logits[i];
  }
  return votes;
}

std::vector<Proposal> generate_proposals(const std::vector<Vote>& votes, bool use_ptt,
                                         const TrackerConfig& config, ParamStore& store,
                                         const OrientedBox3& size_template) {
  if (votes.empty()) throw std::invalid_argument("generate_proposals: no votes");
  const std::size_t n = votes.size();
  const std::size_t d = votes[0].feat.size();
  Tensor centers = Tensor::zeros({n, 3});
  Tensor feats = Tensor::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    centers.at2(i, 0) = votes[i].center.x;
    centers.at2(i, 1) = votes[i].center.y;
    centers.at2(i, 2) = votes[i].center.z;
    for (std::size_t t = 0; t < d; ++t) feats.at2(i, t) = votes[i].feat[t];
  }
  TrackerConfig cfg = config;
  cfg.finalize();
  Graph g;
  ProposalStage ps = proposal_stage_graph(g, g.constant(std::move(centers)),
                                          g.constant(std::move(feats)), use_ptt, cfg, store);
  const Tensor& pc = g.value(ps.centers);
  const Tensor& ph = g.value(ps.headings);
  const Tensor& pl = g.value(ps.logits);
  std::vector<Proposal> proposals(pc.shape[0]);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    proposals[i].box = OrientedBox3::make({pc.at2(i, 0), pc.at2(i, 1), pc.at2(i, 2)},
                                          size_template.w, size_template.h,
                                          size_template.l, ph[i]);
    proposals[i].score = pl[i];
    proposals[i].cluster_id = static_cast<int>(i);
  }
  return proposals;
}

const Proposal& select_box(const std::vector<Proposal>& proposals) {
  if (proposals.empty()) throw std::invalid_argument("select_box: empty proposal list");
  const Proposal* best = &proposals[0];
  for (const Proposal& p : proposals) {
    if (p.score > best->score ||
        (p.score == best->score && p.cluster_id < best->cluster_id)) {
      best = &p;
    }
  }
  return *best;
}

PointCloud build_template(const TrackHistory& history, TemplatePolicy policy,
                          std::size_t budget) {
  if (history.seq == nullptr || history.current_frame < 1 ||
      history.results.size() < history.current_frame) {
    throw std::invalid_argument("build_template: inconsistent history");
  }
  const TrackSequence& seq = *history.seq;
  const std::size_t t = history.current_frame;

  std::vector<std::size_t> sources;
  switch (policy.mode) {
    case TemplateMode::kFirstGt:
      sources = {0};
      break;
    case TemplateMode::kPreviousResult:
      sources = {t - 1};
      break;
    case TemplateMode::kFirstAndPrevious:
      sources = {0};
      if (t - 1 != 0) sources.push_back(t - 1);
      break;
    case TemplateMode::kAllPrevious:
      for (std::size_t j = 0; j < t; ++j) sources.push_back(j);
      break;
  }

  PointCloud merged;
  for (std::size_t j : sources) {
    const OrientedBox3& box = history.results[j];
    PointCloud crop = crop_to_box(seq.frames[j].cloud, box);
    if (crop.empty()) continue;
    merged.append(to_canonical_frame(crop, box));
  }
  if (merged.empty()) return merged;
  return fps_resample(merged, budget);
}

SearchArea build_search_area(const PointCloud& frame_cloud, const OrientedBox3& ref_box,
                             const SearchAreaPolicy& policy, std::size_t budget) {
  if (policy.margin_x <= 0.0 || policy.margin_y <= 0.0 || policy.margin_z <= 0.0) {
    throw std::invalid_argument("build_search_area: margins must be positive");
  }
  SearchArea out;
  out.ref_box = ref_box;
  out.world_from_canonical = RigidTransform2DYaw::world_to_box(ref_box).inverse();
  const OrientedBox3 enlarged = OrientedBox3::make(
      ref_box.center, ref_box.w + 2.0 * policy.margin_y, ref_box.h + 2.0 * policy.margin_z,
      ref_box.l + 2.0 * policy.margin_x, ref_box.heading);
  PointCloud crop = crop_to_box(frame_cloud, enlarged);
  if (crop.empty()) {
    out.empty = true;
    return out;
  }
  out.cloud = fps_resample(to_canonical_frame(crop, ref_box), budget);
  return out;
}

TrackResult track_sequence(const TrackSequence& seq, const TrackerConfig& config,
                           ParamStore& store, TemplatePolicy template_policy,
                           SearchAreaPolicy search_policy, const TrackOverride& override_,
                           const FrameObserver& observer) {
  seq.validate();
  TrackerConfig cfg = config;
  cfg.finalize();

  TrackResult result;
  const OrientedBox3& first_gt = seq.frames[0].gt_box;
  TrackHistory history;
  history.seq = &seq;
  history.results.push_back(first_gt);
  result.frames.push_back({0, first_gt, 0.0, 1.0, false});

  PointCloud last_template;  // fallback when a later crop comes up empty

  const auto run_t0 = Clock::now();
  for (std::size_t t = 1; t < seq.size(); ++t) {
    auto t0 = Clock::now();
    history.current_frame = t;
    PointCloud tmpl = build_template(history, template_policy, cfg.template_budget);
    if (tmpl.empty()) {
      tmpl = last_template;
    } else {
      last_template = tmpl;
    }

    OrientedBox3 ref;
    switch (search_policy.mode) {
      case SearchMode::kPreviousResult: ref = history.results[t - 1]; break;
      case SearchMode::kPreviousGt: ref = seq.frames[t - 1].gt_box; break;
      case SearchMode::kCurrentGt: ref = seq.frames[t].gt_box; break;
    }
    SearchArea search =
        build_search_area(seq.frames[t].cloud, ref, search_policy, cfg.search_budget);
    result.timings.prepare_ms += ms_since(t0);

    FrameTrace trace;
    trace.frame = static_cast<int>(t);
    if (search.empty || tmpl.empty()) {
      trace.empty_search = true;
      trace.box = history.results[t - 1];  // coast
      trace.score = 0.0;
    } else {
      t0 = Clock::now();
      OrientedBox3 canonical_box;
      double score = 0.0;
      switch (override_.kind) {
        case TrackOverride::Kind::kOracleGt: {
          canonical_box = RigidTransform2DYaw::world_to_box(ref).apply(seq.frames[t].gt_box);
          break;
        }
        case TrackOverride::Kind::kCanonicalConstant: {
          canonical_box = OrientedBox3::make(override_.offset, first_gt.w, first_gt.h,
                                             first_gt.l, override_.dyaw);
          break;
        }
        case TrackOverride::Kind::kNone: {
          Graph g;
          StageOutputs outs = tracker_forward_graph(g, tmpl, search.cloud, cfg, store);
          if (observer) {
            observer({static_cast<int>(t), &g, &outs, &search});
          }
          const Tensor& pc = g.value(outs.proposal_centers);
          const Tensor& ph = g.value(outs.proposal_headings);
          const Tensor& pl = g.value(outs.proposal_logits);
          std::vector<Proposal> proposals(pc.shape[0]);
          for (std::size_t i = 0; i < proposals.size(); ++i) {
            proposals[i].box = OrientedBox3::make({pc.at2(i, 0), pc.at2(i, 1), pc.at2(i, 2)},
                                                  first_gt.w, first_gt.h, first_gt.l, ph[i]);
            proposals[i].score = pl[i];
            proposals[i].cluster_id = static_cast<int>(i);
          }
          const Proposal& best = select_box(proposals);
          canonical_box = best.box;
          score = best.score;
          break;
        }
      }
      result.timings.forward_ms += ms_since(t0);

      t0 = Clock::now();
      trace.box = search.world_from_canonical.apply(canonical_box);
      trace.score = score;
      result.timings.post_ms += ms_since(t0);
    }
    trace.iou = iou_3d(trace.box, seq.frames[t].gt_box);
    history.results.push_back(trace.box);
    result.frames.push_back(trace);
    ++result.timings.frames;
  }
  result.timings.total_ms = ms_since(run_t0);
  return result;
}

}  // namespace ptt
