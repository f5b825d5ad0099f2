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
#include "ptt/checks.hpp"

#include <stdexcept>

#include "ptt/loss.hpp"
#include "ptt/pipeline.hpp"
#include "ptt/rng.hpp"
#include "ptt/synth.hpp"
#include "ptt/train.hpp"

namespace ptt {
namespace {

SeedSet fixed_seeds(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  SeedSet s;
  s.coords.resize(n);
  for (Point3& p : s.coords) {
    p = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
  }
  s.feats = Tensor::zeros({n, d});
  for (double& v : s.feats.data) v = rng.uniform(-1.0, 1.0);
  return s;
}

TrackerConfig check_tracker() {
  TrackerConfig c;
  c.backbone.levels = {{16, 0.8, 4, 8, 12}, {8, 1.2, 4, 12, 12}};
  c.ptt.neighbors = 4;
  c.template_budget = 32;
  c.search_budget = 48;
  c.augment_hidden = 12;
  c.vote_hidden = 12;
  c.cluster_count = 4;
  c.cluster_radius = 0.8;
  c.cluster_cap = 4;
  c.cluster_hidden = 12;
  c.cluster_feat_dim = 12;
  c.proposal_hidden = 12;
  c.finalize();
  return c;
}

void freeze_except(ParamStore& store, std::initializer_list<const char*> prefixes) {
  for (ParamStore::Entry& e : store.entries()) {
    bool keep = false;
    for (const char* p : prefixes) {
      if (e.name.rfind(p, 0) == 0) keep = true;
    }
    e.trainable = keep;
  }
}

struct CheckSetup {
  ParamStore store;
  LossFragment fragment;
};

CheckSetup make_embed() {
  PttConfig config;
  config.input_dim = 4;
  config.embed_dim = 6;
  config.neighbors = 4;
  CheckSetup s;
  Rng rng(101);
  init_ptt_params(s.store, "ptt", config, rng);
  freeze_except(s.store, {"ptt.layer0.embed"});
  const Tensor feats = fixed_seeds(8, 4, 102).feats;
  s.fragment = [feats](Graph& g, ParamStore& store) {
    Value y = feature_embed_graph(g, g.constant(feats), store, "ptt.layer0");
    return g.sum_all(g.mul(y, y));
  };
  return s;
}

CheckSetup make_posenc() {
  PttConfig config;
  config.input_dim = 4;
  config.embed_dim = 6;
  config.neighbors = 4;
  CheckSetup s;
  Rng rng(103);
  init_ptt_params(s.store, "ptt", config, rng);
  freeze_except(s.store, {"ptt.layer0.pos"});
  const SeedSet seeds = fixed_seeds(10, 4, 104);
  const IndexMatrix idx = knn(seeds.coords, seeds.coords, 4);
  const std::vector<Point3> coords = seeds.coords;
  s.fragment = [coords, idx](Graph& g, ParamStore& store) {
    Value p = position_encode_graph(g, coords, idx, store, "ptt.layer0");
    return g.sum_all(g.mul(p, p));
  };
  return s;
}

CheckSetup make_attention() {
  PttConfig config;
  config.input_dim = 4;
  config.embed_dim = 4;
  config.neighbors = 4;
  CheckSetup s;
  Rng rng(105);
  init_ptt_params(s.store, "ptt", config, rng);
  const SeedSet seeds = fixed_seeds(8, 4, 106);
  s.fragment = [seeds, config](Graph& g, ParamStore& store) {
    PttForward f = ptt_forward_graph(g, seeds, config, store, "ptt");
    return g.sum_all(g.mul(f.output, f.output));
  };
  return s;
}

// Vote stage on constant augmented seeds, with its two loss terms.
CheckSetup make_vote() {
  const TrackerConfig cfg = check_tracker();
  CheckSetup s;
  Rng rng(107);
  init_tracker_params(s.store, cfg, rng);
  freeze_except(s.store, {"vote.head", "ptt_vote"});
  const std::size_t d = cfg.backbone.descriptor_dim();
  const SeedSet seeds = fixed_seeds(12, d, 108);
  const OrientedBox3 gt = OrientedBox3::make({0.2, -0.1, 0.0}, 1.4, 1.4, 2.2, 0.15);
  s.fragment = [seeds, cfg, gt, d](Graph& g, ParamStore& store) {
    PttForward f = ptt_forward_graph(g, seeds, cfg.ptt, store, "ptt_vote",
                                     g.constant(seeds.feats));
    Value head = mlp2_relu(g, f.output, g.param(store, "vote.head.l1.w"),
                           g.param(store, "vote.head.l1.b"), g.param(store, "vote.head.l2.w"),
                           g.param(store, "vote.head.l2.b"));
    Value offsets = g.slice_last(head, 0, 3);
    Value logits = g.reshape(g.slice_last(head, 3 + d, 1), {seeds.size()});
    const VoteLabels labels = assign_vote_labels(seeds.coords, gt);
    Value cv = g.mean_all(g.bce_with_logits(logits, g.constant(labels.cls)));
    Value rv = g.scale(
        g.sum_all(g.mul(g.smooth_l1(offsets, g.constant(labels.offset_targets)),
                        g.constant(labels.mask))),
        1.0 / static_cast<double>(std::max<std::size_t>(1, labels.positives * 3)));
    return g.add(cv, rv);
  };
  return s;
}

// Full forward on tiny clouds with only the proposal-stage parameters free:
// everything upstream is bit-identical across perturbations, so the check
// exercises the real clustering code path.
CheckSetup make_proposal() {
  const TrackerConfig cfg = check_tracker();
  CheckSetup s;
  Rng rng(109);
  init_tracker_params(s.store, cfg, rng);
  freeze_except(s.store, {"proposal.", "ptt_prop"});

  SceneSpec spec;
  spec.scene_id = "gradcheck";
  spec.frames = 2;
  spec.points_min = spec.points_max = 40;
  spec.clutter_points = 20;
  spec.clutter_radius = 3.0;
  spec.seed = 110;
  const TrackSequence seq = generate_sequence(spec);
  const std::vector<TrackSequence> seqs = {seq};
  const std::vector<TrainSample> samples =
      build_training_samples(seqs, cfg, {SearchMode::kPreviousResult}, {}, 111);
  if (samples.empty()) throw std::logic_error("gradcheck proposal: no sample");
  const TrainSample sample = samples.front();
  s.fragment = [sample, cfg](Graph& g, ParamStore& store) {
    StageOutputs outs =
        tracker_forward_graph(g, sample.template_cloud, sample.search_cloud, cfg, store);
    return compute_loss_graph(g, outs, sample.gt_canonical, {}).all;
  };
  return s;
}

// Eq-style combination on free output leaves.
CheckSetup make_loss() {
  CheckSetup s;
  Rng rng(112);
  const std::size_t n = 10;
  const std::size_t c = 4;
  auto rnd = [&rng](Shape shape, double span) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-span, span);
    return t;
  };
  s.store.add("out.seed_logits", rnd({n}, 1.5));
  s.store.add("out.vote_offsets", rnd({n, 3}, 0.8));
  s.store.add("out.proposal_centers", rnd({c, 3}, 0.6));
  s.store.add("out.proposal_headings", rnd({c}, 0.5));
  s.store.add("out.proposal_logits", rnd({c}, 1.5));

  std::vector<Point3> coords(n);
  Rng crng(113);
  for (Point3& p : coords) {
    p = {crng.uniform(-1.5, 1.5), crng.uniform(-1.5, 1.5), crng.uniform(-1.5, 1.5)};
  }
  const OrientedBox3 gt = OrientedBox3::make({0.1, 0.2, 0.0}, 1.6, 1.4, 2.4, -0.2);
  LossConfig config;
  config.lambda1 = 0.7;
  config.lambda2 = 1.3;
  config.lambda3 = 0.9;
  s.fragment = [coords, gt, config](Graph& g, ParamStore& store) {
    StageOutputs outs;
    outs.seed_coords = coords;
    outs.seed_logits = g.param(store, "out.seed_logits");
    outs.vote_offsets = g.param(store, "out.vote_offsets");
    outs.vote_centers = g.add(g.constant(Tensor::zeros({coords.size(), 3})),
                              outs.vote_offsets);
    outs.proposal_centers = g.param(store, "out.proposal_centers");
    // Cluster centers drive the proposal labels; a fixed layout with one
    // center inside the positive threshold keeps both branches exercised.
    Tensor clusters = Tensor::zeros({4, 3});
    clusters.at2(0, 0) = 0.15;
    clusters.at2(1, 0) = 1.4;
    clusters.at2(2, 1) = -0.9;
    clusters.at2(3, 2) = 0.7;
    outs.cluster_centers_value = g.constant(std::move(clusters));
    outs.proposal_headings = g.param(store, "out.proposal_headings");
    outs.proposal_logits = g.param(store, "out.proposal_logits");
    return compute_loss_graph(g, outs, gt, config).all;
  };
  return s;
}

CheckSetup make_backbone() {
  TrackerConfig cfg = check_tracker();
  cfg.backbone.levels = {{8, 0.8, 4, 6, 8}, {4, 1.2, 4, 8, 8}};
  cfg.finalize();
  CheckSetup s;
  Rng rng(114);
  init_backbone_params(s.store, "backbone", cfg.backbone, rng);
  PointCloud cloud;
  Rng crng(115);
  for (int i = 0; i < 14; ++i) {
    cloud.points.push_back(
        {crng.uniform(-1, 1), crng.uniform(-1, 1), crng.uniform(-1, 1)});
  }
  const BackboneConfig bb = cfg.backbone;
  s.fragment = [cloud, bb](Graph& g, ParamStore& store) {
    BackboneOut out = backbone_forward_graph(g, cloud, bb, store, "backbone");
    return g.sum_all(g.mul(out.feats, out.feats));
  };
  return s;
}

CheckSetup make_augment() {
  const TrackerConfig cfg = check_tracker();
  CheckSetup s;
  Rng rng(116);
  init_tracker_params(s.store, cfg, rng);
  freeze_except(s.store, {"augment."});
  const std::size_t n = cfg.backbone.seed_count();
  const std::size_t d = cfg.backbone.descriptor_dim();
  const Tensor search = fixed_seeds(n, d, 117).feats;
  const Tensor tmpl = fixed_seeds(n, d, 118).feats;
  s.fragment = [search, tmpl](Graph& g, ParamStore& store) {
    Value fused = augment_similarity_graph(g, g.constant(search), g.constant(tmpl), store);
    return g.sum_all(g.mul(fused, fused));
  };
  return s;
}

CheckSetup make_target(const std::string& name) {
  if (name == "embed") return make_embed();
  if (name == "posenc") return make_posenc();
  if (name == "attention" || name == "ptt") return make_attention();
  if (name == "vote") return make_vote();
  if (name == "proposal") return make_proposal();
  if (name == "loss") return make_loss();
  if (name == "backbone") return make_backbone();
  if (name == "augment") return make_augment();
  throw std::invalid_argument("unknown gradcheck target '" + name + "'");
}

}  // namespace

std::vector<std::string> gradcheck_targets() {
  return {"embed", "posenc", "attention", "vote", "proposal", "loss", "backbone", "augment"};
}

std::vector<NamedReport> run_gradcheck(const std::string& selector, double tolerance,
                                       double step) {
  std::vector<std::string> names;
  if (selector == "all") {
    names = gradcheck_targets();
  } else {
    names = {selector};
  }
  std::vector<NamedReport> out;
  for (const std::string& name : names) {
    CheckSetup setup = make_target(name);
    out.push_back({name, grad_check(setup.fragment, setup.store, tolerance, step)});
  }
  return out;
}

}  // namespace ptt
