#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ptt/gradcheck.hpp"
#include "ptt/io.hpp"
#include "ptt/loss.hpp"
#include "ptt/rng.hpp"
#include "ptt/synth.hpp"
#include "ptt/train.hpp"

using namespace ptt;

namespace {

TrackerConfig tiny_tracker() {
  TrackerConfig c;
  c.backbone.levels = {{24, 0.6, 6, 8, 16}, {10, 1.0, 6, 16, 16}};
  c.ptt.neighbors = 4;
  c.template_budget = 64;
  c.search_budget = 96;
  c.augment_hidden = 16;
  c.vote_hidden = 16;
  c.cluster_count = 4;
  c.cluster_radius = 0.8;
  c.cluster_cap = 4;
  c.cluster_hidden = 16;
  c.cluster_feat_dim = 16;
  c.proposal_hidden = 16;
  c.finalize();
  return c;
}

SceneSpec toy_scene(std::uint64_t seed, std::size_t frames) {
  SceneSpec spec;
  spec.scene_id = "toy";
  spec.frames = frames;
  spec.points_min = 80;
  spec.points_max = 80;
  spec.clutter_points = 30;
  spec.clutter_radius = 4.0;
  spec.traj.speed = 0.5;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("assign_vote_labels membership and targets") {
  const OrientedBox3 box = OrientedBox3::make({1, 0, 0}, 2, 2, 2, 0.3);

  // No seed inside: all negative, empty regression mask.
  std::vector<Point3> far = {{10, 0, 0}, {0, 10, 0}};
  const VoteLabels none = assign_vote_labels(far, box);
  CHECK(none.positives == 0);
  for (double v : none.cls.data) CHECK(v == 0.0);
  for (double v : none.mask.data) CHECK(v == 0.0);

  // Seed exactly at the center: zero offset target.
  std::vector<Point3> center = {box.center};
  const VoteLabels hit = assign_vote_labels(center, box);
  CHECK(hit.positives == 1);
  CHECK(hit.cls[0] == 1.0);
  CHECK(hit.offset_targets.at2(0, 0) == 0.0);
  CHECK(hit.offset_targets.at2(0, 1) == 0.0);
  CHECK(hit.offset_targets.at2(0, 2) == 0.0);

  // Synthetic frame: positive count equals brute-force membership.
  const TrackSequence seq = generate_sequence(toy_scene(5, 3));
  const Frame& f = seq.frames[0];
  const VoteLabels labels = assign_vote_labels(f.cloud.points, f.gt_box);
  std::size_t brute = 0;
  for (const Point3& p : f.cloud.points) {
    if (box_contains(f.gt_box, p)) ++brute;
  }
  CHECK(labels.positives == brute);

  // Optional radius cap tightens the positive set.
  LossConfig capped;
  capped.vote_positive_radius = 0.5;
  const VoteLabels tight = assign_vote_labels(f.cloud.points, f.gt_box, capped);
  CHECK(tight.positives <= labels.positives);
}

TEST_CASE("compute_loss values and combination") {
  // Hand-built outputs: 4 seeds, 2 proposals.
  Graph g;
  StageOutputs outs;
  outs.seed_coords = {{0, 0, 0}, {0.2, 0, 0}, {5, 5, 5}, {-4, 0, 0}};
  const OrientedBox3 gt = OrientedBox3::make({0.1, 0, 0}, 1, 1, 1, 0.0);

  outs.seed_logits = g.variable(Tensor::zeros({4}));
  // Perfect vote offsets: each positive seed points at the GT center.
  Tensor off = Tensor::zeros({4, 3});
  off.at2(0, 0) = 0.1;
  off.at2(1, 0) = -0.1;
  outs.vote_offsets = g.variable(off);
  outs.vote_centers = g.add(g.constant(Tensor::zeros({4, 3})), outs.vote_offsets);

  Tensor pcenters = Tensor::zeros({2, 3});
  pcenters.at2(0, 0) = 0.1;   // positive (dist 0 < 0.3)
  pcenters.at2(1, 0) = 5.0;   // negative
  outs.proposal_centers = g.variable(pcenters);
  outs.cluster_centers_value = g.constant(pcenters);
  outs.proposal_headings = g.variable(Tensor::zeros({2}));
  outs.proposal_logits = g.variable(Tensor::zeros({2}));

  LossConfig config;
  const LossValues values = compute_loss_graph(g, outs, gt, config);
  const LossBreakdown b = read_loss(g, values);

  // Balanced 0-logit classification terms are exactly ln 2.
  CHECK(b.cv == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(b.cb == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  // Perfect regression: both smooth-L1 terms vanish.
  CHECK(b.rv == 0.0);
  CHECK(b.rb == 0.0);
  CHECK(b.cv >= 0.0);
  CHECK(b.cb >= 0.0);
  CHECK(std::abs(b.all - (b.cv + config.lambda1 * b.cb + config.lambda2 * b.rv +
                          config.lambda3 * b.rb)) < 1e-12);
}

TEST_CASE("loss lambda weighting is linear") {
  auto run = [](double lambda1) {
    Graph g;
    StageOutputs outs;
    outs.seed_coords = {{0, 0, 0}, {3, 3, 3}};
    outs.seed_logits = g.variable(Tensor({2}, {0.4, -0.2}));
    outs.vote_offsets = g.variable(Tensor::zeros({2, 3}));
    outs.vote_centers = outs.vote_offsets;
    outs.proposal_centers = g.variable(Tensor({1, 3}, {0.05, 0.0, 0.0}));
    outs.cluster_centers_value = g.constant(Tensor({1, 3}, {0.05, 0.0, 0.0}));
    outs.proposal_headings = g.variable(Tensor({1}, {0.3}));
    outs.proposal_logits = g.variable(Tensor({1}, {0.7}));
    LossConfig config;
    config.lambda1 = lambda1;
    const OrientedBox3 gt = OrientedBox3::make({0, 0, 0}, 1, 1, 1, 0.0);
    return read_loss(g, compute_loss_graph(g, outs, gt, config));
  };
  const LossBreakdown one = run(1.0);
  const LossBreakdown two = run(2.0);
  CHECK(one.cb == two.cb);  // sub-losses unchanged
  CHECK(std::abs((two.all - two.cv - 2.0 * two.cb - two.rv - two.rb)) < 1e-12);
  CHECK(std::abs((two.all - one.all) - one.cb) < 1e-12);
}

TEST_CASE("no positives yields exactly zero regression terms") {
  Graph g;
  StageOutputs outs;
  outs.seed_coords = {{9, 9, 9}};
  outs.seed_logits = g.variable(Tensor({1}, {0.2}));
  outs.vote_offsets = g.variable(Tensor({1, 3}, {1.0, 2.0, 3.0}));
  outs.vote_centers = outs.vote_offsets;
  outs.proposal_centers = g.variable(Tensor({1, 3}, {8.0, 0.0, 0.0}));
  outs.cluster_centers_value = g.constant(Tensor({1, 3}, {8.0, 0.0, 0.0}));
  outs.proposal_headings = g.variable(Tensor({1}, {0.0}));
  outs.proposal_logits = g.variable(Tensor({1}, {0.0}));
  const OrientedBox3 gt = OrientedBox3::make({0, 0, 0}, 1, 1, 1, 0.0);
  const LossBreakdown b = read_loss(g, compute_loss_graph(g, outs, gt, {}));
  CHECK(b.rv == 0.0);
  CHECK(b.rb == 0.0);
}

TEST_CASE("vote and proposal stage losses pass gradient checks") {
  // Vote head fragment: constant augmented seeds, L_cv + L_rv.
  TrackerConfig cfg = tiny_tracker();
  Rng rng(31);
  ParamStore store;
  init_tracker_params(store, cfg, rng);

  const std::size_t n = 8;
  const std::size_t d = cfg.backbone.descriptor_dim();
  SeedSet seeds;
  seeds.coords.resize(n);
  Rng srng(32);
  for (Point3& p : seeds.coords) {
    p = {srng.uniform(-1, 1), srng.uniform(-1, 1), srng.uniform(-1, 1)};
  }
  seeds.feats = Tensor::zeros({n, d});
  for (double& v : seeds.feats.data) v = srng.uniform(-1, 1);
  const OrientedBox3 gt = OrientedBox3::make({0.2, 0.1, 0}, 1.5, 1.5, 2.0, 0.1);

  // Only the vote-path parameters participate; freeze the rest so the
  // finite-difference sweep stays small.
  for (ParamStore::Entry& e : store.entries()) {
    if (e.name.rfind("vote.head", 0) != 0 && e.name.rfind("ptt_vote", 0) != 0) {
      e.trainable = false;
    }
  }
  auto vote_fragment = [&, cfg](Graph& g, ParamStore& s) {
    StageOutputs outs;
    outs.seed_coords = seeds.coords;
    Value feats = g.constant(seeds.feats);
    PttForward f = ptt_forward_graph(g, seeds, cfg.ptt, s, "ptt_vote", feats);
    Value head = mlp2_relu(g, f.output, g.param(s, "vote.head.l1.w"),
                           g.param(s, "vote.head.l1.b"), g.param(s, "vote.head.l2.w"),
                           g.param(s, "vote.head.l2.b"));
    outs.vote_offsets = g.slice_last(head, 0, 3);
    outs.seed_logits = g.reshape(g.slice_last(head, 3 + d, 1), {n});
    const VoteLabels labels = assign_vote_labels(seeds.coords, gt);
    Value cv = g.mean_all(g.bce_with_logits(outs.seed_logits, g.constant(labels.cls)));
    Value rv_elem = g.smooth_l1(outs.vote_offsets, g.constant(labels.offset_targets));
    Value rv = g.scale(g.sum_all(g.mul(rv_elem, g.constant(labels.mask))),
                       1.0 / std::max<std::size_t>(1, labels.positives * 3));
    return g.add(cv, rv);
  };
  const GradCheckReport vote_report = grad_check(vote_fragment, store, 1e-4);
  INFO(vote_report.summary());
  CHECK(vote_report.pass);
}

TEST_CASE("full compute_loss gradient check through the proposal stage") {
  TrackerConfig cfg = tiny_tracker();
  cfg.cluster_count = 3;
  cfg.cluster_cap = 3;
  cfg.finalize();
  Rng rng(33);
  ParamStore store;
  init_tracker_params(store, cfg, rng);
  for (ParamStore::Entry& e : store.entries()) {
    if (e.name.rfind("proposal.", 0) != 0 && e.name.rfind("ptt_prop", 0) != 0) {
      e.trainable = false;
    }
  }

  // Constant votes feed the proposal stage.
  const std::size_t n = 7;
  const std::size_t d = cfg.backbone.descriptor_dim();
  Rng vrng(34);
  Tensor centers = Tensor::zeros({n, 3});
  Tensor feats = Tensor::zeros({n, d});
  for (double& v : centers.data) v = vrng.uniform(-1, 1);
  for (double& v : feats.data) v = vrng.uniform(-1, 1);
  const OrientedBox3 gt = OrientedBox3::make({0.1, -0.2, 0.1}, 1.5, 1.5, 2.0, 0.05);

  auto prop_fragment = [&, cfg](Graph& g, ParamStore& s) {
    StageOutputs outs;
    outs.seed_coords = {{0, 0, 0}};
    outs.seed_logits = g.constant(Tensor::zeros({1}));
    outs.vote_offsets = g.constant(Tensor::zeros({1, 3}));
    Value vc = g.constant(centers);
    Value vf = g.constant(feats);
    // Cluster numerically, exactly as the tracker does.
    std::vector<Point3> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {centers.at2(i, 0), centers.at2(i, 1), centers.at2(i, 2)};
    SampleSpec spec;
    spec.count = cfg.cluster_count;
    const SampleResult sel = sample_fps(pts, spec);
    IndexMatrix cidx(sel.indices.size(), 1);
    for (std::size_t i = 0; i < sel.indices.size(); ++i) cidx.at(i, 0) = sel.indices[i];
    Value cc = g.reshape(g.gather_rows(vc, cidx), {sel.indices.size(), 3});
    std::vector<Point3> cpts(sel.indices.size());
    for (std::size_t i = 0; i < cpts.size(); ++i) {
      cpts[i] = pts[static_cast<std::size_t>(sel.indices[i])];
    }
    const IndexMatrix group = knn(cpts, pts, cfg.cluster_cap);
    Value rel = g.sub(g.gather_rows(vc, group), g.expand_mid(cc, cfg.cluster_cap));
    Value rows = g.concat_last({rel, g.gather_rows(vf, group)});
    Value h1 = g.relu(g.linear(rows, g.param(s, "proposal.sa.l1.w"), g.param(s, "proposal.sa.l1.b")));
    Value h2 = g.relu(g.linear(h1, g.param(s, "proposal.sa.l2.w"), g.param(s, "proposal.sa.l2.b")));
    Value pooled = g.max_axis(h2, 1);
    Value head = mlp2_relu(g, pooled, g.param(s, "proposal.head.l1.w"),
                           g.param(s, "proposal.head.l1.b"), g.param(s, "proposal.head.l2.w"),
                           g.param(s, "proposal.head.l2.b"));
    outs.proposal_centers = g.add(cc, g.slice_last(head, 0, 3));
    outs.cluster_centers_value = cc;
    outs.proposal_headings = g.reshape(g.slice_last(head, 3, 1), {cpts.size()});
    outs.proposal_logits = g.reshape(g.slice_last(head, 4, 1), {cpts.size()});
    outs.vote_centers = vc;
    const LossValues values = compute_loss_graph(g, outs, gt, {});
    return values.all;
  };
  const GradCheckReport report = grad_check(prop_fragment, store, 1e-4);
  INFO(report.summary());
  CHECK(report.pass);
}

TEST_CASE("augment_offsets perturbation statistics") {
  const OrientedBox3 gt = OrientedBox3::make({1, 2, 0.5}, 1.8, 1.6, 4.2, 0.4);

  AugmentConfig zero;
  zero.xyz_range = 0.0;
  zero.yaw_range_deg = 0.0;
  Rng rng(41);
  const OrientedBox3 same = augment_offsets(gt, rng, zero);
  CHECK(same.center.x == gt.center.x);
  CHECK(same.heading == gt.heading);

  Rng rng2(42);
  double sum_dx = 0.0, sum_dy = 0.0, sum_dz = 0.0, sum_dh = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const OrientedBox3 aug = augment_offsets(gt, rng2);
    CHECK(aug.heading > -3.14159265358979323846);
    CHECK(aug.heading <= 3.14159265358979323846);
    sum_dx += aug.center.x - gt.center.x;
    sum_dy += aug.center.y - gt.center.y;
    sum_dz += aug.center.z - gt.center.z;
    sum_dh += aug.heading - gt.heading;
  }
  // Uniform(-0.3, 0.3): sigma of the mean = 0.3/sqrt(3)/sqrt(n).
  const double sigma3 = 3.0 * (0.3 / std::sqrt(3.0)) / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(sum_dx / draws) < sigma3);
  CHECK(std::abs(sum_dy / draws) < sigma3);
  CHECK(std::abs(sum_dz / draws) < sigma3);
  CHECK(std::abs(sum_dh / draws) < 3.0 * (0.0873 / std::sqrt(3.0)) / std::sqrt(1.0 * draws));
}

TEST_CASE("train_toy with zero learning rate is a no-op") {
  const TrackerConfig cfg = tiny_tracker();
  ParamStore store;
  Rng rng(51);
  init_tracker_params(store, cfg, rng);
  const std::uint64_t before = store.checksum();

  const TrackSequence seq = generate_sequence(toy_scene(52, 3));
  const std::vector<TrackSequence> seqs = {seq};
  const std::vector<TrainSample> samples =
      build_training_samples(seqs, cfg, {SearchMode::kPreviousResult}, {}, 53);
  REQUIRE_FALSE(samples.empty());

  TrainConfig tc;
  tc.lr = 0.0;
  tc.epochs = 3;
  tc.decay_after_epochs = 0;
  const TrainResult r = train_toy(store, samples, cfg, tc);
  CHECK(store.checksum() == before);
  REQUIRE(r.curve.size() == 3);
  CHECK(r.curve[0].loss.all == r.curve[2].loss.all);  // flat curve
}

TEST_CASE("train_toy is deterministic and reduces the toy objective") {
  const TrackerConfig cfg = tiny_tracker();
  const TrackSequence seq = generate_sequence(toy_scene(61, 3));
  const std::vector<TrackSequence> seqs = {seq};
  const std::vector<TrainSample> samples =
      build_training_samples(seqs, cfg, {SearchMode::kPreviousResult}, {}, 62);
  REQUIRE_FALSE(samples.empty());

  TrainConfig tc;
  tc.epochs = 30;
  tc.decay_after_epochs = 0;
  tc.seed = 63;

  auto run = [&] {
    ParamStore store;
    Rng rng(64);
    init_tracker_params(store, cfg, rng);
    const TrainResult r = train_toy(store, samples, cfg, tc);
    return std::make_pair(store.checksum(), r);
  };
  const auto [sum_a, result_a] = run();
  const auto [sum_b, result_b] = run();
  CHECK(sum_a == sum_b);  // bit-identical parameters
  REQUIRE(result_a.curve.size() == result_b.curve.size());
  CHECK(result_a.curve.back().loss.all == result_b.curve.back().loss.all);
  CHECK_FALSE(result_a.diverged);
  CHECK(result_a.curve.back().loss.all < result_a.curve.front().loss.all);
}

TEST_CASE("fifty Adam steps pull votes toward the target center") {
  const TrackerConfig cfg = tiny_tracker();
  const TrackSequence seq = generate_sequence(toy_scene(71, 2));
  const std::vector<TrackSequence> seqs = {seq};
  const std::vector<TrainSample> samples =
      build_training_samples(seqs, cfg, {SearchMode::kPreviousResult}, {}, 72);
  REQUIRE(samples.size() == 1);

  ParamStore store;
  Rng rng(73);
  init_tracker_params(store, cfg, rng);

  auto mean_vote_distance = [&] {
    Graph g;
    const StageOutputs outs = tracker_forward_graph(g, samples[0].template_cloud,
                                                    samples[0].search_cloud, cfg, store);
    const Tensor& centers = g.value(outs.vote_centers);
    const VoteLabels labels = assign_vote_labels(outs.seed_coords, samples[0].gt_canonical);
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < centers.shape[0]; ++i) {
      if (labels.cls[i] != 1.0) continue;
      const Point3 c{centers.at2(i, 0), centers.at2(i, 1), centers.at2(i, 2)};
      acc += (c - samples[0].gt_canonical.center).norm();
      ++cnt;
    }
    REQUIRE(cnt > 0);
    return acc / static_cast<double>(cnt);
  };

  const double before = mean_vote_distance();
  TrainConfig tc;
  tc.epochs = 50;
  tc.decay_after_epochs = 0;
  tc.batch_size = 1;
  const TrainResult r = train_toy(store, samples, cfg, tc);
  CHECK_FALSE(r.diverged);
  const double after = mean_vote_distance();
  CHECK(after < before);
}

TEST_CASE("train_toy reports divergence instead of crashing") {
  const TrackerConfig cfg = tiny_tracker();
  const TrackSequence seq = generate_sequence(toy_scene(81, 2));
  const std::vector<TrackSequence> seqs = {seq};
  const std::vector<TrainSample> samples =
      build_training_samples(seqs, cfg, {SearchMode::kPreviousResult}, {}, 82);
  ParamStore store;
  Rng rng(83);
  init_tracker_params(store, cfg, rng);
  TrainConfig tc;
  // Adam moves parameters by about lr per step, so only an astronomically
  // large rate overflows the very next forward pass.
  tc.lr = 1e200;
  tc.epochs = 5;
  tc.decay_after_epochs = 0;
  const TrainResult r = train_toy(store, samples, cfg, tc);
  CHECK(r.diverged);
  CHECK(r.divergence_step >= 0);
}

TEST_CASE("loss curve file format") {
  std::vector<StepRecord> records(2);
  records[0] = {0, {0.5, 0.25, 0.125, 0.0625, 1.0}};
  records[1] = {1, {0.25, 0.125, 0.0625, 0.03125, 0.5}};
  std::ostringstream os;
  write_loss_curve(os, records);
  CHECK(os.str() ==
        "0 0.5 0.25 0.125 0.0625 1\n"
        "1 0.25 0.125 0.0625 0.03125 0.5\n");
}
