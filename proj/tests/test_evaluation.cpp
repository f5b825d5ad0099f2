#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ptt/evaluation.hpp"
#include "ptt/pipeline.hpp"
#include "ptt/rng.hpp"
#include "ptt/synth.hpp"

using namespace ptt;

namespace {

// Independent trapezoid AUC over a hand-built fraction table.
double hand_auc_percent(const std::vector<double>& frac, double step, double range) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < frac.size(); ++i) {
    area += 0.5 * (frac[i] + frac[i + 1]) * step;
  }
  return 100.0 * area / range;
}

OrientedBox3 box_at(double x, double heading = 0.0) {
  return OrientedBox3::make({x, 0, 0}, 1.8, 1.6, 4.2, heading);
}

}  // namespace

TEST_CASE("ope perfect and hopeless tracking") {
  const OpeConfig config = OpeConfig::defaults();

  std::vector<OrientedBox3> gt, pred;
  for (int t = 0; t < 5; ++t) {
    gt.push_back(box_at(0.5 * t));
    pred.push_back(box_at(0.5 * t));
  }
  const OpeResult perfect = ope_metrics(pred, gt, config);
  // Overlap 1 clears every threshold except the 1.0 endpoint; error 0 beats
  // every positive threshold: both AUCs pin at 97.5 on the default grids.
  CHECK(perfect.success == doctest::Approx(97.5).epsilon(1e-12));
  CHECK(perfect.precision == doctest::Approx(97.5).epsilon(1e-12));

  std::vector<OrientedBox3> off;
  for (int t = 0; t < 5; ++t) off.push_back(box_at(0.5 * t + 100.0));
  const OpeResult lost = ope_metrics(off, gt, config);
  CHECK(lost.success == 0.0);
  CHECK(lost.precision == 0.0);

  CHECK_THROWS_AS(ope_metrics(pred, std::vector<OrientedBox3>(gt.begin(), gt.end() - 1), config),
                  std::invalid_argument);
}

TEST_CASE("ope four-frame toy matches hand trapezoid computation") {
  const OpeConfig config = OpeConfig::defaults();
  const std::vector<double> overlaps = {1.0, 0.6, 0.4, 0.0};
  const std::vector<double> errors = {0.0, 0.5, 1.0, 3.0};
  const OpeResult r = ope_from_samples(overlaps, errors, config);

  // Hand table of exceedance fractions on the 21-point overlap grid.
  std::vector<double> sfrac(21);
  for (int i = 0; i <= 20; ++i) {
    const double t = 0.05 * i;
    int hits = 0;
    for (double v : overlaps) {
      if (v > t) ++hits;
    }
    sfrac[i] = hits / 4.0;
  }
  CHECK(r.success == doctest::Approx(hand_auc_percent(sfrac, 0.05, 1.0)).epsilon(1e-9));
  CHECK(r.success == doctest::Approx(48.125).epsilon(1e-9));

  std::vector<double> pfrac(21);
  for (int i = 0; i <= 20; ++i) {
    const double t = 0.1 * i;
    int hits = 0;
    for (double v : errors) {
      if (v < t) ++hits;
    }
    pfrac[i] = hits / 4.0;
  }
  CHECK(r.precision == doctest::Approx(hand_auc_percent(pfrac, 0.1, 2.0)).epsilon(1e-9));
  CHECK(r.precision == doctest::Approx(54.375).epsilon(1e-9));
}

TEST_CASE("ope invariances") {
  const OpeConfig config = OpeConfig::defaults();
  const std::vector<double> overlaps = {0.9, 0.5, 0.7, 0.2, 0.8};
  const std::vector<double> errors = {0.1, 0.6, 0.3, 1.5, 0.2};
  const OpeResult base = ope_from_samples(overlaps, errors, config);

  // Permutation invariance over frame order.
  const std::vector<double> o2 = {0.2, 0.9, 0.8, 0.5, 0.7};
  const std::vector<double> e2 = {1.5, 0.1, 0.2, 0.6, 0.3};
  const OpeResult shuffled = ope_from_samples(o2, e2, config);
  CHECK(base.success == shuffled.success);
  CHECK(base.precision == shuffled.precision);

  // Degrading one frame never increases Success.
  std::vector<double> worse = overlaps;
  worse[1] = 0.1;
  const OpeResult degraded = ope_from_samples(worse, errors, config);
  CHECK(degraded.success <= base.success);
}

TEST_CASE("bev center error flag") {
  OpeConfig config = OpeConfig::defaults();
  std::vector<OrientedBox3> gt = {box_at(0), box_at(0)};
  std::vector<OrientedBox3> pred = {box_at(0), OrientedBox3::make({0.3, 0, 1.0}, 1.8, 1.6, 4.2, 0)};
  const OpeResult full3d = ope_metrics(pred, gt, config);
  config.bev_center_error = true;
  const OpeResult bev = ope_metrics(pred, gt, config);
  CHECK(full3d.center_errors[0] == doctest::Approx(std::sqrt(0.09 + 1.0)));
  CHECK(bev.center_errors[0] == doctest::Approx(0.3));
}

TEST_CASE("sparsity buckets") {
  CHECK(sparsity_bucket_index(0) == 0);
  CHECK(sparsity_bucket_index(11) == 0);
  CHECK(sparsity_bucket_index(19) == 0);
  CHECK(sparsity_bucket_index(20) == 1);
  CHECK(sparsity_bucket_index(52) == 1);
  CHECK(sparsity_bucket_index(99) == 1);
  CHECK(sparsity_bucket_index(100) == 2);
  CHECK(sparsity_bucket_index(293) == 2);
  CHECK(sparsity_bucket_index(499) == 2);
  CHECK(sparsity_bucket_index(500) == 3);
  CHECK(sparsity_bucket_index(883) == 3);
}

TEST_CASE("sparsity_histogram counts inside-box points") {
  // All frames with 10 inside points: 100% in the first bucket.
  SceneSpec sparse;
  sparse.scene_id = "sparse";
  sparse.frames = 6;
  sparse.points_min = sparse.points_max = 10;
  sparse.clutter_points = 200;
  sparse.seed = 5;
  const std::vector<TrackSequence> seqs = {generate_sequence(sparse)};
  const std::vector<SparsityBucket> hist = sparsity_histogram(seqs);
  REQUIRE(hist.size() == 4);
  CHECK(hist[0].frames == 6);
  CHECK(hist[0].fraction == doctest::Approx(1.0));
  CHECK(hist[1].frames + hist[2].frames + hist[3].frames == 0);
  double total = 0.0;
  for (const SparsityBucket& b : hist) total += b.fraction;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  // Exemplar counts: one frame per bucket.
  SceneSpec mix = sparse;
  mix.scene_id = "mix";
  mix.frames = 4;
  mix.per_frame_counts = {11, 52, 293, 883};
  mix.points_min = 1;
  mix.points_max = 1000;
  const std::vector<TrackSequence> mixed = {generate_sequence(mix)};
  const std::vector<SparsityBucket> mh = sparsity_histogram(mixed);
  for (const SparsityBucket& b : mh) CHECK(b.frames == 1);

  // Brute-force containment recount agrees.
  std::size_t recount[4] = {0, 0, 0, 0};
  for (const Frame& f : mixed[0].frames) {
    std::size_t inside = 0;
    for (const Point3& p : f.cloud.points) {
      if (box_contains(f.gt_box, p)) ++inside;
    }
    ++recount[sparsity_bucket_index(inside)];
  }
  for (std::size_t b = 0; b < 4; ++b) CHECK(mh[b].frames == recount[b]);
}

TEST_CASE("per_interval_ope weighting") {
  const OpeConfig config = OpeConfig::defaults();

  // A single populated interval reproduces plain ope_from_samples.
  SequenceEval lone;
  lone.first_frame_points = 50;
  lone.overlaps = {0.9, 0.8};
  lone.center_errors = {0.1, 0.2};
  const std::vector<SequenceEval> one = {lone};
  const PerIntervalReport single = per_interval_ope(one, config);
  const OpeResult direct = ope_from_samples(lone.overlaps, lone.center_errors, config);
  REQUIRE(single.intervals.size() == 4);
  CHECK(single.intervals[0].populated == false);
  CHECK(single.intervals[1].populated);
  CHECK(single.intervals[1].ope.success == direct.success);
  CHECK(single.mean_success == direct.success);
  // Interval ordering is fixed.
  CHECK(single.intervals[0].label == "<20");
  CHECK(single.intervals[3].label == ">500");

  // Two intervals: weighted mean matches the hand computation.
  SequenceEval dense;
  dense.first_frame_points = 700;
  dense.overlaps = {0.4, 0.3, 0.2};
  dense.center_errors = {0.9, 1.1, 1.3};
  const std::vector<SequenceEval> both = {lone, dense};
  const PerIntervalReport two = per_interval_ope(both, config);
  const OpeResult d2 = ope_from_samples(dense.overlaps, dense.center_errors, config);
  const double expect_s = (direct.success * 2 + d2.success * 3) / 5.0;
  const double expect_p = (direct.precision * 2 + d2.precision * 3) / 5.0;
  CHECK(two.mean_success == doctest::Approx(expect_s).epsilon(1e-12));
  CHECK(two.mean_precision == doctest::Approx(expect_p).epsilon(1e-12));
  CHECK(two.total_frames == 5);
}

TEST_CASE("kitti label conversion grouping") {
  // Single ID across five frames.
  std::istringstream single(
      "0 2 Car 0 0 -1.5 100 120 180 200 1.5 1.6 3.9 1.0 1.7 8.0 -1.2\n"
      "1 2 Car 0 0 -1.5 101 120 181 200 1.5 1.6 3.9 1.1 1.7 8.1 -1.2\n"
      "2 2 Car 0 0 -1.5 102 120 182 200 1.5 1.6 3.9 1.2 1.7 8.2 -1.2\n"
      "3 2 Car 0 0 -1.5 103 120 183 200 1.5 1.6 3.9 1.3 1.7 8.3 -1.2\n"
      "4 2 Car 0 0 -1.5 104 120 184 200 1.5 1.6 3.9 1.4 1.7 8.4 -1.2\n");
  const auto tracklets = convert_kitti_labels(single, "0000");
  REQUIRE(tracklets.size() == 1);
  CHECK(tracklets[0].rows.size() == 5);
  CHECK(tracklets[0].track_id == 2);
  CHECK(tracklets[0].scene == "0000");

  // Two interleaved IDs split into two frame-ordered tracklets.
  std::istringstream interleaved(
      "0 1 Car 0 0 0 0 0 10 10 1.5 1.6 3.9 0 1.7 10 0\n"
      "0 2 Pedestrian 0 0 0 0 0 10 10 1.8 0.6 0.8 2 1.7 12 0\n"
      "1 1 Car 0 0 0 0 0 10 10 1.5 1.6 3.9 0.5 1.7 10 0\n"
      "1 2 Pedestrian 0 0 0 0 0 10 10 1.8 0.6 0.8 2 1.7 12.5 0\n"
      "2 1 Car 0 0 0 0 0 10 10 1.5 1.6 3.9 1.0 1.7 10 0\n");
  const auto two = convert_kitti_labels(interleaved, "0001");
  REQUIRE(two.size() == 2);
  CHECK(two[0].track_id == 1);
  CHECK(two[0].rows.size() == 3);
  CHECK(two[1].track_id == 2);
  CHECK(two[1].rows.size() == 2);
  for (const KittiTracklet& t : two) {
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
      CHECK(t.rows[i].frame > t.rows[i - 1].frame);
    }
  }

  // DontCare rows are skipped.
  std::istringstream dontcare(
      "0 -1 DontCare -1 -1 -10 0 0 10 10 -1 -1 -1 -1000 -1000 -1000 -10\n"
      "0 3 Van 0 0 0 0 0 10 10 2.0 1.8 5.0 3 1.7 15 0.2\n");
  CHECK(convert_kitti_labels(dontcare, "0002").size() == 1);

  // Malformed rows and non-monotonic frames are rejected with line numbers.
  std::istringstream malformed("0 1 Car 0 0 0 0 0 10 10 1.5 1.6 oops 0 1.7 10 0\n");
  CHECK_THROWS_AS(convert_kitti_labels(malformed, "x"), KittiParseError);
  try {
    std::istringstream bad(
        "0 1 Car 0 0 0 0 0 10 10 1.5 1.6 3.9 0 1.7 10 0\n"
        "5 1 Car 0 0 0 0 0 10 10 1.5 1.6 3.9 0 1.7 10 0\n"
        "3 1 Car 0 0 0 0 0 10 10 1.5 1.6 3.9 0 1.7 10 0\n");
    convert_kitti_labels(bad, "x");
    CHECK(false);
  } catch (const KittiParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("kitti hand-grouped six-row fixture") {
  std::ifstream fixture(std::string(PTT_FIXTURE_DIR) + "/kitti_labels_0000.txt");
  REQUIRE(fixture.good());
  const auto tracklets = convert_kitti_labels(fixture, "0000");
  // Hand grouping: id 0 has frames {0,1,2}, id 1 has frames {0,2}, one
  // DontCare row is dropped.
  REQUIRE(tracklets.size() == 2);
  CHECK(tracklets[0].track_id == 0);
  REQUIRE(tracklets[0].rows.size() == 3);
  CHECK(tracklets[0].rows[2].frame == 2);
  CHECK(tracklets[1].track_id == 1);
  REQUIRE(tracklets[1].rows.size() == 2);
  CHECK(tracklets[1].rows[1].frame == 2);
  CHECK(tracklets[0].type == "Car");
  CHECK(tracklets[1].type == "Pedestrian");
}

TEST_CASE("kitti rows survive a serialization round trip bit-exactly") {
  std::istringstream src(
      "0 7 Car 0.25 1 -1.234567890123 601.5 160.25 660.125 190.0 "
      "1.526 1.63 3.88 -3.1459 1.7101 22.22 0.0174532925199\n");
  const auto tracklets = convert_kitti_labels(src, "0000");
  REQUIRE(tracklets.size() == 1);
  const KittiLabelRow& row = tracklets[0].rows[0];
  const std::string serialized = serialize_kitti_row(row);
  std::istringstream again(serialized + "\n");
  const auto reparsed = convert_kitti_labels(again, "0000");
  const KittiLabelRow& row2 = reparsed[0].rows[0];
  CHECK(row2.h == row.h);
  CHECK(row2.w == row.w);
  CHECK(row2.l == row.l);
  CHECK(row2.x == row.x);
  CHECK(row2.y == row.y);
  CHECK(row2.z == row.z);
  CHECK(row2.rotation_y == row.rotation_y);
  CHECK(row2.alpha == row.alpha);
  CHECK(serialize_kitti_row(row2) == serialized);
}

TEST_CASE("kitti camera frame maps to z-up") {
  KittiLabelRow row;
  row.h = 1.5;
  row.w = 1.6;
  row.l = 3.9;
  row.x = 2.0;   // right of camera
  row.y = 1.7;   // down (road level)
  row.z = 10.0;  // ahead
  row.rotation_y = 0.0;
  const OrientedBox3 box = kitti_box_z_up(row);
  CHECK(box.center.x == doctest::Approx(10.0));   // forward -> +x
  CHECK(box.center.y == doctest::Approx(-2.0));   // right -> -y
  CHECK(box.center.z == doctest::Approx(-0.95));  // bottom + h/2 up
  CHECK(box.h == 1.5);
  CHECK(box.w == 1.6);
  CHECK(box.l == 3.9);
  CHECK(box.heading == doctest::Approx(1.5707963267948966));

  // A camera-frame point ahead of the object's nose stays in the box after
  // conversion.
  const Point3 nose_cam{2.0, 1.7 - 0.75, 10.0 + 1.9};  // along z_cam for ry=0... length axis
  const Point3 nose_up{nose_cam.z, -nose_cam.x, 0.0};
  // ry=0 means the length axis points along x_cam, not z_cam; check the
  // x_cam direction instead.
  const Point3 tip_cam{2.0 + 1.9, 1.7 - 0.75, 10.0};
  const Point3 tip_up{tip_cam.z, -tip_cam.x, -(tip_cam.y)};
  CHECK(box_contains(box, tip_up));
  (void)nose_up;
}

TEST_CASE("stage timings fps definition") {
  StageTimings t;
  t.frames = 20;
  t.total_ms = 500.0;
  CHECK(t.fps() == doctest::Approx(40.0));
  t.total_ms = 0.0;
  CHECK(t.fps() == 0.0);
}
