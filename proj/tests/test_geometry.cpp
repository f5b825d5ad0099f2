#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ptt/geometry.hpp"
#include "ptt/rng.hpp"

using namespace ptt;

namespace {

constexpr double kPi = 3.14159265358979323846;

OrientedBox3 random_box(Rng& rng, double center_span = 2.0) {
  return OrientedBox3::make({rng.uniform(-center_span, center_span),
                             rng.uniform(-center_span, center_span),
                             rng.uniform(-center_span, center_span)},
                            rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0),
                            rng.uniform(0.5, 3.0), rng.uniform(-kPi, kPi));
}

// Monte-Carlo IoU oracle: uniform samples over the joint AABB, ratio of
// intersection hits to union hits.
double monte_carlo_iou(const OrientedBox3& a, const OrientedBox3& b, std::size_t samples,
                       std::uint64_t seed) {
  const double reach_a = 0.5 * std::sqrt(a.l * a.l + a.w * a.w);
  const double reach_b = 0.5 * std::sqrt(b.l * b.l + b.w * b.w);
  const double lo_x = std::min(a.center.x - reach_a, b.center.x - reach_b);
  const double hi_x = std::max(a.center.x + reach_a, b.center.x + reach_b);
  const double lo_y = std::min(a.center.y - reach_a, b.center.y - reach_b);
  const double hi_y = std::max(a.center.y + reach_a, b.center.y + reach_b);
  const double lo_z = std::min(a.center.z - 0.5 * a.h, b.center.z - 0.5 * b.h);
  const double hi_z = std::max(a.center.z + 0.5 * a.h, b.center.z + 0.5 * b.h);
  Rng rng(seed);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point3 p{rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y), rng.uniform(lo_z, hi_z)};
    const bool in_a = box_contains(a, p);
    const bool in_b = box_contains(b, p);
    if (in_a && in_b) ++inter;
    if (in_a || in_b) ++uni;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST_CASE("box_contains basic membership") {
  const OrientedBox3 unit = OrientedBox3::make({0, 0, 0}, 1, 1, 1, 0.0);
  CHECK(box_contains(unit, {0, 0, 0}));
  CHECK_FALSE(box_contains(unit, {10, 0, 0}));
  // Boundary inclusive.
  CHECK(box_contains(unit, {0.5, 0.5, 0.5}));

  const OrientedBox3 rotated = OrientedBox3::make({1, 0, 0}, 2, 2, 2, kPi / 2);
  CHECK(box_contains(rotated, {1.9, 0, 0}));
}

TEST_CASE("crop_to_box keeps inside points in order") {
  const OrientedBox3 box = OrientedBox3::make({0, 0, 0}, 2, 2, 2, 0.0);

  PointCloud empty;
  CHECK(crop_to_box(empty, box).empty());

  PointCloud inside;
  inside.points = {{0.1, 0.2, 0.0}, {-0.3, 0.0, 0.4}};
  const PointCloud kept = crop_to_box(inside, box);
  REQUIRE(kept.size() == 2);
  CHECK(kept.points[0].x == inside.points[0].x);

  PointCloud mixed;
  mixed.feature_width = 2;
  for (int i = 0; i < 8; ++i) {
    const double far = (i % 3 == 0) ? 0.0 : 5.0;
    mixed.points.push_back({0.1 * i + far, 0.0, 0.0});
    mixed.features.push_back(i);
    mixed.features.push_back(i * 10.0);
  }
  std::size_t expected = 0;
  for (const Point3& p : mixed.points) {
    if (box_contains(box, p)) ++expected;
  }
  CHECK(expected == 3);
  const PointCloud crop = crop_to_box(mixed, box);
  REQUIRE(crop.size() == expected);
  // Feature rows travel with their points, order preserved.
  CHECK(crop.feature_row(1)[0] == doctest::Approx(3.0));
  CHECK(crop.points[0].x <= crop.points[1].x);
}

TEST_CASE("to_canonical_frame examples") {
  const OrientedBox3 at_origin = OrientedBox3::make({0, 0, 0}, 1, 1, 1, 0.0);
  PointCloud cloud;
  cloud.points = {{0.3, -0.2, 0.1}};
  const PointCloud same = to_canonical_frame(cloud, at_origin);
  CHECK(same.points[0].x == cloud.points[0].x);
  CHECK(same.points[0].y == cloud.points[0].y);

  const OrientedBox3 shifted = OrientedBox3::make({1, 2, 3}, 1, 1, 1, 0.7);
  PointCloud center_pt;
  center_pt.points = {shifted.center};
  const PointCloud zeroed = to_canonical_frame(center_pt, shifted);
  CHECK(zeroed.points[0].norm() == doctest::Approx(0.0).epsilon(1e-12));

  // Hand-applied rotation: heading pi/2 box at (1,1,0), point (2,1,0).
  const OrientedBox3 rot = OrientedBox3::make({1, 1, 0}, 1, 1, 1, kPi / 2);
  PointCloud p;
  p.points = {{2, 1, 0}};
  const PointCloud q = to_canonical_frame(p, rot);
  CHECK(q.points[0].x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.points[0].y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.points[0].z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("canonical frame round trip") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const OrientedBox3 box = random_box(rng);
    PointCloud cloud;
    for (int i = 0; i < 30; ++i) {
      cloud.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)});
    }
    const RigidTransform2DYaw w2b = RigidTransform2DYaw::world_to_box(box);
    const PointCloud canon = to_canonical_frame(cloud, box);
    const PointCloud back = w2b.inverse().apply(canon);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(std::abs(back.points[i].x - cloud.points[i].x) < 1e-9);
      CHECK(std::abs(back.points[i].y - cloud.points[i].y) < 1e-9);
      CHECK(std::abs(back.points[i].z - cloud.points[i].z) < 1e-9);
    }
    // world_to_box matches to_canonical_frame exactly.
    const PointCloud via_transform = w2b.apply(cloud);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(std::abs(via_transform.points[i].x - canon.points[i].x) < 1e-12);
    }
  }
}

TEST_CASE("rigid transform compose and inverse") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform2DYaw t{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3),
                                rng.uniform(-kPi, kPi)};
    const Point3 p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Point3 round = t.inverse().apply(t.apply(p));
    CHECK(std::abs(round.x - p.x) < 1e-9);
    CHECK(std::abs(round.y - p.y) < 1e-9);
    CHECK(std::abs(round.z - p.z) < 1e-9);

    const RigidTransform2DYaw u{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3),
                                rng.uniform(-kPi, kPi)};
    const Point3 chained = t.then(u).apply(p);
    const Point3 stepwise = u.apply(t.apply(p));
    CHECK(std::abs(chained.x - stepwise.x) < 1e-9);
    CHECK(std::abs(chained.y - stepwise.y) < 1e-9);
  }
}

TEST_CASE("iou_3d trivial values") {
  const OrientedBox3 a = OrientedBox3::make({0.3, -1.0, 0.5}, 1.7, 1.2, 3.9, 0.45);
  CHECK(iou_3d(a, a) == 1.0);

  const OrientedBox3 far = OrientedBox3::make({100, 0, 0}, 1, 1, 1, 0.0);
  const OrientedBox3 origin = OrientedBox3::make({0, 0, 0}, 1, 1, 1, 0.0);
  CHECK(iou_3d(far, origin) == 0.0);

  // Axis-aligned unit boxes offset by 0.5 along x: intersection 0.5, union 1.5.
  const OrientedBox3 off = OrientedBox3::make({0.5, 0, 0}, 1, 1, 1, 0.0);
  CHECK(iou_3d(origin, off) == doctest::Approx(0.5 / 1.5).epsilon(1e-12));
}

TEST_CASE("iou_3d against Monte-Carlo oracle") {
  const OrientedBox3 origin = OrientedBox3::make({0, 0, 0}, 1, 1, 1, 0.0);
  const OrientedBox3 off = OrientedBox3::make({0.5, 0, 0}, 1, 1, 1, 0.0);
  const double mc = monte_carlo_iou(origin, off, 1000000, 99);
  CHECK(std::abs(iou_3d(origin, off) - mc) < 1e-2);

  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    OrientedBox3 a = random_box(rng, 1.0);
    OrientedBox3 b = random_box(rng, 1.0);
    const double exact = iou_3d(a, b);
    const double approx = monte_carlo_iou(a, b, 200000, 1000 + trial);
    CHECK(std::abs(exact - approx) < 2e-2);
  }
}

TEST_CASE("iou_3d symmetry and rigid invariance") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const OrientedBox3 a = random_box(rng, 1.5);
    const OrientedBox3 b = random_box(rng, 1.5);
    CHECK(iou_3d(a, b) == iou_3d(b, a));  // bit-exact by canonical ordering

    const RigidTransform2DYaw t{rng.uniform(-10, 10), rng.uniform(-10, 10),
                                rng.uniform(-10, 10), rng.uniform(-kPi, kPi)};
    CHECK(std::abs(iou_3d(t.apply(a), t.apply(b)) - iou_3d(a, b)) < 1e-9);
  }
}

TEST_CASE("crop_to_box matches brute-force membership count") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const OrientedBox3 box = random_box(rng);
    PointCloud cloud;
    for (int i = 0; i < 200; ++i) {
      cloud.points.push_back({rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)});
    }
    std::size_t brute = 0;
    for (const Point3& p : cloud.points) {
      if (box_contains(box, p)) ++brute;
    }
    CHECK(crop_to_box(cloud, box).size() == brute);
  }
}

TEST_CASE("heading normalization") {
  CHECK(OrientedBox3::make({0, 0, 0}, 1, 1, 1, 3 * kPi).heading == doctest::Approx(kPi));
  CHECK(OrientedBox3::make({0, 0, 0}, 1, 1, 1, -kPi).heading == doctest::Approx(kPi));
  CHECK(normalize_angle(2 * kPi) == doctest::Approx(0.0));
  CHECK(normalize_angle(-3.5 * kPi) == doctest::Approx(0.5 * kPi));
  CHECK_THROWS_AS(OrientedBox3::make({0, 0, 0}, -1, 1, 1, 0), std::invalid_argument);
}
