#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "ptt/rng.hpp"
#include "ptt/sampling.hpp"

using namespace ptt;

namespace {

std::vector<Point3> random_points(std::size_t n, Rng& rng, double span = 5.0) {
  std::vector<Point3> pts(n);
  for (Point3& p : pts) {
    p = {rng.uniform(-span, span), rng.uniform(-span, span), rng.uniform(-span, span)};
  }
  return pts;
}

// O(N^2 * count) reference FPS: recomputes the minimum distance to the whole
// selected set at every step, ties to the lowest index.
std::vector<std::int32_t> brute_force_fps(std::span<const Point3> pts, std::size_t count,
                                          std::size_t start) {
  std::vector<std::int32_t> sel{static_cast<std::int32_t>(start)};
  const std::size_t unique = std::min(count, pts.size());
  while (sel.size() < unique) {
    double best = -1.0;
    std::size_t best_i = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), static_cast<std::int32_t>(i)) != sel.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::int32_t s : sel) {
        d = std::min(d, squared_distance(pts[i], pts[static_cast<std::size_t>(s)]));
      }
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    sel.push_back(static_cast<std::int32_t>(best_i));
  }
  for (std::size_t s = unique; s < count; ++s) sel.push_back(sel[s % unique]);
  return sel;
}

std::vector<std::int32_t> brute_force_feat_fps(const Tensor& feats, std::size_t count,
                                               std::size_t start) {
  const std::size_t n = feats.shape[0];
  const std::size_t d = feats.shape[1];
  auto dist2 = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = feats.at2(a, t) - feats.at2(b, t);
      acc += diff * diff;
    }
    return acc;
  };
  std::vector<std::int32_t> sel{static_cast<std::int32_t>(start)};
  const std::size_t unique = std::min(count, n);
  while (sel.size() < unique) {
    double best = -1.0;
    std::size_t best_i = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(sel.begin(), sel.end(), static_cast<std::int32_t>(i)) != sel.end()) continue;
      double mind = std::numeric_limits<double>::infinity();
      for (std::int32_t s : sel) mind = std::min(mind, dist2(i, static_cast<std::size_t>(s)));
      if (mind > best) {
        best = mind;
        best_i = i;
      }
    }
    sel.push_back(static_cast<std::int32_t>(best_i));
  }
  return sel;
}

double min_pairwise_distance(std::span<const Point3> pts, std::span<const std::int32_t> idx) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      best = std::min(best, squared_distance(pts[static_cast<std::size_t>(idx[a])],
                                             pts[static_cast<std::size_t>(idx[b])]));
    }
  }
  return std::sqrt(best);
}

}  // namespace

TEST_CASE("sample_random permutation and determinism") {
  Rng rng(1);
  PointCloud cloud;
  cloud.points = random_points(40, rng);
  SampleSpec spec;
  spec.method = SamplerKind::kRandom;
  spec.count = 40;
  spec.rng_seed = 9;
  const SampleResult a = sample_random(cloud, spec);
  CHECK_FALSE(a.repeated);
  std::set<std::int32_t> unique(a.indices.begin(), a.indices.end());
  CHECK(unique.size() == 40);  // a permutation of 0..N-1

  const SampleResult b = sample_random(cloud, spec);
  CHECK(a.indices == b.indices);

  spec.count = 100;
  const SampleResult over = sample_random(cloud, spec);
  CHECK(over.repeated);
  CHECK(over.indices.size() == 100);

  PointCloud empty;
  CHECK_THROWS_AS(sample_random(empty, spec), std::invalid_argument);
}

TEST_CASE("sample_random is uniform across octants") {
  // 1000 points in a cube, 100 draws repeated over many seeds: per-octant
  // totals stay within 4 sigma of the binomial expectation.
  Rng rng(31);
  PointCloud cloud;
  cloud.points = random_points(1000, rng, 1.0);
  std::array<std::size_t, 8> counts{};
  std::size_t total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SampleSpec spec;
    spec.method = SamplerKind::kRandom;
    spec.count = 100;
    spec.rng_seed = seed;
    for (std::int32_t i : sample_random(cloud, spec).indices) {
      const Point3& p = cloud.points[static_cast<std::size_t>(i)];
      const std::size_t oct = (p.x > 0 ? 1 : 0) + (p.y > 0 ? 2 : 0) + (p.z > 0 ? 4 : 0);
      ++counts[oct];
      ++total;
    }
  }
  // Octant occupancy of the base cloud sets the expectation.
  std::array<double, 8> base{};
  for (const Point3& p : cloud.points) {
    ++base[(p.x > 0 ? 1 : 0) + (p.y > 0 ? 2 : 0) + (p.z > 0 ? 4 : 0)];
  }
  for (std::size_t o = 0; o < 8; ++o) {
    const double prob = base[o] / 1000.0;
    const double expectation = prob * total;
    const double sigma = std::sqrt(total * prob * (1.0 - prob));
    CHECK(std::abs(counts[o] - expectation) < 4.0 * sigma);
  }
}

TEST_CASE("sample_fps collinear hand case") {
  PointCloud cloud;
  cloud.points = {{0, 0, 0}, {1, 0, 0}, {9, 0, 0}, {10, 0, 0}};
  SampleSpec spec;
  spec.count = 2;
  const SampleResult r = sample_fps(cloud, spec);
  CHECK(r.indices == std::vector<std::int32_t>{0, 3});
}

TEST_CASE("sample_fps full selection covers every index once") {
  Rng rng(2);
  PointCloud cloud;
  cloud.points = random_points(25, rng);
  SampleSpec spec;
  spec.count = 25;
  const SampleResult r = sample_fps(cloud, spec);
  std::set<std::int32_t> unique(r.indices.begin(), r.indices.end());
  CHECK(unique.size() == 25);
  CHECK_FALSE(r.repeated);

  spec.count = 60;
  const SampleResult cyc = sample_fps(cloud, spec);
  CHECK(cyc.repeated);
  CHECK(cyc.indices.size() == 60);
  CHECK(cyc.indices[25] == cyc.indices[0]);
}

TEST_CASE("sample_fps matches brute-force reference") {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(63));
    const std::vector<Point3> pts = random_points(n, rng);
    SampleSpec spec;
    spec.count = 1 + static_cast<std::size_t>(rng.below(n));
    spec.start_index = static_cast<std::size_t>(rng.below(n));
    const SampleResult got = sample_fps(pts, spec);
    CHECK(got.indices == brute_force_fps(pts, spec.count, spec.start_index));
  }
}

TEST_CASE("sample_fps determinism and permutation covariance") {
  Rng rng(4);
  const std::vector<Point3> pts = random_points(48, rng);
  SampleSpec spec;
  spec.count = 12;
  const SampleResult a = sample_fps(pts, spec);
  const SampleResult b = sample_fps(pts, spec);
  CHECK(a.indices == b.indices);

  // Permute the points; map the start index; the selected point set matches.
  std::vector<std::size_t> perm(48);
  for (std::size_t i = 0; i < 48; ++i) perm[i] = i;
  Rng prng(5);
  prng.shuffle(perm);
  std::vector<Point3> shuffled(48);
  std::vector<std::size_t> inverse(48);
  for (std::size_t i = 0; i < 48; ++i) {
    shuffled[perm[i]] = pts[i];
    inverse[perm[i]] = i;
  }
  SampleSpec pspec = spec;
  pspec.start_index = perm[spec.start_index];
  const SampleResult c = sample_fps(shuffled, pspec);
  std::set<std::size_t> orig_set, perm_set;
  for (std::int32_t i : a.indices) orig_set.insert(static_cast<std::size_t>(i));
  for (std::int32_t i : c.indices) perm_set.insert(inverse[static_cast<std::size_t>(i)]);
  CHECK(orig_set == perm_set);
}

TEST_CASE("fps spreads better than random sampling") {
  Rng rng(6);
  std::size_t wins = 0;
  double ratio_sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Point3> pts = random_points(256, rng);
    SampleSpec fps_spec;
    fps_spec.count = 32;
    SampleSpec rs_spec;
    rs_spec.method = SamplerKind::kRandom;
    rs_spec.count = 32;
    rs_spec.rng_seed = 7000 + static_cast<std::uint64_t>(trial);
    const double fps_md = min_pairwise_distance(pts, sample_fps(pts, fps_spec).indices);
    const double rs_md = min_pairwise_distance(pts, sample_random(pts, rs_spec).indices);
    if (fps_md >= rs_md) ++wins;
    ratio_sum += fps_md / std::max(rs_md, 1e-12);
  }
  CHECK(wins >= 95);
  CHECK(ratio_sum / 100.0 > 1.5);
}

TEST_CASE("sample_feat_fps degenerate ties and clusters") {
  SampleSpec spec;
  spec.count = 3;
  const Tensor flat = Tensor::full({6, 4}, 2.5);
  const SampleResult ties = sample_feat_fps(flat, spec);
  CHECK(ties.indices == std::vector<std::int32_t>{0, 1, 2});  // lowest-index ties

  // Two descriptor clusters: second pick lands in the other cluster.
  Tensor two = Tensor::zeros({8, 2});
  for (std::size_t i = 4; i < 8; ++i) two.at2(i, 0) = 10.0;
  spec.count = 2;
  const SampleResult picks = sample_feat_fps(two, spec);
  CHECK(picks.indices[0] == 0);
  CHECK(picks.indices[1] >= 4);

  CHECK_THROWS_AS(sample_feat_fps(Tensor::zeros({4, 0}), spec), std::invalid_argument);
}

TEST_CASE("sample_feat_fps matches brute-force reference") {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(63));
    Tensor feats = Tensor::zeros({n, 5});
    for (double& v : feats.data) v = rng.uniform(-3, 3);
    SampleSpec spec;
    spec.count = 1 + static_cast<std::size_t>(rng.below(n));
    const SampleResult got = sample_feat_fps(feats, spec);
    CHECK(got.indices == brute_force_feat_fps(feats, spec.count, 0));
  }
}

TEST_CASE("knn self and hand-checkable line") {
  Rng rng(9);
  const std::vector<Point3> pts = random_points(20, rng);
  const IndexMatrix self = knn(pts, pts, 1);
  for (std::size_t i = 0; i < 20; ++i) CHECK(self.at(i, 0) == static_cast<std::int32_t>(i));

  // Five points on a line: neighbor table is hand-checkable.
  const std::vector<Point3> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {5, 0, 0}, {9, 0, 0}};
  const IndexMatrix idx = knn(line, line, 2);
  CHECK(idx.at(0, 0) == 0);
  CHECK(idx.at(0, 1) == 1);
  CHECK(idx.at(1, 0) == 1);
  CHECK(idx.at(1, 1) == 0);  // ties (0 and 2 both at distance 1) -> lower index
  CHECK(idx.at(2, 0) == 2);
  CHECK(idx.at(2, 1) == 1);
  CHECK(idx.at(3, 0) == 3);
  CHECK(idx.at(3, 1) == 2);
  CHECK(idx.at(4, 0) == 4);
  CHECK(idx.at(4, 1) == 3);
}

TEST_CASE("knn matches full-sort oracle and pads short bases") {
  Rng rng(10);
  const std::vector<Point3> query = random_points(32, rng);
  const std::vector<Point3> base = random_points(64, rng);
  const std::size_t k = 16;
  const IndexMatrix idx = knn(query, base, k);
  for (std::size_t q = 0; q < query.size(); ++q) {
    std::vector<std::pair<double, std::int32_t>> order;
    for (std::size_t i = 0; i < base.size(); ++i) {
      order.emplace_back(squared_distance(query[q], base[i]), static_cast<std::int32_t>(i));
    }
    std::sort(order.begin(), order.end());
    for (std::size_t j = 0; j < k; ++j) CHECK(idx.at(q, j) == order[j].second);
    // Rows sorted by ascending distance.
    for (std::size_t j = 1; j < k; ++j) {
      CHECK(squared_distance(query[q], base[static_cast<std::size_t>(idx.at(q, j))]) >=
            squared_distance(query[q], base[static_cast<std::size_t>(idx.at(q, j - 1))]));
    }
  }

  const std::vector<Point3> tiny = random_points(3, rng);
  const IndexMatrix padded = knn(query, tiny, 5);
  for (std::size_t q = 0; q < query.size(); ++q) {
    CHECK(padded.at(q, 3) == padded.at(q, 0));  // nearest index pads
    CHECK(padded.at(q, 4) == padded.at(q, 0));
  }
  CHECK_THROWS_AS(knn(query, std::vector<Point3>{}, 3), std::invalid_argument);
}
