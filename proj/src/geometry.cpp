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
#include "ptt/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ptt {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Rotate (x, y) counterclockwise by angle a.
inline void rotate_ccw(double a, double& x, double& y) {
  const double c = std::cos(a);
  const double s = std::sin(a);
  const double nx = c * x - s * y;
  const double ny = s * x + c * y;
  x = nx;
  y = ny;
}

using Vec2 = std::array<double, 2>;
using Quad = std::array<Vec2, 4>;

// BEV footprint corners in CCW order.
Quad bev_corners(const OrientedBox3& b) {
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  Quad local = {{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  Quad out;
  for (std::size_t i = 0; i < 4; ++i) {
    double x = local[i][0];
    double y = local[i][1];
    rotate_ccw(-b.heading, x, y);  // local -> world
    out[i] = {x + b.center.x, y + b.center.y};
  }
  return out;
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Sutherland-Hodgman clip of convex `subject` against convex CCW `clip`.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const Quad& clip) {
  std::vector<Vec2> poly = subject;
  for (std::size_t e = 0; e < 4 && !poly.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % 4];
    std::vector<Vec2> next;
    next.reserve(poly.size() + 2);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& p = poly[i];
      const Vec2& q = poly[(i + 1) % poly.size()];
      const double side_p = cross(a, b, p);
      const double side_q = cross(a, b, q);
      if (side_p >= 0.0) next.push_back(p);
      if ((side_p > 0.0 && side_q < 0.0) || (side_p < 0.0 && side_q > 0.0)) {
        const double t = side_p / (side_p - side_q);
        next.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
      }
    }
    poly = std::move(next);
  }
  return poly;
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    acc += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * std::abs(acc);
}

bool same_box(const OrientedBox3& a, const OrientedBox3& b) {
  return a.center.x == b.center.x && a.center.y == b.center.y &&
         a.center.z == b.center.z && a.w == b.w && a.h == b.h && a.l == b.l &&
         a.heading == b.heading;
}

double iou_3d_ordered(const OrientedBox3& a, const OrientedBox3& b) {
  const double zlo = std::max(a.center.z - 0.5 * a.h, b.center.z - 0.5 * b.h);
  const double zhi = std::min(a.center.z + 0.5 * a.h, b.center.z + 0.5 * b.h);
  const double dz = zhi - zlo;
  if (dz <= 0.0) return 0.0;
  const Quad qa = bev_corners(a);
  const Quad qb = bev_corners(b);
  const std::vector<Vec2> subject(qa.begin(), qa.end());
  const double inter_area = polygon_area(clip_convex(subject, qb));
  const double inter = inter_area * dz;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool box_less(const OrientedBox3& a, const OrientedBox3& b) {
  const double ka[7] = {a.center.x, a.center.y, a.center.z, a.w, a.h, a.l, a.heading};
  const double kb[7] = {b.center.x, b.center.y, b.center.z, b.w, b.h, b.l, b.heading};
  for (int i = 0; i < 7; ++i) {
    if (ka[i] < kb[i]) return true;
    if (ka[i] > kb[i]) return false;
  }
  return false;
}

}  // namespace

double Point3::norm() const { return std::sqrt(squared_norm()); }

bool Point3::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

std::span<const double> PointCloud::feature_row(std::size_t i) const {
  return {features.data() + i * feature_width, feature_width};
}

void PointCloud::append(const PointCloud& other) {
  if (feature_width != other.feature_width) {
    throw std::invalid_argument("PointCloud::append: feature width mismatch (" +
                                std::to_string(feature_width) + " vs " +
                                std::to_string(other.feature_width) + ")");
  }
  points.insert(points.end(), other.points.begin(), other.points.end());
  features.insert(features.end(), other.features.begin(), other.features.end());
}

void PointCloud::validate() const {
  if (feature_width > 0 && features.size() != points.size() * feature_width) {
    throw std::invalid_argument("PointCloud: feature row count does not match point count");
  }
  if (feature_width == 0 && !features.empty()) {
    throw std::invalid_argument("PointCloud: features present but width is zero");
  }
  for (const Point3& p : points) {
    if (!p.finite()) throw std::invalid_argument("PointCloud: non-finite coordinate");
  }
}

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

OrientedBox3 OrientedBox3::make(const Point3& center, double w, double h,
                                double l, double heading) {
  OrientedBox3 b{center, w, h, l, normalize_angle(heading)};
  if (!b.valid()) throw std::invalid_argument("OrientedBox3: invalid box");
  return b;
}

bool OrientedBox3::valid() const {
  return center.finite() && std::isfinite(heading) && w > 0.0 && h > 0.0 &&
         l > 0.0 && heading > -kPi - 1e-12 && heading <= kPi + 1e-12;
}

Point3 to_box_frame(const OrientedBox3& box, const Point3& p) {
  Point3 d = p - box.center;
  rotate_ccw(box.heading, d.x, d.y);
  return d;
}

Point3 from_box_frame(const OrientedBox3& box, const Point3& local) {
  Point3 d = local;
  rotate_ccw(-box.heading, d.x, d.y);
  return d + box.center;
}

bool box_contains(const OrientedBox3& box, const Point3& p) {
  const Point3 q = to_box_frame(box, p);
  return std::abs(q.x) <= 0.5 * box.l && std::abs(q.y) <= 0.5 * box.w &&
         std::abs(q.z) <= 0.5 * box.h;
}

PointCloud crop_to_box(const PointCloud& cloud, const OrientedBox3& box) {
  PointCloud out;
  out.feature_width = cloud.feature_width;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!box_contains(box, cloud.points[i])) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.has_features()) {
      const auto row = cloud.feature_row(i);
      out.features.insert(out.features.end(), row.begin(), row.end());
    }
  }
  return out;
}

PointCloud to_canonical_frame(const PointCloud& cloud, const OrientedBox3& box) {
  PointCloud out = cloud;
  for (Point3& p : out.points) p = to_box_frame(box, p);
  return out;
}

double iou_3d(const OrientedBox3& a, const OrientedBox3& b) {
  if (same_box(a, b)) return 1.0;
  // Canonical argument order makes the result bit-exactly symmetric.
  return box_less(b, a) ? iou_3d_ordered(b, a) : iou_3d_ordered(a, b);
}

Point3 RigidTransform2DYaw::apply(const Point3& p) const {
  Point3 q = p;
  rotate_ccw(-yaw, q.x, q.y);
  return {q.x + dx, q.y + dy, q.z + dz};
}

OrientedBox3 RigidTransform2DYaw::apply(const OrientedBox3& box) const {
  return OrientedBox3::make(apply(box.center), box.w, box.h, box.l,
                            box.heading + yaw);
}

PointCloud RigidTransform2DYaw::apply(const PointCloud& cloud) const {
  PointCloud out = cloud;
  for (Point3& p : out.points) p = apply(p);
  return out;
}

RigidTransform2DYaw RigidTransform2DYaw::inverse() const {
  Point3 t{-dx, -dy, -dz};
  rotate_ccw(yaw, t.x, t.y);
  return {t.x, t.y, t.z, -yaw};
}

RigidTransform2DYaw RigidTransform2DYaw::then(const RigidTransform2DYaw& other) const {
  Point3 t{dx, dy, dz};
  rotate_ccw(-other.yaw, t.x, t.y);
  return {t.x + other.dx, t.y + other.dy, t.z + other.dz, yaw + other.yaw};
}

RigidTransform2DYaw RigidTransform2DYaw::world_to_box(const OrientedBox3& box) {
  Point3 t = box.center * -1.0;
  rotate_ccw(box.heading, t.x, t.y);
  return {t.x, t.y, t.z, -box.heading};
}

}  // namespace ptt
