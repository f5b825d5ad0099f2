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
#ifndef PTT_GEOMETRY_HPP
#define PTT_GEOMETRY_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace ptt {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
  double squared_norm() const { return dot(*this); }
  double norm() const;
  bool finite() const;
};

double squared_distance(const Point3& a, const Point3& b);

/// Point set with an optional per-point feature row of fixed width.
struct PointCloud {
  std::vector<Point3> points;
  std::size_t feature_width = 0;     // 0 means "no features"
  std::vector<double> features;      // row-major, points.size() x feature_width

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_features() const { return feature_width > 0; }
  std::span<const double> feature_row(std::size_t i) const;
  void append(const PointCloud& other);  // widths must agree
  void validate() const;                 // throws std::invalid_argument
};

/// Maps any angle to the canonical interval (-pi, pi].
double normalize_angle(double a);

/// Yaw-oriented box. `l` extends along the box local x axis, `w` along local
/// y, `h` along the vertical z axis. `heading` is the yaw of the local x axis,
/// measured clockwise from world +x (world->local is a CCW rotation by
/// +heading), normalized to (-pi, pi].
struct OrientedBox3 {
  Point3 center;
  double w = 1.0;
  double h = 1.0;
  double l = 1.0;
  double heading = 0.0;

  static OrientedBox3 make(const Point3& center, double w, double h, double l,
                           double heading);

  double volume() const { return w * h * l; }
  bool valid() const;
};

Point3 to_box_frame(const OrientedBox3& box, const Point3& p);
Point3 from_box_frame(const OrientedBox3& box, const Point3& local);

/// Boundary-inclusive membership test in the box frame.
bool box_contains(const OrientedBox3& box, const Point3& p);

/// Points (and their feature rows) inside the box, input order preserved.
PointCloud crop_to_box(const PointCloud& cloud, const OrientedBox3& box);

/// Maps every point into the box frame; the box itself maps to an
/// origin-centered, heading-zero box.
PointCloud to_canonical_frame(const PointCloud& cloud, const OrientedBox3& box);

/// Exact volumetric IoU: ground-plane convex polygon clipping of the two
/// yaw-rotated footprints times the vertical extent overlap.
double iou_3d(const OrientedBox3& a, const OrientedBox3& b);

/// Translation plus yaw about the vertical axis. apply() rotates with the
/// same handedness as OrientedBox3::heading, so transforming a box is
/// {apply(center), heading + yaw}.
struct RigidTransform2DYaw {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double yaw = 0.0;

  Point3 apply(const Point3& p) const;
  OrientedBox3 apply(const OrientedBox3& box) const;
  PointCloud apply(const PointCloud& cloud) const;
  RigidTransform2DYaw inverse() const;
  /// Composition: result.apply(p) == other.apply(this->apply(p)).
  RigidTransform2DYaw then(const RigidTransform2DYaw& other) const;

  /// Transform mapping world coordinates into the box frame
  /// (apply(box.center) == origin, heading maps to 0).
  static RigidTransform2DYaw world_to_box(const OrientedBox3& box);
};

}  // namespace ptt

#endif  // PTT_GEOMETRY_HPP
