#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <utility>
#include <vector>

#include "scenefit/error.hpp"

namespace scenefit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered list of 3D points in scene units. The universal currency between
/// extraction, selection and optimization; ops that consume one require it
/// to be non-empty and finite.
struct PointCloud {
  std::vector<Vec3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

using PointCloud2 = std::vector<Vec2>;

inline bool is_finite(const Vec3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

inline void require_cloud(const PointCloud& cloud) {
  require(!cloud.empty(), "empty cloud");
}

inline Vec3 centroid(const PointCloud& cloud) {
  require_cloud(cloud);
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.size());
}

/// Axis-aligned bounding box, min <= max componentwise.
struct Aabb {
  // Empty box: any expand() makes it the singleton of that point.
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  Vec3 extent() const { return max - min; }
  double max_extent() const { return extent().maxCoeff(); }
  double diagonal() const { return extent().norm(); }
  Vec3 center() const { return 0.5 * (min + max); }

  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
};

inline Aabb bounds(const PointCloud& cloud) {
  require_cloud(cloud);
  Aabb box{cloud.points.front(), cloud.points.front()};
  for (const Vec3& p : cloud.points) box.expand(p);
  return box;
}

/// Euler angles in radians. Applied X-then-Y-then-Z, i.e. the composed
/// matrix is Rz(rz) * Ry(ry) * Rx(rx). No range restriction; the optimizer
/// is free to leave [-pi, pi].
struct EulerRotation {
  double rx = 0.0;
  double ry = 0.0;
  double rz = 0.0;
};

inline Mat3 rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

inline Mat3 rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

inline Mat3 rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

inline Mat3 rotation_matrix(const EulerRotation& r) {
  return rotation_z(r.rz) * rotation_y(r.ry) * rotation_x(r.rx);
}

// Derivatives of the single-axis factors; the optimizer chains them into
// dR/drx = Rz * Ry * dRx etc.
inline Mat3 rotation_x_deriv(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

inline Mat3 rotation_y_deriv(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

inline Mat3 rotation_z_deriv(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

/// Extract Euler angles (rx, ry, rz) with R = Rz * Ry * Rx. At the gimbal
/// singularity (|r20| = 1) rz is fixed to 0 and the remaining freedom goes
/// into rx.
inline EulerRotation euler_from_matrix(const Mat3& m) {
  EulerRotation out;
  const double sy = -m(2, 0);
  const double cy = std::sqrt(m(2, 1) * m(2, 1) + m(2, 2) * m(2, 2));
  out.ry = std::atan2(sy, cy);
  if (cy > 1e-12) {
    out.rx = std::atan2(m(2, 1), m(2, 2));
    out.rz = std::atan2(m(1, 0), m(0, 0));
  } else {
    out.rx = std::atan2(-m(1, 2), m(1, 1));
    out.rz = 0.0;
  }
  return out;
}

/// Per-instance layout: translation, Euler rotation and isotropic scale.
/// Maps a canonical model point p to s * R(r) * p + t.
struct LayoutParams {
  Vec3 t = Vec3::Zero();
  EulerRotation r;
  double s = 1.0;
};

inline PointCloud apply_transform(const PointCloud& cloud, const LayoutParams& params) {
  require(params.s > 0.0, "non-positive scale");
  const Mat3 rot = rotation_matrix(params.r);
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(params.s * (rot * p) + params.t);
  return out;
}

/// Inverse of apply_transform: p -> R^T * ((p - t) / s).
inline PointCloud apply_inverse_transform(const PointCloud& cloud, const LayoutParams& params) {
  require(params.s > 0.0, "non-positive scale");
  const Mat3 rot_t = rotation_matrix(params.r).transpose();
  const double inv_s = 1.0 / params.s;
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(rot_t * ((p - params.t) * inv_s));
  return out;
}

/// Geodesic distance on SO(3): arccos((trace(Ra^T Rb) - 1) / 2), in [0, pi].
inline double rotation_geodesic_error(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) * 0.5;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline double rotation_geodesic_error(const EulerRotation& a, const EulerRotation& b) {
  return rotation_geodesic_error(rotation_matrix(a), rotation_matrix(b));
}

/// Centroid and scale divisor that map a cloud to its normalized frame;
/// keeps normalize_cloud invertible.
struct NormalizationRecord {
  Vec3 centroid = Vec3::Zero();
  double divisor = 1.0;
};

/// Center at the centroid and scale so the largest bounding-box extent is 1.
/// Aspect ratios are preserved, which the selection metric relies on.
inline std::pair<PointCloud, NormalizationRecord> normalize_cloud(const PointCloud& cloud) {
  require_cloud(cloud);
  const Vec3 c = centroid(cloud);
  const double extent = bounds(cloud).max_extent();
  require(extent > 0.0, "zero extent");
  PointCloud out;
  out.points.reserve(cloud.size());
  const double inv = 1.0 / extent;
  for (const Vec3& p : cloud.points) out.points.push_back((p - c) * inv);
  return {std::move(out), NormalizationRecord{c, extent}};
}

inline PointCloud denormalize_cloud(const PointCloud& cloud, const NormalizationRecord& record) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(p * record.divisor + record.centroid);
  return out;
}

}  // namespace scenefit
