#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"

namespace scenefit {

/// Pinhole camera with one shared focal length (square pixels). Pixel (u, v)
/// sits at integer coordinates (column, row), origin top-left; estimation
/// fixes the principal point to the image center.
struct PinholeIntrinsics {
  double focal = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  static PinholeIntrinsics centered(double focal, int width, int height) {
    return PinholeIntrinsics{focal, width / 2.0, height / 2.0, width, height};
  }
};

inline void require_intrinsics(const PinholeIntrinsics& cam) {
  require(cam.focal > 0.0, "non-positive focal length");
  require(cam.width > 0 && cam.height > 0, "non-positive image size");
}

/// Row-major grid of depth (z) values with a per-pixel validity flag.
/// Valid depths are finite and > 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // width * height, row-major
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

/// Row-major grid of 3D points with per-pixel validity; valid entries are
/// finite with z > 0 (in front of the camera). Its z channel is a depth map.
struct Pointmap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> valid;

  Pointmap() = default;
  Pointmap(int w, int h)
      : width(w), height(h), points(static_cast<std::size_t>(w) * h, Vec3::Zero()),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (std::uint8_t f : valid) n += f;
    return n;
  }
};

inline Vec2 project_point(const Vec3& p, const PinholeIntrinsics& cam) {
  return Vec2(cam.focal * p.x() / p.z() + cam.cx, cam.focal * p.y() / p.z() + cam.cy);
}

/// Projects every point to pixel coordinates, preserving order. Points are
/// not clipped to the image rectangle: the 2D loss needs off-screen
/// gradients. Any z <= 0 is an error naming the offending index.
inline PointCloud2 project(const PointCloud& cloud, const PinholeIntrinsics& cam) {
  require_intrinsics(cam);
  PointCloud2 out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    require(p.z() > 0.0, "point behind camera at index " + std::to_string(i));
    out.push_back(project_point(p, cam));
  }
  return out;
}

/// Back-projects valid depths through the pinhole model:
/// (u, v, d) -> ((u - cx) * d / f, (v - cy) * d / f, d).
inline Pointmap backproject_depth(const DepthMap& depth, const PinholeIntrinsics& cam) {
  require_intrinsics(cam);
  require(depth.width == cam.width && depth.height == cam.height,
          "depth map dimensions do not match intrinsics");
  Pointmap pm(depth.width, depth.height);
  const double inv_f = 1.0 / cam.focal;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const std::size_t i = depth.idx(u, v);
      if (!depth.valid[i]) continue;
      const double d = depth.values[i];
      pm.points[i] = Vec3((u - cam.cx) * d * inv_f, (v - cam.cy) * d * inv_f, d);
      pm.valid[i] = 1;
    }
  }
  return pm;
}

/// Closed-form least-squares focal length from a pointmap, with the
/// principal point fixed to the image center:
///   f* = sum[(u-cx) x/z + (v-cy) y/z] / sum[(x/z)^2 + (y/z)^2].
/// This is the exact minimizer of the reprojection error
/// sum || (u-cx, v-cy) - f (x/z, y/z) ||^2 over valid pixels.
inline PinholeIntrinsics estimate_focal(const Pointmap& pm) {
  require(pm.width > 0 && pm.height > 0, "empty pointmap");
  const double cx = pm.width / 2.0;
  const double cy = pm.height / 2.0;
  double num = 0.0;
  double den = 0.0;
  for (int v = 0; v < pm.height; ++v) {
    for (int u = 0; u < pm.width; ++u) {
      const std::size_t i = pm.idx(u, v);
      if (!pm.valid[i]) continue;
      const Vec3& p = pm.points[i];
      require(p.z() > 0.0, "pointmap entry behind camera");
      const double xz = p.x() / p.z();
      const double yz = p.y() / p.z();
      num += (u - cx) * xz + (v - cy) * yz;
      den += xz * xz + yz * yz;
    }
  }
  require(den > 1e-12, "degenerate pointmap");
  PinholeIntrinsics cam = PinholeIntrinsics::centered(num / den, pm.width, pm.height);
  require(cam.focal > 0.0, "degenerate pointmap");
  return cam;
}

/// Valid pixels in row-major order become the cloud's points.
inline PointCloud pointmap_to_cloud(const Pointmap& pm) {
  PointCloud out;
  out.points.reserve(pm.valid_count());
  for (std::size_t i = 0; i < pm.points.size(); ++i)
    if (pm.valid[i]) out.points.push_back(pm.points[i]);
  require(!out.empty(), "pointmap has no valid pixels");
  return out;
}

}  // namespace scenefit
