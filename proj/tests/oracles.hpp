#pragma once

// Independent reference implementations used only by tests. Everything here
// is deliberately brute-force so it cannot share a failure mode with the
// library's indexed/closed-form paths.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "scenefit/geometry.hpp"
#include "scenefit/kdtree.hpp"
#include "scenefit/random.hpp"

namespace oracles {

using scenefit::PointCloud;
using scenefit::Vec2;
using scenefit::Vec3;

/// Linear-scan nearest neighbor; first of equal distances wins (lowest index).
template <typename PointVec>
scenefit::Neighbor linear_nearest(const PointVec& cloud,
                                  const typename PointVec::value_type& q) {
  scenefit::Neighbor best;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d2 = (cloud[i] - q).squaredNorm();
    if (d2 < best.dist_sq) {  // strict <: first of equals keeps the lowest index
      best.dist_sq = d2;
      best.index = static_cast<std::uint32_t>(i);
    }
  }
  return best;
}

/// O(n*m) double-loop Chamfer distance (squared distances, both directions).
template <typename PointVec>
double brute_chamfer(const PointVec& a, const PointVec& b) {
  double fwd = 0.0;
  for (const auto& p : a) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& q : b) m = std::min(m, (p - q).squaredNorm());
    fwd += m;
  }
  double bwd = 0.0;
  for (const auto& q : b) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : a) m = std::min(m, (q - p).squaredNorm());
    bwd += m;
  }
  return fwd / static_cast<double>(a.size()) + bwd / static_cast<double>(b.size());
}

/// Brute-force precision/recall F-score on the 0-100 scale.
template <typename PointVec>
double brute_f_score(const PointVec& pred, const PointVec& gt, double threshold) {
  const double t2 = threshold * threshold;
  std::size_t ph = 0;
  for (const auto& p : pred) {
    for (const auto& q : gt) {
      if ((p - q).squaredNorm() <= t2) {
        ++ph;
        break;
      }
    }
  }
  std::size_t gh = 0;
  for (const auto& q : gt) {
    for (const auto& p : pred) {
      if ((q - p).squaredNorm() <= t2) {
        ++gh;
        break;
      }
    }
  }
  const double precision = double(ph) / double(pred.size());
  const double recall = double(gh) / double(gt.size());
  if (precision + recall <= 0.0) return 0.0;
  return 200.0 * precision * recall / (precision + recall);
}

/// Rotation angle between two matrices via quaternion conversion,
/// independent of the trace formula.
inline double quaternion_geodesic(const scenefit::Mat3& a, const scenefit::Mat3& b) {
  const Eigen::Quaterniond qa(a);
  const Eigen::Quaterniond qb(b);
  const double dot = std::min(1.0, std::abs(qa.dot(qb)));
  return 2.0 * std::acos(dot);
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo = 0.0,
                               double hi = 1.0) {
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.points.emplace_back(scenefit::uniform_range(rng, lo, hi),
                          scenefit::uniform_range(rng, lo, hi),
                          scenefit::uniform_range(rng, lo, hi));
  return c;
}

inline std::vector<Vec2> random_cloud_2d(std::mt19937_64& rng, std::size_t n, double lo = 0.0,
                                         double hi = 1.0) {
  std::vector<Vec2> c;
  c.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.emplace_back(scenefit::uniform_range(rng, lo, hi), scenefit::uniform_range(rng, lo, hi));
  return c;
}

inline scenefit::EulerRotation random_rotation(std::mt19937_64& rng) {
  const double pi = 3.14159265358979323846;
  return {scenefit::uniform_range(rng, -pi, pi), scenefit::uniform_range(rng, -pi, pi),
          scenefit::uniform_range(rng, -pi, pi)};
}

}  // namespace oracles
