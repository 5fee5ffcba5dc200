#pragma once

#include <cstddef>
#include <vector>

#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/kdtree.hpp"

namespace scenefit {

namespace detail {

template <int Dim>
double mean_nearest_sq(const std::vector<Eigen::Matrix<double, Dim, 1>>& from,
                       const KdTree<Dim>& to) {
  double sum = 0.0;
  for (const auto& p : from) sum += to.nearest(p).dist_sq;
  return sum / static_cast<double>(from.size());
}

}  // namespace detail

/// Bidirectional Chamfer distance: mean squared distance to the nearest
/// neighbor, taken in both directions and summed. Symmetric, zero iff each
/// cloud's points all coincide with points of the other.
template <int Dim>
double chamfer_distance(const std::vector<Eigen::Matrix<double, Dim, 1>>& a,
                        const std::vector<Eigen::Matrix<double, Dim, 1>>& b) {
  require(!a.empty() && !b.empty(), "empty cloud");
  const KdTree<Dim> tree_a(a);
  const KdTree<Dim> tree_b(b);
  return detail::mean_nearest_sq<Dim>(a, tree_b) + detail::mean_nearest_sq<Dim>(b, tree_a);
}

inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  return chamfer_distance<3>(a.points, b.points);
}

/// F-score on the 0-100 scale at a Euclidean distance threshold: harmonic
/// mean of precision (pred points within `threshold` of gt) and recall
/// (the reverse). Returns 0 when both are 0.
template <int Dim>
double f_score(const std::vector<Eigen::Matrix<double, Dim, 1>>& pred,
               const std::vector<Eigen::Matrix<double, Dim, 1>>& gt, double threshold) {
  require(!pred.empty() && !gt.empty(), "empty cloud");
  require(threshold > 0.0, "non-positive threshold");
  const double thr_sq = threshold * threshold;
  const KdTree<Dim> tree_pred(pred);
  const KdTree<Dim> tree_gt(gt);
  std::size_t pred_hits = 0;
  for (const auto& p : pred)
    if (tree_gt.nearest(p).dist_sq <= thr_sq) ++pred_hits;
  std::size_t gt_hits = 0;
  for (const auto& p : gt)
    if (tree_pred.nearest(p).dist_sq <= thr_sq) ++gt_hits;
  const double precision = static_cast<double>(pred_hits) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(gt_hits) / static_cast<double>(gt.size());
  if (precision + recall <= 0.0) return 0.0;
  return 200.0 * precision * recall / (precision + recall);
}

inline double f_score(const PointCloud& pred, const PointCloud& gt, double threshold) {
  return f_score<3>(pred.points, gt.points, threshold);
}

}  // namespace scenefit
