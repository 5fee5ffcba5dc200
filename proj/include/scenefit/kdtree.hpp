#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "scenefit/error.hpp"

namespace scenefit {

/// Result of a nearest-neighbor query: index into the indexed cloud's
/// original point order plus the squared Euclidean distance.
struct Neighbor {
  std::uint32_t index = std::numeric_limits<std::uint32_t>::max();
  double dist_sq = std::numeric_limits<double>::infinity();
};

/// Exact nearest-neighbor index over a fixed point set. Queries return the
/// point minimizing squared Euclidean distance, ties broken by lowest point
/// index, so results are identical to a linear scan. Read-only after build
/// and safe for concurrent queries. rebuild() reuses buffers so the 2D term
/// of the layout loss can re-index moving projections without allocating.
template <int Dim>
class KdTree {
public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  KdTree() = default;

  explicit KdTree(const std::vector<Point>& points) { rebuild(points); }

  void rebuild(const std::vector<Point>& points) {
    require(!points.empty(), "empty cloud");
    const std::uint32_t n = static_cast<std::uint32_t>(points.size());
    index_.resize(n);
    std::iota(index_.begin(), index_.end(), 0u);
    scratch_ = &points;
    nodes_.clear();
    nodes_.reserve(2 * n / kLeafSize + 2);
    build_node(0, n);
    // Reorder points so every leaf scans a contiguous range.
    pts_.resize(n);
    for (std::uint32_t slot = 0; slot < n; ++slot) pts_[slot] = points[index_[slot]];
    scratch_ = nullptr;
  }

  std::size_t size() const { return pts_.size(); }

  Neighbor nearest(const Point& q) const {
    Neighbor best;
    search(0, q, best);
    return best;
  }

  /// Warm-started query: `hint` names a point of the indexed cloud believed
  /// to be close to q (e.g. last iteration's correspondence). Its distance is
  /// recomputed here, so a stale hint only costs pruning power, never
  /// correctness. Out-of-range hints fall back to a cold query.
  Neighbor nearest(const Point& q, std::uint32_t hint) const {
    Neighbor best;
    if (hint < pts_.size()) {
      best.index = hint;
      best.dist_sq = (pts_[slot_of_[hint]] - q).squaredNorm();
    }
    search(0, q, best);
    return best;
  }

  const Point& point(std::uint32_t original_index) const {
    return pts_[slot_of_[original_index]];
  }

private:
  static constexpr std::uint32_t kLeafSize = 32;

  struct Node {
    double split = 0.0;
    std::int32_t axis = -1;  // -1 marks a leaf
    std::uint32_t lo = 0;    // leaf: slot range begin; internal: left child
    std::uint32_t hi = 0;    // leaf: slot range end; internal: right child
  };

  std::uint32_t build_node(std::uint32_t begin, std::uint32_t end) {
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{});
    if (end - begin <= kLeafSize) {
      nodes_[id].axis = -1;
      nodes_[id].lo = begin;
      nodes_[id].hi = end;
      if (slot_of_.size() < scratch_->size()) slot_of_.resize(scratch_->size());
      for (std::uint32_t s = begin; s < end; ++s) slot_of_[index_[s]] = s;
      return id;
    }
    Point lo = (*scratch_)[index_[begin]];
    Point hi = lo;
    for (std::uint32_t s = begin + 1; s < end; ++s) {
      lo = lo.cwiseMin((*scratch_)[index_[s]]);
      hi = hi.cwiseMax((*scratch_)[index_[s]]);
    }
    std::int32_t axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return (*scratch_)[a][axis] < (*scratch_)[b][axis];
                     });
    const double split = (*scratch_)[index_[mid]][axis];
    const std::uint32_t left = build_node(begin, mid);
    const std::uint32_t right = build_node(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].lo = left;
    nodes_[id].hi = right;
    return id;
  }

  void search(std::uint32_t node_id, const Point& q, Neighbor& best) const {
    const Node& nd = nodes_[node_id];
    if (nd.axis < 0) {
      for (std::uint32_t s = nd.lo; s < nd.hi; ++s) {
        const double d2 = (pts_[s] - q).squaredNorm();
        const std::uint32_t oi = index_[s];
        if (d2 < best.dist_sq || (d2 == best.dist_sq && oi < best.index)) {
          best.dist_sq = d2;
          best.index = oi;
        }
      }
      return;
    }
    const double delta = q[nd.axis] - nd.split;
    const std::uint32_t near = delta < 0.0 ? nd.lo : nd.hi;
    const std::uint32_t far = delta < 0.0 ? nd.hi : nd.lo;
    search(near, q, best);
    // <= so an equal-distance, lower-index point across the plane still wins.
    if (delta * delta <= best.dist_sq) search(far, q, best);
  }

  std::vector<Point> pts_;               // points in partitioned (slot) order
  std::vector<std::uint32_t> index_;     // slot -> original index
  std::vector<std::uint32_t> slot_of_;   // original index -> slot
  std::vector<Node> nodes_;
  const std::vector<Point>* scratch_ = nullptr;  // build-time input
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

}  // namespace scenefit
