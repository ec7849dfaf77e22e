#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "pcw/common.hpp"

namespace pcw {

/// Exact nearest-neighbor kd-tree over a fixed (N, 3) cloud.
///
/// Tie policy: among points at equal distance, the lowest point index wins.
/// The far half-space is pruned only when its plane distance is strictly
/// worse than the incumbent, so equal-distance candidates are always visited.
template <class S>
class KdTree {
 public:
  struct Result {
    int index;
    S dist2;
  };

  explicit KdTree(const Points3<S>& points) : points_(points) {
    if (points_.rows() == 0) throw EmptyCloud("KdTree: empty input");
    order_.resize(static_cast<std::size_t>(points_.rows()));
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(order_.size() / kLeafSize * 2 + 2);
    root_ = build(0, static_cast<int>(order_.size()));
  }

  Result nearest(const Vec3<S>& query) const {
    Result best{-1, std::numeric_limits<S>::max()};
    search(root_, query, best);
    return best;
  }

  const Points3<S>& points() const { return points_; }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    int axis = -1;  // -1 marks a leaf
    S split = S(0);
    int left = -1, right = -1;
    int begin = 0, end = 0;  // order_ range for leaves
  };

  int build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      // Ascending indices inside a leaf make the lowest-index tie rule a
      // plain first-strictly-better scan.
      std::sort(order_.begin() + begin, order_.begin() + end);
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    Vec3<S> lo = points_.row(order_[static_cast<std::size_t>(begin)]).transpose();
    Vec3<S> hi = lo;
    for (int k = begin + 1; k < end; ++k) {
      const Vec3<S> p = points_.row(order_[static_cast<std::size_t>(k)]).transpose();
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       const S pa = points_(a, axis), pb = points_(b, axis);
                       return pa < pb || (pa == pb && a < b);
                     });
    node.axis = axis;
    node.split = points_(order_[static_cast<std::size_t>(mid)], axis);
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  void search(int node_id, const Vec3<S>& q, Result& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (int k = node.begin; k < node.end; ++k) {
        const int idx = order_[static_cast<std::size_t>(k)];
        const S d2 = (points_.row(idx).transpose() - q).squaredNorm();
        if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) best = {idx, d2};
      }
      return;
    }
    const S delta = q[node.axis] - node.split;
    const int near = delta < S(0) ? node.left : node.right;
    const int far = delta < S(0) ? node.right : node.left;
    search(near, q, best);
    if (delta * delta <= best.dist2) search(far, q, best);
  }

  Points3<S> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace pcw
