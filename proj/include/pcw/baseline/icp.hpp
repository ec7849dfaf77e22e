#pragma once

#include <optional>
#include <vector>

#include "pcw/common.hpp"
#include "pcw/geometry.hpp"
#include "pcw/kdtree.hpp"

namespace pcw {

template <class S>
struct IcpParams {
  S max_correspondence_distance = S(0.175);  // meters
  int max_iterations = 50;
  S convergence_eps = S(1e-6);  // relative RMSE change

  void validate() const {
    if (!(max_correspondence_distance > S(0)) || max_iterations <= 0 ||
        !(convergence_eps > S(0)))
      throw BadSizeParams("IcpParams: all fields must be positive");
  }
};

template <class S>
struct IcpResult {
  Pose<S> pose;  // maps src into the tgt frame
  S rmse = S(0);
  int iterations = 0;
  std::vector<S> rmse_history;  // correspondence RMSE per iteration
};

namespace detail {

/// Least-squares rigid alignment of paired points (Kabsch / Umeyama without
/// scale). Reflection-corrected so the result is always a proper rotation.
template <class S>
Pose<S> kabsch(const Points3<S>& src, const Points3<S>& tgt) {
  const Eigen::Matrix<S, 1, 3> mu_s = src.colwise().mean();
  const Eigen::Matrix<S, 1, 3> mu_t = tgt.colwise().mean();
  const Mat3<S> h = (src.rowwise() - mu_s).transpose() * (tgt.rowwise() - mu_t);
  Eigen::JacobiSVD<Mat3<S>> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Two near-zero singular values mean the pairs are collinear or coincident:
  // the in-plane rotation component is unobservable.
  if (!(sv[1] > S(1e-12) * std::max(sv[0], S(1e-30))))
    throw DegenerateAlignment("kabsch: correspondence covariance is rank-deficient");
  Mat3<S> r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < S(0)) {
    Mat3<S> flip = Mat3<S>::Identity();
    flip(2, 2) = S(-1);
    r = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  Pose<S> pose;
  pose.R = r;
  pose.t = (mu_t.transpose() - r * mu_s.transpose());
  return pose;
}

}  // namespace detail

/// Point-to-point ICP. Correspondences are nearest neighbors within
/// `max_correspondence_distance`; each iteration solves the closed-form rigid
/// alignment for the matched pairs and composes it onto the running pose.
/// Stops when the relative RMSE change drops below `convergence_eps`.
template <class S>
IcpResult<S> icp_point_to_point(const Points3<S>& src, const Points3<S>& tgt,
                                const Pose<S>& init, const IcpParams<S>& params) {
  params.validate();
  if (src.rows() < 3 || tgt.rows() < 3)
    throw NoCorrespondences("icp_point_to_point: need at least 3 points per cloud");
  const KdTree<S> tree(tgt);
  const S max_dist2 = params.max_correspondence_distance * params.max_correspondence_distance;

  IcpResult<S> result;
  result.pose = init;
  S prev_rmse = std::numeric_limits<S>::max();
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    const Points3<S> moved = result.pose.apply(src);
    std::vector<int> src_idx, tgt_idx;
    S sq_sum = S(0);
    for (Eigen::Index i = 0; i < moved.rows(); ++i) {
      const auto hit = tree.nearest(moved.row(i).transpose());
      if (hit.dist2 > max_dist2) continue;
      src_idx.push_back(static_cast<int>(i));
      tgt_idx.push_back(hit.index);
      sq_sum += hit.dist2;
    }
    if (src_idx.empty())
      throw NoCorrespondences("icp_point_to_point: no pairs within threshold");

    const S rmse = std::sqrt(sq_sum / S(src_idx.size()));
    result.rmse = rmse;
    result.rmse_history.push_back(rmse);
    result.iterations = iter + 1;
    if (rmse < S(1e-12) ||
        std::abs(prev_rmse - rmse) < params.convergence_eps * std::max(prev_rmse, S(1e-12)))
      break;
    prev_rmse = rmse;

    Points3<S> a(static_cast<Eigen::Index>(src_idx.size()), 3);
    Points3<S> b(static_cast<Eigen::Index>(src_idx.size()), 3);
    for (std::size_t k = 0; k < src_idx.size(); ++k) {
      a.row(static_cast<Eigen::Index>(k)) = moved.row(src_idx[k]);
      b.row(static_cast<Eigen::Index>(k)) = tgt.row(tgt_idx[k]);
    }
    const Pose<S> delta = detail::kabsch(a, b);
    result.pose = delta * result.pose;
  }
  return result;
}

/// Per-view poses into the reference frame of the middle view, built by
/// chaining consecutive-frame ICP outward from index (M-1)/2. A link that
/// fails (no correspondences / degenerate) leaves every view beyond it
/// unaligned (nullopt); the reference itself is always identity.
template <class S>
struct AccumulatedPoses {
  std::vector<std::optional<Pose<S>>> poses;
  std::size_t reference = 0;
};

template <class S>
AccumulatedPoses<S> accumulate_poses(const std::vector<Points3<S>>& views,
                                     const IcpParams<S>& params) {
  if (views.empty()) throw EmptyCloud("accumulate_poses: no views");
  const std::size_t m = views.size();
  const std::size_t ref = (m - 1) / 2;
  AccumulatedPoses<S> out;
  out.reference = ref;
  out.poses.assign(m, std::nullopt);
  out.poses[ref] = Pose<S>{};

  // Forward chain ref -> m-1: pose_{i} = pose_{i-1} * T(view_i -> view_{i-1}).
  for (std::size_t i = ref + 1; i < m && out.poses[i - 1]; ++i) {
    try {
      const auto link = icp_point_to_point(views[i], views[i - 1], Pose<S>{}, params);
      out.poses[i] = *out.poses[i - 1] * link.pose;
    } catch (const NoCorrespondences&) {
      break;
    } catch (const DegenerateAlignment&) {
      break;
    }
  }
  // Backward chain ref -> 0.
  for (std::size_t i = ref; i > 0 && out.poses[i]; --i) {
    try {
      const auto link = icp_point_to_point(views[i - 1], views[i], Pose<S>{}, params);
      out.poses[i - 1] = *out.poses[i] * link.pose;
    } catch (const NoCorrespondences&) {
      break;
    } catch (const DegenerateAlignment&) {
      break;
    }
  }
  return out;
}

/// Concatenates every view transformed by its pose (all into one frame).
template <class S>
Points3<S> fuse_clouds(const std::vector<Points3<S>>& views,
                       const std::vector<Pose<S>>& poses) {
  if (views.size() != poses.size())
    throw BadSizeParams("fuse_clouds: views/poses size mismatch");
  Eigen::Index total = 0;
  for (const auto& v : views) total += v.rows();
  Points3<S> fused(total, 3);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    fused.middleRows(at, views[i].rows()) = poses[i].apply(views[i]);
    at += views[i].rows();
  }
  return fused;
}

}  // namespace pcw
