#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "pcw/common.hpp"
#include "pcw/kdtree.hpp"
#include "pcw/projection.hpp"

namespace pcw {

/// One-directional chamfer distance: mean over source points of the L2 (not
/// squared) distance to the nearest target point. Gradients are returned for
/// both clouds; for a source row with nearest target y, the pair contributes
/// (x - y)/(|x - y| |src|) to the source row and the negative to the target
/// row. Pairs closer than 1e-12 contribute zero gradient (subgradient choice).
template <class S>
struct DirectedChamfer {
  S value = S(0);
  Points3<S> grad_source;
  Points3<S> grad_target;
  std::vector<int> nn_index;  // per source row, index of its nearest target
};

template <class S>
DirectedChamfer<S> directed_chamfer(const Points3<S>& source, const Points3<S>& target,
                                    const KdTree<S>* target_tree = nullptr) {
  if (source.rows() == 0) throw EmptyCloud("directed_chamfer: empty source");
  if (target.rows() == 0) throw EmptyCloud("directed_chamfer: empty target");
  std::optional<KdTree<S>> local;
  if (!target_tree) local.emplace(target);
  const KdTree<S>& tree = target_tree ? *target_tree : *local;

  DirectedChamfer<S> out;
  out.grad_source = Points3<S>::Zero(source.rows(), 3);
  out.grad_target = Points3<S>::Zero(target.rows(), 3);
  out.nn_index.resize(static_cast<std::size_t>(source.rows()));
  const S inv_n = S(1) / static_cast<S>(source.rows());
  for (Eigen::Index i = 0; i < source.rows(); ++i) {
    const Vec3<S> x = source.row(i).transpose();
    const auto nn = tree.nearest(x);
    out.nn_index[static_cast<std::size_t>(i)] = nn.index;
    const S dist = std::sqrt(nn.dist2);
    out.value += dist * inv_n;
    if (dist >= S(1e-12)) {
      const Vec3<S> dir = (x - target.row(nn.index).transpose()) / dist * inv_n;
      out.grad_source.row(i) += dir.transpose();
      out.grad_target.row(nn.index) -= dir.transpose();
    }
  }
  return out;
}

/// Symmetric chamfer metric: precision (pred -> gt) + coverage (gt -> pred).
template <class S>
struct SymmetricChamfer {
  S cd;
  S precision;
  S coverage;
};

template <class S>
SymmetricChamfer<S> chamfer_symmetric(const Points3<S>& pred, const Points3<S>& gt) {
  const DirectedChamfer<S> p = directed_chamfer(pred, gt);
  const DirectedChamfer<S> c = directed_chamfer(gt, pred);
  return {p.value + c.value, p.value, c.value};
}

/// Observation-to-shape loss: pulls the posed prediction toward every scan
/// point. Returns the gradient with respect to the posed prediction.
template <class S>
struct ObsToShape {
  S value;
  Points3<S> grad_shape;
  std::vector<int> nn_index;
};

template <class S>
ObsToShape<S> chamfer_obs_to_shape(const Points3<S>& observation, const Points3<S>& shape) {
  DirectedChamfer<S> d = directed_chamfer(observation, shape);
  return {d.value, std::move(d.grad_target), std::move(d.nn_index)};
}

/// Shape-to-observation loss through the depth buffer: only points surviving
/// the visibility selection are compared (and receive gradient). Selection is
/// treated as constant; gradients flow through the selected coordinates only.
template <class S>
struct SurfaceToObs {
  S value;
  Points3<S> grad_shape;  // zero outside selected rows
  std::vector<int> selected;
  std::vector<int> nn_index;  // per selected row
};

template <class S>
SurfaceToObs<S> chamfer_surface_to_obs(const Points3<S>& shape, const Points3<S>& observation,
                                       const GridResolution<S>& res,
                                       const Vec3<S>& sensor_origin = Vec3<S>::Zero(),
                                       const KdTree<S>* obs_tree = nullptr) {
  const SurfaceSelection<S> sel = extract_surface(shape, res, sensor_origin);
  if (sel.indices.empty()) throw EmptyScan("chamfer_surface_to_obs: nothing visible");
  Points3<S> visible(static_cast<Eigen::Index>(sel.indices.size()), 3);
  for (std::size_t k = 0; k < sel.indices.size(); ++k)
    visible.row(static_cast<Eigen::Index>(k)) = shape.row(sel.indices[k]);
  DirectedChamfer<S> d = directed_chamfer(visible, observation, obs_tree);
  SurfaceToObs<S> out;
  out.value = d.value;
  out.grad_shape = Points3<S>::Zero(shape.rows(), 3);
  for (std::size_t k = 0; k < sel.indices.size(); ++k)
    out.grad_shape.row(sel.indices[k]) = d.grad_source.row(static_cast<Eigen::Index>(k));
  out.selected = sel.indices;
  out.nn_index = std::move(d.nn_index);
  return out;
}

template <class S>
struct PoseGrad {
  Mat3<S> dR = Mat3<S>::Zero();
  Vec3<S> dt = Vec3<S>::Zero();
};

/// Multi-view consistency loss for one instance: view k's canonical shape is
/// posed into every view (including k) and compared against that view's
/// observation in both directions, the projection term weighted by beta.
template <class S>
struct MultiviewLoss {
  S value = S(0);
  Points3<S> grad_canonical;        // wrt the reference view's canonical shape
  std::vector<PoseGrad<S>> poses;   // wrt each view's pose
};

template <class S>
MultiviewLoss<S> multiview_loss(const std::vector<Points3<S>>& observations,
                                const std::vector<Points3<S>>& canonicals,
                                const std::vector<Pose<S>>& poses, int reference_view, S beta,
                                const GridResolution<S>& res,
                                const std::vector<Vec3<S>>* sensor_origins = nullptr) {
  const int n_views = static_cast<int>(observations.size());
  if (n_views == 0) throw EmptyCloud("multiview_loss: no observations");
  if (poses.size() != observations.size() || canonicals.size() != observations.size())
    throw BadSizeParams("multiview_loss: per-view list size mismatch");
  if (reference_view < 0 || reference_view >= n_views)
    throw BadSizeParams("multiview_loss: reference view out of range");
  const Points3<S>& canonical = canonicals[static_cast<std::size_t>(reference_view)];

  MultiviewLoss<S> out;
  out.grad_canonical = Points3<S>::Zero(canonical.rows(), 3);
  out.poses.resize(static_cast<std::size_t>(n_views));
  for (int i = 0; i < n_views; ++i) {
    const Pose<S>& pose = poses[static_cast<std::size_t>(i)];
    const Points3<S> posed = pose.apply(canonical);
    const KdTree<S> obs_tree(observations[static_cast<std::size_t>(i)]);

    const ObsToShape<S> o2s = chamfer_obs_to_shape(observations[static_cast<std::size_t>(i)], posed);
    Points3<S> grad_posed = o2s.grad_shape;
    out.value += o2s.value;

    if (beta > S(0)) {
      const Vec3<S> origin = sensor_origins ? (*sensor_origins)[static_cast<std::size_t>(i)]
                                            : Vec3<S>(Vec3<S>::Zero());
      const SurfaceToObs<S> s2o = chamfer_surface_to_obs(
          posed, observations[static_cast<std::size_t>(i)], res, origin, &obs_tree);
      grad_posed += beta * s2o.grad_shape;
      out.value += beta * s2o.value;
    }

    // posed = canonical * R^T + t
    out.grad_canonical += grad_posed * pose.R;
    out.poses[static_cast<std::size_t>(i)].dR = grad_posed.transpose() * canonical;
    out.poses[static_cast<std::size_t>(i)].dt = grad_posed.colwise().sum().transpose();
  }
  return out;
}

}  // namespace pcw
