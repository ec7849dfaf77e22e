#pragma once

// Reference forward passes for finite-difference checks, shared between the
// network unit tests and the acceptance suite. Everything recomputes from
// scratch and records each kink decision (relu gates, max winners, nearest
// neighbors, depth-buffer selections) so boundary-straddling slots can be
// skipped instead of producing false mismatches.

#include <cstdint>
#include <vector>

#include "pcw/chamfer.hpp"
#include "pcw/nn/network.hpp"

namespace fdref {

using namespace pcw;

/// Order-sensitive FNV-style accumulator; the digest only has to be
/// self-consistent between the +h and -h evaluations.
struct DigestHash {
  std::uint64_t h = 1469598103934665603ull;
  void add(std::uint64_t x) {
    h ^= x;
    h *= 1099511628211ull;
  }
  void add_all(const std::vector<int>& v) {
    for (int x : v) add(static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
  }
};

inline MatX<double> mlp_ref(const std::vector<Dense<double>>& layers, MatX<double> h,
                            DigestHash* d) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = (h * layers[l].w).rowwise() + layers[l].b.row(0);
    if (l + 1 < layers.size()) {
      if (d)
        for (Eigen::Index i = 0; i < h.size(); ++i)
          d->add(h(i / h.cols(), i % h.cols()) > 0 ? 1u : 0u);
      h = h.cwiseMax(0.0);
    }
  }
  return h;
}

inline Eigen::Matrix<double, 1, Eigen::Dynamic> encode_ref(const NetworkParams<double>& p,
                                                           const Points3<double>& x,
                                                           DigestHash* d) {
  const MatX<double> h = mlp_ref(p.encoder, MatX<double>(x), d);
  Eigen::Matrix<double, 1, Eigen::Dynamic> z(1, h.cols());
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < h.rows(); ++r)
      if (h(r, j) > h(best, j)) best = r;
    if (d) d->add(static_cast<std::uint64_t>(best));
    z(0, j) = h(best, j);
  }
  return z;
}

struct HindsightSetup {
  std::vector<Points3<double>> observations;
  int k = 0;
  double beta = 0.25;
  GridResolution<double> res{0.15, 0.15};
};

/// Full reference evaluation of the hindsight objective: per-branch multiview
/// losses from scratch, min selection, and a digest hashing the winner's
/// entire decision structure.
inline std::pair<double, std::vector<int>> eval_hindsight(const NetworkParams<double>& p,
                                                          const HindsightSetup& s) {
  const int n_views = static_cast<int>(s.observations.size());
  DigestHash d;
  std::vector<Eigen::Matrix<double, 1, Eigen::Dynamic>> zs;
  for (const auto& obs : s.observations) zs.push_back(encode_ref(p, obs, &d));

  const MatX<double> flat =
      mlp_ref(p.shape, MatX<double>(zs[static_cast<std::size_t>(s.k)]), &d);
  std::vector<Points3<double>> canonicals(static_cast<std::size_t>(n_views));
  canonicals[static_cast<std::size_t>(s.k)] =
      Eigen::Map<const Points3<double>>(flat.data(), p.config.output_points, 3);

  int winner = 0;
  double best = 0;
  std::vector<std::vector<Pose<double>>> poses(static_cast<std::size_t>(p.config.branches));
  for (int b = 0; b < p.config.branches; ++b) {
    for (int i = 0; i < n_views; ++i) {
      const MatX<double> out = mlp_ref(p.pose[static_cast<std::size_t>(b)],
                                       MatX<double>(zs[static_cast<std::size_t>(i)]), nullptr);
      Pose<double> pose;
      pose.R = rot6d_to_matrix(Vec6<double>(out.row(0).head<6>().transpose()));
      pose.t = out.row(0).tail<3>().transpose();
      poses[static_cast<std::size_t>(b)].push_back(pose);
    }
    const auto ml = multiview_loss(s.observations, canonicals,
                                   poses[static_cast<std::size_t>(b)], s.k, s.beta, s.res);
    if (b == 0 || ml.value < best) {
      best = ml.value;
      winner = b;
    }
  }
  d.add(static_cast<std::uint64_t>(winner));

  // Re-record the winner's pose-head gates and chamfer structures.
  for (int i = 0; i < n_views; ++i) {
    (void)mlp_ref(p.pose[static_cast<std::size_t>(winner)],
                  MatX<double>(zs[static_cast<std::size_t>(i)]), &d);
    const Points3<double> posed =
        poses[static_cast<std::size_t>(winner)][static_cast<std::size_t>(i)].apply(
            canonicals[static_cast<std::size_t>(s.k)]);
    const auto o2s = chamfer_obs_to_shape(s.observations[static_cast<std::size_t>(i)], posed);
    d.add_all(o2s.nn_index);
    const auto s2o =
        chamfer_surface_to_obs(posed, s.observations[static_cast<std::size_t>(i)], s.res);
    d.add_all(s2o.selected);
    d.add_all(s2o.nn_index);
  }
  return {best, {winner, static_cast<int>(d.h >> 32), static_cast<int>(d.h & 0xffffffffu)}};
}

inline std::vector<double*> param_slots(NetworkParams<double>& p) {
  std::vector<double*> slots;
  p.for_each_block([&](const std::string&, MatX<double>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) slots.push_back(&m(i, j));
  });
  return slots;
}

inline std::vector<double> flat_grads(const NetworkParams<double>& g) {
  std::vector<double> out;
  g.for_each_block([&](const std::string&, const MatX<double>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  });
  return out;
}

}  // namespace fdref
