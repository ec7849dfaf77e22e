#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pcw/common.hpp"
#include "pcw/geometry.hpp"
#include "pcw/rng.hpp"

namespace pcw {

/// Angular bin size of the spherical depth buffer, radians.
template <class S>
struct GridResolution {
  S d_phi;
  S d_theta;
};

inline std::uint64_t bin_key(std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(j));
}

template <class S>
std::pair<std::int64_t, std::int64_t> bin_index(const Polar<S>& q, const GridResolution<S>& res) {
  return {static_cast<std::int64_t>(std::floor(q.phi / res.d_phi)),
          static_cast<std::int64_t>(std::floor(q.theta / res.d_theta))};
}

/// Sparse min-range buffer: bin key -> (point index, range) of the winner.
template <class S>
struct RangeGrid {
  struct Entry {
    int index;
    S r;
  };
  std::unordered_map<std::uint64_t, Entry> bins;
};

template <class S>
struct SurfaceSelection {
  std::vector<int> indices;  // selected point indices, ascending
  RangeGrid<S> grid;
};

/// Depth-buffer visibility: keep the nearest point per angular bin, as seen
/// from sensor_origin. Ties on range keep the lowest point index.
template <class S>
SurfaceSelection<S> extract_surface(const Points3<S>& points, const GridResolution<S>& res,
                                    const Vec3<S>& sensor_origin = Vec3<S>::Zero()) {
  if (points.rows() == 0) throw EmptyCloud("extract_surface: empty input");
  SurfaceSelection<S> sel;
  sel.grid.bins.reserve(static_cast<std::size_t>(points.rows()));
  const int n = static_cast<int>(points.rows());
  for (int i = 0; i < n; ++i) {
    const Vec3<S> p = points.row(i).transpose() - sensor_origin;
    const Polar<S> q = cartesian_to_polar(p);
    const auto [bi, bj] = bin_index(q, res);
    const std::uint64_t key = bin_key(bi, bj);
    auto it = sel.grid.bins.find(key);
    if (it == sel.grid.bins.end()) {
      sel.grid.bins.emplace(key, typename RangeGrid<S>::Entry{i, q.r});
    } else if (q.r < it->second.r) {
      it->second = {i, q.r};
    }
  }
  sel.indices.reserve(sel.grid.bins.size());
  for (const auto& [key, entry] : sel.grid.bins) sel.indices.push_back(entry.index);
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

/// Render one virtual scan of a dense canonical cloud: pose into the sensor
/// frame, keep the nearest point per bin, then add isotropic Gaussian noise.
template <class S>
Points3<S> simulate_scan(const Points3<S>& gt_canonical, const Pose<S>& pose,
                         const GridResolution<S>& res, S noise_sigma, RngStream& rng) {
  if (gt_canonical.rows() < 2048)
    throw BadSizeParams("simulate_scan: ground-truth cloud must have >= 2048 points");
  const Points3<S> posed = pose.apply(gt_canonical);
  const SurfaceSelection<S> sel = extract_surface(posed, res);
  if (sel.indices.empty()) throw EmptyScan("simulate_scan: no visible points");
  Points3<S> scan(static_cast<Eigen::Index>(sel.indices.size()), 3);
  for (std::size_t k = 0; k < sel.indices.size(); ++k) scan.row(static_cast<Eigen::Index>(k)) = posed.row(sel.indices[k]);
  if (noise_sigma > S(0)) {
    for (Eigen::Index i = 0; i < scan.rows(); ++i)
      for (Eigen::Index j = 0; j < 3; ++j) scan(i, j) += S(rng.normal(0.0, static_cast<double>(noise_sigma)));
  }
  return scan;
}

}  // namespace pcw
