#pragma once

#include "pcw/common.hpp"
#include "pcw/rng.hpp"

namespace pcw {

/// Draw n points uniformly with replacement.
template <class S>
Points3<S> resample_with_replacement(const Points3<S>& x, Eigen::Index n, RngStream& rng) {
  if (x.rows() == 0) throw EmptyCloud("resample_with_replacement: empty input");
  Points3<S> out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    out.row(i) = x.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(x.rows()))));
  return out;
}

template <class S>
struct Centered {
  Points3<S> points;  // x - offset
  Vec3<S> offset;     // axis-aligned bbox center of the input
};

/// Shift a cloud so its bbox center sits at the origin.
template <class S>
Centered<S> center_by_bbox(const Points3<S>& x) {
  if (x.rows() == 0) throw EmptyCloud("center_by_bbox: empty input");
  const Vec3<S> lo = x.colwise().minCoeff().transpose();
  const Vec3<S> hi = x.colwise().maxCoeff().transpose();
  const Vec3<S> offset = (lo + hi) / S(2);
  Points3<S> out = x;
  out.rowwise() -= offset.transpose();
  return {std::move(out), offset};
}

}  // namespace pcw
