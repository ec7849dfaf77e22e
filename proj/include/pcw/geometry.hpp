#pragma once

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pcw/common.hpp"

namespace pcw {

/// Rigid transform mapping canonical-frame points into some target frame:
/// y = R * x + t.
template <class S>
struct Pose {
  Mat3<S> R = Mat3<S>::Identity();
  Vec3<S> t = Vec3<S>::Zero();

  Vec3<S> apply(const Vec3<S>& p) const { return R * p + t; }

  Points3<S> apply(const Points3<S>& pts) const {
    Points3<S> out = pts * R.transpose();
    out.rowwise() += t.transpose();
    return out;
  }

  Pose inverse() const { return {R.transpose(), Vec3<S>(-(R.transpose() * t))}; }

  /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
  friend Pose operator*(const Pose& a, const Pose& b) {
    return {Mat3<S>(a.R * b.R), Vec3<S>(a.R * b.t + a.t)};
  }
};

using Posef = Pose<float>;
using Posed = Pose<double>;

/// Gram-Schmidt map from the 6D rotation parameterization (first two matrix
/// columns, stacked column-first) to a proper rotation.
template <class S>
Mat3<S> rot6d_to_matrix(const Vec6<S>& v) {
  const Vec3<S> a = v.template head<3>();
  const Vec3<S> b = v.template tail<3>();
  const S na = a.norm();
  const S nb = b.norm();
  if (na <= S(1e-9) || nb <= S(1e-9)) throw DegenerateRotation6D();
  const Vec3<S> c1 = a / na;
  const Vec3<S> u = b - c1.dot(b) * c1;
  if (u.norm() <= S(1e-9) * nb) throw DegenerateRotation6D();
  const Vec3<S> c2 = u / u.norm();
  const Vec3<S> c3 = c1.cross(c2);
  Mat3<S> r;
  r.col(0) = c1;
  r.col(1) = c2;
  r.col(2) = c3;
  return r;
}

/// Pullback of rot6d_to_matrix: given dL/dR, returns dL/dv.
template <class S>
Vec6<S> rot6d_backward(const Vec6<S>& v, const Mat3<S>& grad_r) {
  const Vec3<S> a = v.template head<3>();
  const Vec3<S> b = v.template tail<3>();
  const S na = a.norm();
  const Vec3<S> c1 = a / na;
  const Vec3<S> u = b - c1.dot(b) * c1;
  const S nu = u.norm();
  const Vec3<S> c2 = u / nu;

  const Vec3<S> g3 = grad_r.col(2);
  // c3 = c1 x c2.
  Vec3<S> g_c1 = grad_r.col(0) + c2.cross(g3);
  Vec3<S> g_c2 = grad_r.col(1) + g3.cross(c1);
  // c2 = u / |u|.
  const Vec3<S> g_u = (g_c2 - c2 * c2.dot(g_c2)) / nu;
  // u = b - (c1 . b) c1.
  const Vec3<S> g_b = g_u - c1 * c1.dot(g_u);
  g_c1 += -c1.dot(b) * g_u - b * c1.dot(g_u);
  // c1 = a / |a|.
  const Vec3<S> g_a = (g_c1 - c1 * c1.dot(g_c1)) / na;

  Vec6<S> out;
  out.template head<3>() = g_a;
  out.template tail<3>() = g_b;
  return out;
}

/// Inverse of rot6d_to_matrix for exact rotations: first two columns stacked.
template <class S>
Vec6<S> matrix_to_rot6d(const Mat3<S>& r) {
  Vec6<S> v;
  v.template head<3>() = r.col(0);
  v.template tail<3>() = r.col(1);
  return v;
}

template <class S>
struct Polar {
  S phi;    // azimuth in (-pi, pi], about z, zero along +y
  S theta;  // elevation in [-pi/2, pi/2]
  S r;      // range, > 0
};

template <class S>
Polar<S> cartesian_to_polar(const Vec3<S>& p) {
  const S r = p.norm();
  if (r <= S(1e-9)) throw PointAtOrigin();
  S phi = std::atan2(p.x(), p.y());
  if (phi == -S(std::numbers::pi)) phi = S(std::numbers::pi);
  const S theta = std::asin(std::clamp(p.z() / r, S(-1), S(1)));
  return {phi, theta, r};
}

template <class S>
Vec3<S> polar_to_cartesian(const Polar<S>& q) {
  const S c = std::cos(q.theta);
  return {q.r * c * std::sin(q.phi), q.r * c * std::cos(q.phi), q.r * std::sin(q.theta)};
}

/// Unit quaternion (w, x, y, z) from a rotation matrix, Shepperd's method.
template <class S>
Eigen::Matrix<S, 4, 1> quaternion_from_matrix(const Mat3<S>& m) {
  Eigen::Matrix<S, 4, 1> q;
  const S tr = m.trace();
  if (tr > S(0)) {
    S s = std::sqrt(tr + S(1)) * S(2);
    q << s / S(4), (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    S s = std::sqrt(S(1) + m(0, 0) - m(1, 1) - m(2, 2)) * S(2);
    q << (m(2, 1) - m(1, 2)) / s, s / S(4), (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    S s = std::sqrt(S(1) + m(1, 1) - m(0, 0) - m(2, 2)) * S(2);
    q << (m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, s / S(4), (m(1, 2) + m(2, 1)) / s;
  } else {
    S s = std::sqrt(S(1) + m(2, 2) - m(0, 0) - m(1, 1)) * S(2);
    q << (m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, s / S(4);
  }
  return q.normalized();
}

/// Geodesic angle between two rotations in radians, in [0, pi]. The absolute
/// value of the quaternion dot product handles the double cover.
template <class S>
S angle_between(const Mat3<S>& ra, const Mat3<S>& rb) {
  const auto qa = quaternion_from_matrix(ra);
  const auto qb = quaternion_from_matrix(rb);
  const S d = std::min(std::abs(qa.dot(qb)), S(1));
  return S(2) * std::acos(d);
}

template <class S>
S degrees(S radians) {
  return radians * S(180) / S(std::numbers::pi);
}

template <class S>
S radians(S deg) {
  return deg * S(std::numbers::pi) / S(180);
}

template <class S>
Mat3<S> rot_z(S angle) {
  const S c = std::cos(angle), s = std::sin(angle);
  Mat3<S> r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

template <class S>
Mat3<S> rot_x(S angle) {
  const S c = std::cos(angle), s = std::sin(angle);
  Mat3<S> r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

template <class S>
Mat3<S> rot_y(S angle) {
  const S c = std::cos(angle), s = std::sin(angle);
  Mat3<S> r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

}  // namespace pcw
