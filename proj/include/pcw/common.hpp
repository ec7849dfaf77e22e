#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace pcw {

/// Point clouds are row-major (N, 3) matrices; row i is point i in meters.
template <class S>
using Points3 = Eigen::Matrix<S, Eigen::Dynamic, 3, Eigen::RowMajor>;

template <class S>
using Mat3 = Eigen::Matrix<S, 3, 3>;
template <class S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S>
using Vec6 = Eigen::Matrix<S, 6, 1>;
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Points3f = Points3<float>;
using Points3d = Points3<double>;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define PCW_ERROR_TYPE(Name)                                     \
  struct Name : Error {                                          \
    explicit Name(const std::string& msg = #Name) : Error(msg) {} \
  }

PCW_ERROR_TYPE(EmptyCloud);
PCW_ERROR_TYPE(EmptyScan);
PCW_ERROR_TYPE(PointAtOrigin);
PCW_ERROR_TYPE(DegenerateRotation6D);
PCW_ERROR_TYPE(BranchOutOfRange);
PCW_ERROR_TYPE(NonFiniteGradient);
PCW_ERROR_TYPE(BadSizeParams);
PCW_ERROR_TYPE(TooSparse);
PCW_ERROR_TYPE(IoError);
PCW_ERROR_TYPE(FormatVersionMismatch);
PCW_ERROR_TYPE(ChecksumMismatch);
PCW_ERROR_TYPE(BadFractions);
PCW_ERROR_TYPE(NoCorrespondences);
PCW_ERROR_TYPE(DegenerateAlignment);
PCW_ERROR_TYPE(MissingPrediction);
PCW_ERROR_TYPE(ConfigError);

#undef PCW_ERROR_TYPE

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace pcw
