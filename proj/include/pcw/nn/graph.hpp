#pragma once

#include <functional>
#include <vector>

#include "pcw/common.hpp"

namespace pcw {

/// Minimal reverse-mode tape. Nodes are dense row-major matrices; each op
/// records a closure that scatters its output gradient into its parents.
/// Gradients are allocated lazily: a node that never receives a contribution
/// is skipped by the sweep, so anything downstream of an unseeded output
/// (e.g. a losing pose branch) ends up with no gradient at all rather than an
/// approximate zero.
template <class S>
class Graph {
 public:
  using Mat = MatX<S>;

  Graph() = default;
  Graph(const Graph&) = delete;             // backward closures capture this
  Graph& operator=(const Graph&) = delete;

  int input(Mat v) { return push(std::move(v), nullptr); }

  /// value = x * w + b (b is a 1 x out row, broadcast over rows of x).
  int linear(int x, int w, int b) {
    const Mat& xv = val(x);
    const Mat& wv = val(w);
    const Mat& bv = val(b);
    if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols())
      throw BadSizeParams("Graph::linear: shape mismatch");
    Mat v = xv * wv;
    v.rowwise() += bv.row(0);
    const int id = push(std::move(v), nullptr);
    nodes_[id].back = [this, id, x, w, b] {
      const Mat& dy = nodes_[id].grad;
      ensure(x, val(x).rows(), val(x).cols()) += dy * val(w).transpose();
      ensure(w, val(w).rows(), val(w).cols()) += val(x).transpose() * dy;
      ensure(b, 1, val(b).cols()) += dy.colwise().sum();
    };
    return id;
  }

  int relu(int x) {
    Mat v = val(x).cwiseMax(S(0));
    const int id = push(std::move(v), nullptr);
    nodes_[id].back = [this, id, x] {
      const Mat& dy = nodes_[id].grad;
      Mat& dx = ensure(x, val(x).rows(), val(x).cols());
      dx.array() += (val(x).array() > S(0)).template cast<S>() * dy.array();
    };
    return id;
  }

  /// Column-wise max over rows; ties keep the lowest row. The max value is
  /// order-exact, so permuting rows of x cannot change the output bits.
  int colmax(int x) {
    const Mat& xv = val(x);
    if (xv.rows() == 0) throw BadSizeParams("Graph::colmax: empty input");
    Mat v(1, xv.cols());
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(xv.cols()));
    for (Eigen::Index j = 0; j < xv.cols(); ++j) {
      Eigen::Index best = 0;
      for (Eigen::Index r = 1; r < xv.rows(); ++r)
        if (xv(r, j) > xv(best, j)) best = r;
      arg[static_cast<std::size_t>(j)] = best;
      v(0, j) = xv(best, j);
    }
    const int id = push(std::move(v), nullptr);
    nodes_[id].back = [this, id, x, arg = std::move(arg)] {
      const Mat& dy = nodes_[id].grad;
      Mat& dx = ensure(x, val(x).rows(), val(x).cols());
      for (Eigen::Index j = 0; j < dx.cols(); ++j)
        dx(arg[static_cast<std::size_t>(j)], j) += dy(0, j);
    };
    return id;
  }

  /// Row-major reshape; element order is preserved.
  int reshape(int x, Eigen::Index rows, Eigen::Index cols) {
    const Mat& xv = val(x);
    if (rows * cols != xv.size()) throw BadSizeParams("Graph::reshape: size mismatch");
    Mat v = Eigen::Map<const Mat>(xv.data(), rows, cols);
    const int id = push(std::move(v), nullptr);
    nodes_[id].back = [this, id, x] {
      const Mat& dy = nodes_[id].grad;
      Mat& dx = ensure(x, val(x).rows(), val(x).cols());
      dx += Eigen::Map<const Mat>(dy.data(), dx.rows(), dx.cols());
    };
    return id;
  }

  int slice_cols(int x, Eigen::Index start, Eigen::Index count) {
    const Mat& xv = val(x);
    if (start < 0 || count < 0 || start + count > xv.cols())
      throw BadSizeParams("Graph::slice_cols: out of range");
    Mat v = xv.middleCols(start, count);
    const int id = push(std::move(v), nullptr);
    nodes_[id].back = [this, id, x, start, count] {
      ensure(x, val(x).rows(), val(x).cols()).middleCols(start, count) += nodes_[id].grad;
    };
    return id;
  }

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }
  const Mat& gradient(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  /// Seeds (or adds to) a node's output gradient ahead of backward().
  template <class Derived>
  void add_grad(int id, const Eigen::MatrixBase<Derived>& g) {
    ensure(id, value(id).rows(), value(id).cols()) += g;
  }

  /// Single reverse sweep in creation order; nodes without an accumulated
  /// gradient are skipped.
  void backward() {
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.back && n.grad.size() != 0) n.back();
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;
  };

  int push(Mat v, std::function<void()> back) {
    nodes_.push_back(Node{std::move(v), Mat(), std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
  }
  const Mat& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Mat& ensure(int id, Eigen::Index rows, Eigen::Index cols) {
    Mat& g = nodes_[static_cast<std::size_t>(id)].grad;
    if (g.size() == 0) g = Mat::Zero(rows, cols);
    return g;
  }

  std::vector<Node> nodes_;
};

}  // namespace pcw
