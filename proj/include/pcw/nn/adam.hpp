#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pcw/common.hpp"
#include "pcw/nn/network.hpp"

namespace pcw {

template <class S>
struct AdamConfig {
  S lr = S(1e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

/// Adam with bias correction. Moments are kept per parameter block in the
/// network's enumeration order; any non-finite gradient entry aborts the step
/// before anything is touched.
template <class S>
class Adam {
 public:
  Adam(const NetworkParams<S>& params, AdamConfig<S> config) : config_(config) {
    params.for_each_block([&](const std::string&, const MatX<S>& block) {
      m_.push_back(MatX<S>::Zero(block.rows(), block.cols()));
      v_.push_back(MatX<S>::Zero(block.rows(), block.cols()));
    });
  }

  std::uint64_t step_count() const { return t_; }
  std::vector<MatX<S>>& moment1() { return m_; }
  std::vector<MatX<S>>& moment2() { return v_; }
  const std::vector<MatX<S>>& moment1() const { return m_; }
  const std::vector<MatX<S>>& moment2() const { return v_; }
  void set_step_count(std::uint64_t t) { t_ = t; }

  /// One update over every block; lr overrides the configured rate (schedule
  /// hook). Throws NonFiniteGradient without modifying params or state.
  void step(NetworkParams<S>& params, const NetworkParams<S>& grads, S lr) {
    grads.for_each_block([&](const std::string& name, const MatX<S>& g) {
      if (!all_finite(g)) throw NonFiniteGradient("adam: non-finite gradient in " + name);
    });
    ++t_;
    const S c1 = S(1) - std::pow(config_.beta1, S(t_));
    const S c2 = S(1) - std::pow(config_.beta2, S(t_));
    std::vector<MatX<S>*> wp;
    std::vector<const MatX<S>*> gp;
    params.for_each_block([&](const std::string&, MatX<S>& w) { wp.push_back(&w); });
    grads.for_each_block([&](const std::string&, const MatX<S>& g) { gp.push_back(&g); });
    if (wp.size() != m_.size() || gp.size() != m_.size())
      throw BadSizeParams("adam: block count mismatch");
    for (std::size_t k = 0; k < wp.size(); ++k) {
      m_[k] = config_.beta1 * m_[k] + (S(1) - config_.beta1) * (*gp[k]);
      v_[k].array() = config_.beta2 * v_[k].array() +
                      (S(1) - config_.beta2) * gp[k]->array().square();
      // lr = 0 must leave weights bitwise intact: `w -= 0 * q` is not a no-op
      // for IEEE signed zeros (-0 - (-0) = +0).
      if (lr != S(0))
        wp[k]->array() -=
            lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + config_.eps);
    }
  }

  void step(NetworkParams<S>& params, const NetworkParams<S>& grads) {
    step(params, grads, config_.lr);
  }

  const AdamConfig<S>& config() const { return config_; }

 private:
  AdamConfig<S> config_;
  std::uint64_t t_ = 0;
  std::vector<MatX<S>> m_;
  std::vector<MatX<S>> v_;
};

}  // namespace pcw
