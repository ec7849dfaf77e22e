#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pcw/chamfer.hpp"
#include "pcw/cloud_ops.hpp"
#include "pcw/common.hpp"
#include "pcw/geometry.hpp"
#include "pcw/nn/graph.hpp"
#include "pcw/rng.hpp"

namespace pcw {

/// Layer widths for the encoder / shape decoder / pose decoder MLPs. The
/// vectors hold hidden widths only; the final layer is appended implicitly
/// (latent, 3*output_points and 9 respectively).
struct NetConfig {
  int input_points = 1024;
  int output_points = 1024;
  int latent = 256;
  std::vector<int> encoder_widths{64, 128};
  std::vector<int> shape_widths{256, 512};
  std::vector<int> pose_widths{128, 64};
  int branches = 4;

  void validate() const {
    if (input_points < 1 || output_points < 1 || latent < 1 || branches < 1)
      throw ConfigError("NetConfig: sizes must be positive");
    for (int w : encoder_widths)
      if (w < 1) throw ConfigError("NetConfig: bad encoder width");
    for (int w : shape_widths)
      if (w < 1) throw ConfigError("NetConfig: bad shape width");
    for (int w : pose_widths)
      if (w < 1) throw ConfigError("NetConfig: bad pose width");
  }
};

template <class S>
struct Dense {
  MatX<S> w;  // (in, out)
  MatX<S> b;  // (1, out)
};

/// All trainable state plus the per-branch win counter that inference uses to
/// pick its pose head. Blocks enumerate in a fixed order under a stable
/// naming scheme ("encoder.l0.w", "shape.l1.b", "pose.b2.l0.w", ...), which
/// the optimizer and the checkpoint format both rely on.
template <class S>
struct NetworkParams {
  NetConfig config;
  std::vector<Dense<S>> encoder;
  std::vector<Dense<S>> shape;
  std::vector<std::vector<Dense<S>>> pose;
  Eigen::Matrix<S, 1, Eigen::Dynamic> win_counts;

  template <class F>
  void for_each_block(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each_block(F&& f) const {
    visit(*this, f);
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for_each_block([&](const std::string&, const MatX<S>& m) { n += m.size(); });
    return n;
  }

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    for (std::size_t l = 0; l < self.encoder.size(); ++l) {
      f("encoder.l" + std::to_string(l) + ".w", self.encoder[l].w);
      f("encoder.l" + std::to_string(l) + ".b", self.encoder[l].b);
    }
    for (std::size_t l = 0; l < self.shape.size(); ++l) {
      f("shape.l" + std::to_string(l) + ".w", self.shape[l].w);
      f("shape.l" + std::to_string(l) + ".b", self.shape[l].b);
    }
    for (std::size_t b = 0; b < self.pose.size(); ++b)
      for (std::size_t l = 0; l < self.pose[b].size(); ++l) {
        const std::string p = "pose.b" + std::to_string(b) + ".l" + std::to_string(l) + ".";
        f(p + "w", self.pose[b][l].w);
        f(p + "b", self.pose[b][l].b);
      }
  }
};

namespace detail {

inline std::vector<std::pair<int, int>> layer_dims(int in, const std::vector<int>& hidden,
                                                   int out) {
  std::vector<std::pair<int, int>> dims;
  int prev = in;
  for (int h : hidden) {
    dims.emplace_back(prev, h);
    prev = h;
  }
  dims.emplace_back(prev, out);
  return dims;
}

template <class S>
std::vector<Dense<S>> make_layers(int in, const std::vector<int>& hidden, int out) {
  std::vector<Dense<S>> layers;
  for (const auto& [r, c] : layer_dims(in, hidden, out))
    layers.push_back({MatX<S>::Zero(r, c), MatX<S>::Zero(1, c)});
  return layers;
}

}  // namespace detail

template <class S>
NetworkParams<S> zeros_network(const NetConfig& config) {
  config.validate();
  NetworkParams<S> p;
  p.config = config;
  p.encoder = detail::make_layers<S>(3, config.encoder_widths, config.latent);
  p.shape = detail::make_layers<S>(config.latent, config.shape_widths, 3 * config.output_points);
  p.pose.resize(static_cast<std::size_t>(config.branches));
  for (auto& branch : p.pose)
    branch = detail::make_layers<S>(config.latent, config.pose_widths, 9);
  p.win_counts = Eigen::Matrix<S, 1, Eigen::Dynamic>::Zero(1, config.branches);
  return p;
}

template <class S>
NetworkParams<S> zeros_like(const NetworkParams<S>& other) {
  return zeros_network<S>(other.config);
}

/// Fan-in-scaled uniform init; biases zero except each pose branch's rotation
/// bias, which starts at the 6D encoding of a yaw of 2*pi*b/B so the branches
/// begin as distinct pose hypotheses.
template <class S>
NetworkParams<S> make_network(const NetConfig& config, std::uint64_t seed) {
  NetworkParams<S> p = zeros_network<S>(config);
  std::uint64_t block = 0;
  p.for_each_block([&](const std::string& name, MatX<S>& m) {
    RngStream rng = derive_stream(seed, {kTagInit, block++});
    if (name.ends_with(".w")) {
      const double bound = std::sqrt(6.0 / static_cast<double>(m.rows()));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = S(rng.uniform(-bound, bound));
    }
  });
  for (int b = 0; b < config.branches; ++b) {
    const S yaw = S(2) * std::numbers::pi_v<S> * S(b) / S(config.branches);
    const Vec6<S> r6 = matrix_to_rot6d(Mat3<S>(rot_z(yaw)));
    p.pose[static_cast<std::size_t>(b)].back().b.row(0).template head<6>() = r6.transpose();
  }
  return p;
}

namespace detail {

template <class S>
MatX<S> mlp_forward(const std::vector<Dense<S>>& layers, MatX<S> h) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = (h * layers[l].w).rowwise() + layers[l].b.row(0);
    if (l + 1 < layers.size()) h = h.cwiseMax(S(0));
  }
  return h;
}

}  // namespace detail

/// Shared per-point MLP followed by a coordinatewise max over points. The max
/// makes the code order- and duplication-invariant bit for bit.
template <class S>
Eigen::Matrix<S, 1, Eigen::Dynamic> encode(const NetworkParams<S>& params, const Points3<S>& x) {
  if (x.rows() == 0) throw EmptyCloud("encode: empty input");
  const MatX<S> h = detail::mlp_forward(params.encoder, MatX<S>(x));
  return h.colwise().maxCoeff();
}

template <class S>
Points3<S> decode_shape(const NetworkParams<S>& params,
                        const Eigen::Matrix<S, 1, Eigen::Dynamic>& z) {
  const MatX<S> flat = detail::mlp_forward(params.shape, MatX<S>(z));
  return Eigen::Map<const Points3<S>>(flat.data(), params.config.output_points, 3);
}

template <class S>
std::pair<Vec6<S>, Vec3<S>> decode_pose_branch(const NetworkParams<S>& params,
                                               const Eigen::Matrix<S, 1, Eigen::Dynamic>& z,
                                               int branch) {
  if (branch < 0 || branch >= params.config.branches)
    throw BranchOutOfRange("decode_pose_branch: branch " + std::to_string(branch));
  const MatX<S> out = detail::mlp_forward(params.pose[static_cast<std::size_t>(branch)], MatX<S>(z));
  return {Vec6<S>(out.row(0).template head<6>().transpose()),
          Vec3<S>(out.row(0).template tail<3>().transpose())};
}

namespace detail {

struct DenseIds {
  int w;
  int b;
};

template <class S>
std::vector<DenseIds> add_layers(Graph<S>& g, const std::vector<Dense<S>>& layers) {
  std::vector<DenseIds> ids;
  for (const auto& d : layers) ids.push_back({g.input(d.w), g.input(d.b)});
  return ids;
}

template <class S>
int mlp_on_graph(Graph<S>& g, const std::vector<DenseIds>& layers, int h) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = g.linear(h, layers[l].w, layers[l].b);
    if (l + 1 < layers.size()) h = g.relu(h);
  }
  return h;
}

template <class S>
void take_grads(const Graph<S>& g, const std::vector<DenseIds>& ids, std::vector<Dense<S>>& out,
                S scale) {
  for (std::size_t l = 0; l < ids.size(); ++l) {
    if (g.has_grad(ids[l].w)) out[l].w += scale * g.gradient(ids[l].w);
    if (g.has_grad(ids[l].b)) out[l].b += scale * g.gradient(ids[l].b);
  }
}

}  // namespace detail

template <class S>
struct HindsightResult {
  S loss = S(0);
  int winner = 0;
  std::vector<S> branch_losses;
};

/// One training example: encode every observation, decode the reference
/// view's canonical shape, decode a pose per (branch, view), evaluate the
/// multi-view objective once per branch and backpropagate only the winner
/// (ties -> lowest branch index). Gradients are scaled by grad_scale and
/// accumulated into `grads`; losing branches receive exactly zero.
template <class S>
HindsightResult<S> hindsight_forward_backward(const NetworkParams<S>& params,
                                              const std::vector<Points3<S>>& observations,
                                              int reference_view, S beta,
                                              const GridResolution<S>& res,
                                              NetworkParams<S>& grads, S grad_scale = S(1),
                                              const std::vector<Vec3<S>>* sensor_origins = nullptr) {
  const int n_views = static_cast<int>(observations.size());
  if (n_views == 0) throw EmptyCloud("hindsight_forward_backward: no observations");
  if (reference_view < 0 || reference_view >= n_views)
    throw BadSizeParams("hindsight_forward_backward: reference view out of range");
  const int n_branches = params.config.branches;

  Graph<S> g;
  const auto enc_ids = detail::add_layers(g, params.encoder);
  const auto shape_ids = detail::add_layers(g, params.shape);
  std::vector<std::vector<detail::DenseIds>> pose_ids;
  for (const auto& branch : params.pose) pose_ids.push_back(detail::add_layers(g, branch));

  std::vector<int> z_ids;
  for (const auto& obs : observations)
    z_ids.push_back(g.colmax(detail::mlp_on_graph(g, enc_ids, g.input(MatX<S>(obs)))));

  const int flat_id = detail::mlp_on_graph(g, shape_ids, z_ids[static_cast<std::size_t>(reference_view)]);
  const int can_id = g.reshape(flat_id, params.config.output_points, 3);

  std::vector<Points3<S>> canonicals(static_cast<std::size_t>(n_views));
  canonicals[static_cast<std::size_t>(reference_view)] = g.value(can_id);

  struct HeadIds {
    int rot6;
    int t;
  };
  std::vector<std::vector<HeadIds>> heads(static_cast<std::size_t>(n_branches));
  std::vector<std::vector<Pose<S>>> poses(static_cast<std::size_t>(n_branches));
  std::vector<std::vector<Vec6<S>>> rot6s(static_cast<std::size_t>(n_branches));
  for (int b = 0; b < n_branches; ++b)
    for (int i = 0; i < n_views; ++i) {
      const int out = detail::mlp_on_graph(g, pose_ids[static_cast<std::size_t>(b)],
                                           z_ids[static_cast<std::size_t>(i)]);
      const int rot6 = g.slice_cols(out, 0, 6);
      const int t = g.slice_cols(out, 6, 3);
      const Vec6<S> a = g.value(rot6).row(0).transpose();
      heads[static_cast<std::size_t>(b)].push_back({rot6, t});
      rot6s[static_cast<std::size_t>(b)].push_back(a);
      poses[static_cast<std::size_t>(b)].push_back(
          Pose<S>{rot6d_to_matrix(a), Vec3<S>(g.value(t).row(0).transpose())});
    }

  // NaN coordinates must not reach the projection binning or NN search.
  if (!all_finite(canonicals[static_cast<std::size_t>(reference_view)]))
    throw NonFiniteGradient("hindsight_forward_backward: non-finite shape decode");
  for (const auto& branch : poses)
    for (const auto& pose : branch)
      if (!all_finite(pose.R) || !all_finite(pose.t))
        throw NonFiniteGradient("hindsight_forward_backward: non-finite pose decode");

  HindsightResult<S> result;
  MultiviewLoss<S> best;
  for (int b = 0; b < n_branches; ++b) {
    MultiviewLoss<S> ml = multiview_loss(observations, canonicals, poses[static_cast<std::size_t>(b)],
                                         reference_view, beta, res, sensor_origins);
    result.branch_losses.push_back(ml.value);
    if (b == 0 || ml.value < result.loss) {
      result.loss = ml.value;
      result.winner = b;
      best = std::move(ml);
    }
  }

  g.add_grad(can_id, best.grad_canonical);
  const auto& win_heads = heads[static_cast<std::size_t>(result.winner)];
  for (int i = 0; i < n_views; ++i) {
    const Vec6<S> gr6 = rot6d_backward(rot6s[static_cast<std::size_t>(result.winner)][static_cast<std::size_t>(i)],
                                       best.poses[static_cast<std::size_t>(i)].dR);
    g.add_grad(win_heads[static_cast<std::size_t>(i)].rot6, gr6.transpose());
    g.add_grad(win_heads[static_cast<std::size_t>(i)].t,
               best.poses[static_cast<std::size_t>(i)].dt.transpose());
  }
  g.backward();

  detail::take_grads(g, enc_ids, grads.encoder, grad_scale);
  detail::take_grads(g, shape_ids, grads.shape, grad_scale);
  for (int b = 0; b < n_branches; ++b)
    detail::take_grads(g, pose_ids[static_cast<std::size_t>(b)], grads.pose[static_cast<std::size_t>(b)],
                       grad_scale);
  return result;
}

/// Fully supervised reference: symmetric chamfer between the decoded
/// canonical shape and a ground-truth canonical cloud. Pose heads are not in
/// the graph at all, so their gradient is identically zero.
template <class S>
S supervised_forward_backward(const NetworkParams<S>& params, const Points3<S>& observation,
                              const Points3<S>& target_canonical, NetworkParams<S>& grads,
                              S grad_scale = S(1)) {
  Graph<S> g;
  const auto enc_ids = detail::add_layers(g, params.encoder);
  const auto shape_ids = detail::add_layers(g, params.shape);
  const int z_id = g.colmax(detail::mlp_on_graph(g, enc_ids, g.input(MatX<S>(observation))));
  const int can_id = g.reshape(detail::mlp_on_graph(g, shape_ids, z_id),
                               params.config.output_points, 3);
  const Points3<S> predicted = g.value(can_id);
  if (!all_finite(predicted))
    throw NonFiniteGradient("supervised_forward_backward: non-finite shape decode");

  const DirectedChamfer<S> p = directed_chamfer(predicted, target_canonical);
  const DirectedChamfer<S> c = directed_chamfer(target_canonical, predicted);
  g.add_grad(can_id, p.grad_source + c.grad_target);
  g.backward();

  detail::take_grads(g, enc_ids, grads.encoder, grad_scale);
  detail::take_grads(g, shape_ids, grads.shape, grad_scale);
  return p.value + c.value;
}

/// Branch with the most hindsight wins over training; ties -> lowest index.
template <class S>
int dominant_branch(const NetworkParams<S>& params) {
  int best = 0;
  for (int b = 1; b < params.config.branches; ++b)
    if (params.win_counts(0, b) > params.win_counts(0, best)) best = b;
  return best;
}

template <class S>
struct InferResult {
  Points3<S> canonical;
  Pose<S> pose;        // canonical -> input frame (bbox offset folded back in)
  Points3<S> completed;  // pose applied to canonical
  int branch = 0;
};

/// Single-scan inference: center, resample to the trained input size, encode
/// once, decode shape plus the dominant branch's pose.
template <class S>
InferResult<S> infer(const NetworkParams<S>& params, const Points3<S>& x, RngStream& rng) {
  if (x.rows() == 0) throw EmptyCloud("infer: empty input");
  const Centered<S> centered = center_by_bbox(x);
  const Points3<S> resampled =
      resample_with_replacement(centered.points, params.config.input_points, rng);
  const auto z = encode(params, resampled);
  InferResult<S> out;
  out.branch = dominant_branch(params);
  const auto [r6, t] = decode_pose_branch(params, z, out.branch);
  out.canonical = decode_shape(params, z);
  out.pose = Pose<S>{rot6d_to_matrix(r6), Vec3<S>(t + centered.offset)};
  out.completed = out.pose.apply(out.canonical);
  return out;
}

}  // namespace pcw
