#include "pcw/train.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "pcw/cloud_ops.hpp"
#include "pcw/nn/checkpoint.hpp"

namespace pcw {

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (batch_instances < 1) throw ConfigError("train: batch_instances must be >= 1");
  if (views_per_instance < 1) throw ConfigError("train: views_per_instance must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
  if (!(beta >= 0)) throw ConfigError("train: beta must be >= 0");
  if (!(res.d_phi > 0) || !(res.d_theta > 0))
    throw ConfigError("train: projection resolution must be positive");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
  if (run_until < 0 || run_until > steps)
    throw ConfigError("train: run_until must lie in [0, steps]");
}

namespace {

/// Step decay mirroring the halve-every-third schedule.
float scheduled_lr(float base, std::uint64_t step, std::uint64_t total) {
  const std::uint64_t third = total == 0 ? 0 : (3 * step) / total;
  return base * std::pow(0.5f, static_cast<float>(third));
}

/// Distinct view indices for one batch example (all of them if the instance
/// has fewer than `wanted`).
std::vector<std::size_t> sample_views(std::size_t available, std::size_t wanted,
                                      RngStream& rng) {
  std::vector<std::size_t> order(available);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  order.resize(std::min(available, wanted));
  return order;
}

struct Trainer {
  NetworkParams<float>& params;
  Adam<float>& adam;
  const std::vector<const InstanceRecord*>& dataset;
  const TrainConfig& config;
  const StepCallback& callback;
  bool weak = true;

  std::uint64_t run() {
    config.validate();
    if (dataset.empty()) throw ConfigError("train: empty dataset");
    for (const InstanceRecord* inst : dataset)
      if (inst->views.empty()) throw ConfigError("train: instance without views: " + inst->id);

    std::ofstream log;
    if (!config.log_path.empty()) {
      // Appending keeps a resumed run's history in one file.
      log.open(config.log_path, std::ios::app);
      if (!log) throw IoError("train: cannot open log " + config.log_path.string());
    }

    const auto total = static_cast<std::uint64_t>(config.steps);
    const auto stop =
        config.run_until > 0 ? static_cast<std::uint64_t>(config.run_until) : total;
    const std::uint64_t start = adam.step_count();
    for (std::uint64_t step = start; step < stop; ++step) {
      RngStream rng = derive_stream(config.seed, {kTagStep, step});
      NetworkParams<float> grads = zeros_like(params);
      double loss = 0;
      std::vector<int> winners;
      for (int b = 0; b < config.batch_instances; ++b) {
        const InstanceRecord& inst =
            *dataset[rng.uniform_index(static_cast<std::uint64_t>(dataset.size()))];
        const auto picked = sample_views(
            inst.views.size(), static_cast<std::size_t>(config.views_per_instance), rng);
        loss += weak ? weak_example(inst, picked, rng, grads, winners)
                     : oracle_example(inst, picked, rng, grads);
      }
      loss /= config.batch_instances;

      adam.step(params, grads, scheduled_lr(config.lr, step, total));
      for (const int w : winners) params.win_counts(0, w) += 1.0f;

      if (log) {
        log << step << ',' << loss << ',';
        for (int k = 0; k < params.config.branches; ++k) {
          if (k) log << '|';
          log << std::count(winners.begin(), winners.end(), k);
        }
        log << '\n';
      }
      maybe_checkpoint(step + 1, stop);
      if (callback) callback({step, loss, winners, &grads});
    }
    if (log) log.flush();
    // A zero-step run still persists its state: the untrained network is a
    // legitimate evaluation subject (steps=0 produces its checkpoint).
    if (start == stop) maybe_checkpoint(stop, stop);
    return adam.step_count();
  }

  double weak_example(const InstanceRecord& inst, const std::vector<std::size_t>& picked,
                      RngStream& rng, NetworkParams<float>& grads, std::vector<int>& winners) {
    std::vector<Points3f> observations;
    std::vector<Vec3<float>> origins;
    for (const std::size_t v : picked) {
      const Centered<float> centered = center_by_bbox(inst.views[v].scan);
      observations.push_back(
          resample_with_replacement(centered.points, params.config.input_points, rng));
      // The sensor sits at the origin of the sensor frame; shifting the scan
      // moves it to -offset.
      origins.push_back(-centered.offset);
    }
    const int k = static_cast<int>(rng.uniform_index(observations.size()));
    const auto result = hindsight_forward_backward(
        params, observations, k, config.beta, config.res, grads,
        1.0f / static_cast<float>(config.batch_instances), &origins);
    winners.push_back(result.winner);
    return result.loss;
  }

  double oracle_example(const InstanceRecord& inst, const std::vector<std::size_t>& picked,
                        RngStream& rng, NetworkParams<float>& grads) {
    double loss = 0;
    const float scale =
        1.0f / static_cast<float>(config.batch_instances * picked.size());
    for (const std::size_t v : picked) {
      const Centered<float> centered = center_by_bbox(inst.views[v].scan);
      const Points3f obs =
          resample_with_replacement(centered.points, params.config.input_points, rng);
      const Points3f target =
          resample_with_replacement(inst.gt_canonical, params.config.output_points, rng);
      loss += supervised_forward_backward(params, obs, target, grads, scale);
    }
    return loss / static_cast<double>(picked.size());
  }

  void maybe_checkpoint(std::uint64_t done, std::uint64_t stop) {
    if (config.checkpoint_path.empty()) return;
    const bool periodic =
        config.checkpoint_every > 0 &&
        done % static_cast<std::uint64_t>(config.checkpoint_every) == 0;
    if (periodic || done == stop) save_checkpoint(config.checkpoint_path, params, adam);
  }
};

}  // namespace

std::uint64_t train_weak(NetworkParams<float>& params, Adam<float>& adam,
                         const std::vector<const InstanceRecord*>& dataset,
                         const TrainConfig& config, const StepCallback& callback) {
  Trainer t{params, adam, dataset, config, callback, true};
  return t.run();
}

std::uint64_t train_supervised_oracle(NetworkParams<float>& params, Adam<float>& adam,
                                      const std::vector<const InstanceRecord*>& dataset,
                                      const TrainConfig& config, const StepCallback& callback) {
  Trainer t{params, adam, dataset, config, callback, false};
  return t.run();
}

}  // namespace pcw
