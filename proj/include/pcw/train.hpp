#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "pcw/data/dataset.hpp"
#include "pcw/nn/adam.hpp"
#include "pcw/nn/network.hpp"

namespace pcw {

struct TrainConfig {
  int steps = 2000;  // total step budget; the lr schedule is anchored to it
  int batch_instances = 8;
  int views_per_instance = 4;  // capped at an instance's available views
  float lr = 1e-4f;
  float beta = 0.25f;  // coverage weight in the multi-view loss
  GridResolution<float> res{0.0349065850f, 0.0349065850f};  // projection grid (2 deg)
  std::uint64_t seed = 0;
  int run_until = 0;  // pause after this step (0 = run to `steps`); the
                      // schedule still decays as if the run went to `steps`
  int checkpoint_every = 0;  // 0 = only the final checkpoint
  std::filesystem::path checkpoint_path;  // empty = never write checkpoints
  std::filesystem::path log_path;         // empty = no log file

  void validate() const;
};

/// Per-step observer for audits (branch-win tracking, gradient inspection).
/// `winners` holds the hindsight winner of each batch example; empty for the
/// supervised oracle. `grads` is the accumulated batch gradient before the
/// optimizer consumed it.
struct StepEvent {
  std::uint64_t step = 0;  // 0-based index of the step that just ran
  double loss = 0;
  std::vector<int> winners;
  const NetworkParams<float>* grads = nullptr;
};
using StepCallback = std::function<void(const StepEvent&)>;

/// Weakly-supervised training: per step, sample `batch_instances` instances
/// (with replacement), up to `views_per_instance` distinct scans each,
/// center/resample them, and take an Adam step on the batch-mean hindsight
/// multi-view loss. The learning rate halves at each third of the run.
/// Training resumes wherever `adam.step_count()` points, so a checkpointed
/// (params, adam) pair continues bit-identically. Appends one CSV line per
/// step to `log_path`: step, total_loss, winner branch histogram. On a
/// non-finite gradient the parameters and the last written checkpoint stay
/// untouched and the error propagates.
std::uint64_t train_weak(NetworkParams<float>& params, Adam<float>& adam,
                         const std::vector<const InstanceRecord*>& dataset,
                         const TrainConfig& config, const StepCallback& callback = nullptr);

/// Fully supervised reference: identical sampling and schedule, but the loss
/// is the symmetric chamfer between the decoded canonical shape and the
/// instance's ground-truth canonical cloud (resampled to the decoder's point
/// count). Pose branches receive no gradient and keep their initial values.
std::uint64_t train_supervised_oracle(NetworkParams<float>& params, Adam<float>& adam,
                                      const std::vector<const InstanceRecord*>& dataset,
                                      const TrainConfig& config,
                                      const StepCallback& callback = nullptr);

}  // namespace pcw
