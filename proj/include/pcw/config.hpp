#pragma once

#include <string>
#include <vector>

#include "pcw/baseline/icp.hpp"
#include "pcw/data/dataset.hpp"
#include "pcw/nn/network.hpp"
#include "pcw/train.hpp"

namespace pcw {

/// One experiment, fully described. Parsed from a preset plus an optional
/// JSON file plus `--set key.path=value` overrides (flags win). Unknown keys
/// anywhere are rejected; every value is validated before any work starts.
struct RunConfig {
  std::string preset = "tiny";
  std::uint64_t seed = 0;
  std::string dataset_dir = "data_tiny";
  int threads = 1;
  std::string eval_split = "test";
  double train_frac = 0.8, val_frac = 0.1, test_frac = 0.1;
  DataConfig data;
  NetConfig network;
  TrainConfig train;  // beta and projection resolution come from the "loss" section
  IcpParams<double> icp;

  /// The exact parsed configuration with every default materialized; echoed
  /// into reports and printed by the CLI so no default stays hidden.
  std::string effective_json;
};

/// Names: "tiny" (seconds, CI-sized), "desk" (the acceptance scale),
/// "ablation" ("desk" data with a reduced equal-step budget).
RunConfig preset_config(const std::string& name);

/// `file_json` is the raw text of a config file ("" = none). `preset_flag`
/// overrides the file's "preset" key ("" = honor the file / default "tiny").
/// `overrides` are key.path=value pairs applied last.
RunConfig parse_run_config(const std::string& file_json, const std::string& preset_flag,
                           const std::vector<std::string>& overrides);

}  // namespace pcw
