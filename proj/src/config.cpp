#include "pcw/config.hpp"

#include <cmath>
#include <json.hpp>
#include <set>

#include "pcw/geometry.hpp"

namespace pcw {

namespace {

using nlohmann::json;

json preset_defaults(const std::string& name) {
  json j;
  j["preset"] = name;
  j["seed"] = 0;
  j["threads"] = 1;
  j["eval_split"] = "test";

  json data;
  data["noise_sigma"] = 0.03;
  data["scan_d_phi_deg"] = 0.5;
  data["scan_d_theta_deg"] = 0.5;
  data["min_points"] = 100;
  data["max_retries"] = 20;
  data["fore_aft_symmetric"] = false;
  data["pose_mode"] = "wide";
  data["distance_min"] = 5.0;
  data["distance_max"] = 30.0;
  data["pitch_jitter_deg"] = 7.0;
  data["lateral_jitter"] = 1.0;
  data["height_jitter"] = 0.5;
  data["walk_distance_min"] = 5.0;
  data["walk_distance_max"] = 10.0;
  data["walk_yaw_step_min_deg"] = 0.6;
  data["walk_yaw_step_max_deg"] = 1.4;
  data["walk_distance_step"] = 0.05;
  data["walk_jitter"] = 0.02;

  json network, loss, optimizer, icp;
  loss["beta"] = 0.25;
  loss["d_phi_deg"] = 2.0;
  loss["d_theta_deg"] = 2.0;
  optimizer["checkpoint_every"] = 0;
  optimizer["run_until"] = 0;
  icp["max_correspondence_distance"] = 0.175;
  icp["max_iterations"] = 50;
  icp["convergence_eps"] = 1e-6;

  if (name == "tiny") {
    j["dataset_dir"] = "data_tiny";
    data["instances"] = 10;
    data["views"] = 4;
    data["gt_points"] = 2048;
    data["train_frac"] = 0.8;
    data["val_frac"] = 0.1;
    data["test_frac"] = 0.1;
    network["input_points"] = 256;
    network["output_points"] = 256;
    network["latent"] = 64;
    network["encoder_widths"] = {32, 64};
    network["shape_widths"] = {64, 128};
    network["pose_widths"] = {32, 32};
    network["branches"] = 2;
    optimizer["lr"] = 1e-3;
    optimizer["steps"] = 60;
    optimizer["batch_instances"] = 2;
    optimizer["views_per_instance"] = 2;
  } else if (name == "desk" || name == "ablation") {
    j["dataset_dir"] = "data_desk";
    data["instances"] = 270;
    data["views"] = 12;
    data["gt_points"] = 8192;
    data["train_frac"] = 200.0 / 270.0;
    data["val_frac"] = 20.0 / 270.0;
    data["test_frac"] = 50.0 / 270.0;
    network["input_points"] = 1024;
    network["output_points"] = 1024;
    network["latent"] = 256;
    network["encoder_widths"] = {64, 128};
    network["shape_widths"] = {256, 512};
    network["pose_widths"] = {128, 64};
    network["branches"] = 4;
    optimizer["lr"] = 1e-4;
    optimizer["steps"] = name == "ablation" ? 700 : 2200;
    optimizer["batch_instances"] = 8;
    optimizer["views_per_instance"] = 4;
    optimizer["checkpoint_every"] = 500;
  } else {
    throw ConfigError("unknown preset \"" + name + "\" (tiny | desk | ablation)");
  }
  j["data"] = data;
  j["network"] = network;
  j["loss"] = loss;
  j["optimizer"] = optimizer;
  j["icp"] = icp;
  return j;
}

/// Objects merge key-by-key; scalars and arrays replace.
void merge(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object())
      merge(base[key], value);
    else
      base[key] = value;
  }
}

void apply_override(json& j, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key.path=value, got \"" + kv + "\"");
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  if (path == "preset") throw ConfigError("--set cannot change the preset; use --preset");

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare words are strings
  }
  json* node = &j;
  std::size_t begin = 0;
  for (std::size_t dot = path.find('.'); dot != std::string::npos;
       begin = dot + 1, dot = path.find('.', begin)) {
    node = &(*node)[path.substr(begin, dot - begin)];
    if (!node->is_object())
      throw ConfigError("--set " + path + ": \"" + path.substr(0, dot) + "\" is not a section");
  }
  (*node)[path.substr(begin)] = value;
}

void require_keys(const json& obj, const std::string& where, const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items())
    if (!known.count(key))
      throw ConfigError("unknown config key \"" + (where.empty() ? key : where + "." + key) +
                        "\"");
}

template <class T>
T get(const json& obj, const std::string& where, const std::string& key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key \"" + where + "." + key + "\": " + e.what());
  }
}

RunConfig from_json(const json& j) {
  require_keys(j, "",
               {"preset", "seed", "dataset_dir", "threads", "eval_split", "data", "network",
                "loss", "optimizer", "icp"});
  RunConfig c;
  c.preset = get<std::string>(j, "", "preset");
  c.seed = get<std::uint64_t>(j, "", "seed");
  c.dataset_dir = get<std::string>(j, "", "dataset_dir");
  c.threads = get<int>(j, "", "threads");
  c.eval_split = get<std::string>(j, "", "eval_split");

  const json& d = j.at("data");
  require_keys(d, "data",
               {"instances", "views", "gt_points", "noise_sigma", "scan_d_phi_deg",
                "scan_d_theta_deg", "min_points", "max_retries", "fore_aft_symmetric",
                "pose_mode", "distance_min", "distance_max", "pitch_jitter_deg",
                "lateral_jitter", "height_jitter", "walk_distance_min", "walk_distance_max",
                "walk_yaw_step_min_deg", "walk_yaw_step_max_deg", "walk_distance_step",
                "walk_jitter", "train_frac", "val_frac", "test_frac"});
  c.data.instances = get<int>(d, "data", "instances");
  c.data.views = get<int>(d, "data", "views");
  c.data.gt_points = get<int>(d, "data", "gt_points");
  c.data.noise_sigma = get<float>(d, "data", "noise_sigma");
  c.data.res.d_phi = radians(get<float>(d, "data", "scan_d_phi_deg"));
  c.data.res.d_theta = radians(get<float>(d, "data", "scan_d_theta_deg"));
  c.data.min_points = get<int>(d, "data", "min_points");
  c.data.max_retries = get<int>(d, "data", "max_retries");
  c.data.fore_aft_symmetric = get<bool>(d, "data", "fore_aft_symmetric");
  const std::string mode = get<std::string>(d, "data", "pose_mode");
  if (mode == "wide")
    c.data.poses.mode = PoseMode::kWide;
  else if (mode == "walk")
    c.data.poses.mode = PoseMode::kWalk;
  else
    throw ConfigError("data.pose_mode must be \"wide\" or \"walk\"");
  c.data.poses.distance_min = get<float>(d, "data", "distance_min");
  c.data.poses.distance_max = get<float>(d, "data", "distance_max");
  c.data.poses.pitch_jitter = radians(get<float>(d, "data", "pitch_jitter_deg"));
  c.data.poses.lateral_jitter = get<float>(d, "data", "lateral_jitter");
  c.data.poses.height_jitter = get<float>(d, "data", "height_jitter");
  c.data.poses.walk_distance_min = get<float>(d, "data", "walk_distance_min");
  c.data.poses.walk_distance_max = get<float>(d, "data", "walk_distance_max");
  c.data.poses.walk_yaw_step_min = radians(get<float>(d, "data", "walk_yaw_step_min_deg"));
  c.data.poses.walk_yaw_step_max = radians(get<float>(d, "data", "walk_yaw_step_max_deg"));
  c.data.poses.walk_distance_step = get<float>(d, "data", "walk_distance_step");
  c.data.poses.walk_jitter = get<float>(d, "data", "walk_jitter");
  c.train_frac = get<double>(d, "data", "train_frac");
  c.val_frac = get<double>(d, "data", "val_frac");
  c.test_frac = get<double>(d, "data", "test_frac");

  const json& n = j.at("network");
  require_keys(n, "network",
               {"input_points", "output_points", "latent", "encoder_widths", "shape_widths",
                "pose_widths", "branches"});
  c.network.input_points = get<int>(n, "network", "input_points");
  c.network.output_points = get<int>(n, "network", "output_points");
  c.network.latent = get<int>(n, "network", "latent");
  c.network.encoder_widths = get<std::vector<int>>(n, "network", "encoder_widths");
  c.network.shape_widths = get<std::vector<int>>(n, "network", "shape_widths");
  c.network.pose_widths = get<std::vector<int>>(n, "network", "pose_widths");
  c.network.branches = get<int>(n, "network", "branches");

  const json& l = j.at("loss");
  require_keys(l, "loss", {"beta", "d_phi_deg", "d_theta_deg"});
  c.train.beta = get<float>(l, "loss", "beta");
  c.train.res.d_phi = radians(get<float>(l, "loss", "d_phi_deg"));
  c.train.res.d_theta = radians(get<float>(l, "loss", "d_theta_deg"));

  const json& o = j.at("optimizer");
  require_keys(o, "optimizer",
               {"lr", "steps", "batch_instances", "views_per_instance", "checkpoint_every",
                "run_until"});
  c.train.lr = get<float>(o, "optimizer", "lr");
  c.train.steps = get<int>(o, "optimizer", "steps");
  c.train.batch_instances = get<int>(o, "optimizer", "batch_instances");
  c.train.views_per_instance = get<int>(o, "optimizer", "views_per_instance");
  c.train.checkpoint_every = get<int>(o, "optimizer", "checkpoint_every");
  c.train.run_until = get<int>(o, "optimizer", "run_until");
  c.train.seed = c.seed;

  const json& p = j.at("icp");
  require_keys(p, "icp", {"max_correspondence_distance", "max_iterations", "convergence_eps"});
  c.icp.max_correspondence_distance = get<double>(p, "icp", "max_correspondence_distance");
  c.icp.max_iterations = get<int>(p, "icp", "max_iterations");
  c.icp.convergence_eps = get<double>(p, "icp", "convergence_eps");

  // Fail fast, before any dataset or training work.
  c.network.validate();
  c.train.validate();
  c.icp.validate();
  if (c.data.instances < 1) throw ConfigError("data.instances must be >= 1");
  if (c.data.views < 1) throw ConfigError("data.views must be >= 1");
  if (c.data.gt_points < 2048) throw ConfigError("data.gt_points must be >= 2048");
  if (c.data.noise_sigma < 0) throw ConfigError("data.noise_sigma must be >= 0");
  if (!(c.data.res.d_phi > 0) || !(c.data.res.d_theta > 0))
    throw ConfigError("data.scan resolution must be positive");
  if (c.data.min_points < 1) throw ConfigError("data.min_points must be >= 1");
  if (c.data.max_retries < 0) throw ConfigError("data.max_retries must be >= 0");
  if (!(c.data.poses.distance_min > 0) ||
      c.data.poses.distance_max < c.data.poses.distance_min)
    throw ConfigError("data.distance range must satisfy 0 < min <= max");
  if (!(c.data.poses.walk_distance_min > 0) ||
      c.data.poses.walk_distance_max < c.data.poses.walk_distance_min)
    throw ConfigError("data.walk_distance range must satisfy 0 < min <= max");
  if (c.train_frac < 0 || c.val_frac < 0 || c.test_frac < 0 ||
      std::abs(c.train_frac + c.val_frac + c.test_frac - 1.0) > 1e-9)
    throw BadFractions("data split fractions must be non-negative and sum to 1");
  if (c.eval_split != "train" && c.eval_split != "val" && c.eval_split != "test")
    throw ConfigError("eval_split must be train | val | test");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");

  c.effective_json = j.dump(2);
  return c;
}

}  // namespace

RunConfig preset_config(const std::string& name) { return from_json(preset_defaults(name)); }

RunConfig parse_run_config(const std::string& file_json, const std::string& preset_flag,
                           const std::vector<std::string>& overrides) {
  json file = json::object();
  if (!file_json.empty()) {
    try {
      file = json::parse(file_json);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  std::string preset = "tiny";
  if (file.contains("preset")) {
    if (!file["preset"].is_string()) throw ConfigError("\"preset\" must be a string");
    preset = file["preset"].get<std::string>();
  }
  if (!preset_flag.empty()) preset = preset_flag;

  json j = preset_defaults(preset);
  merge(j, file);
  j["preset"] = preset;
  for (const auto& kv : overrides) apply_override(j, kv);
  return from_json(j);
}

}  // namespace pcw
