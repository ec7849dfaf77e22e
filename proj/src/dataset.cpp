#include "pcw/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

#include "pcw/data/cloud_io.hpp"

namespace pcw {

namespace {

using nlohmann::json;

constexpr int kIndexVersion = 1;

Pose<float> random_wide_pose(const PoseDistribution& d, RngStream& rng) {
  const float yaw = float(rng.uniform(0.0, 2.0 * std::numbers::pi));
  const float pitch = float(rng.uniform(-d.pitch_jitter, d.pitch_jitter));
  Pose<float> pose;
  pose.R = rot_x(pitch) * rot_z(yaw);
  pose.t = Vec3<float>(float(rng.uniform(-d.lateral_jitter, d.lateral_jitter)),
                       float(rng.uniform(d.distance_min, d.distance_max)),
                       float(rng.uniform(-d.height_jitter, d.height_jitter)));
  return pose;
}

struct WalkState {
  float yaw = 0, pitch = 0, distance = 0, x = 0, z = 0;
  float yaw_direction = 1;

  Pose<float> pose() const {
    Pose<float> p;
    p.R = rot_x(pitch) * rot_z(yaw);
    p.t = Vec3<float>(x, distance, z);
    return p;
  }
};

WalkState random_walk_start(const PoseDistribution& d, RngStream& rng) {
  WalkState s;
  s.yaw = float(rng.uniform(0.0, 2.0 * std::numbers::pi));
  s.pitch = float(rng.uniform(-d.pitch_jitter, d.pitch_jitter));
  s.distance = float(rng.uniform(d.walk_distance_min, d.walk_distance_max));
  s.x = float(rng.uniform(-d.walk_jitter, d.walk_jitter));
  s.z = float(rng.uniform(-d.height_jitter, d.height_jitter));
  s.yaw_direction = rng.uniform_index(2) == 0 ? 1.0f : -1.0f;
  return s;
}

WalkState walk_step(const WalkState& prev, const PoseDistribution& d, RngStream& rng) {
  WalkState s = prev;
  s.yaw += s.yaw_direction * float(rng.uniform(d.walk_yaw_step_min, d.walk_yaw_step_max));
  s.pitch += float(rng.uniform(-0.2, 0.2) * std::numbers::pi / 180.0);
  s.distance += float(rng.uniform(-d.walk_distance_step, d.walk_distance_step));
  s.distance = std::clamp(s.distance, d.walk_distance_min, d.walk_distance_max);
  s.x += float(rng.uniform(-d.walk_jitter, d.walk_jitter));
  s.z += float(rng.uniform(-d.walk_jitter, d.walk_jitter));
  return s;
}

json pose_to_json(const ViewRecord& v, const std::string& scan_file) {
  json j;
  j["scan"] = scan_file;
  std::vector<double> rotation;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rotation.push_back(static_cast<double>(v.pose.R(r, c)));
  j["rotation"] = rotation;
  j["translation"] = {static_cast<double>(v.pose.t[0]), static_cast<double>(v.pose.t[1]),
                      static_cast<double>(v.pose.t[2])};
  j["d_phi"] = static_cast<double>(v.res.d_phi);
  j["d_theta"] = static_cast<double>(v.res.d_theta);
  j["noise_sigma"] = static_cast<double>(v.noise_sigma);
  return j;
}

std::string view_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu.pcw", i);
  return buf;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError("bad JSON in " + path.string() + ": " + e.what());
  }
}

void store_json(const json& j, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace

InstanceRecord gen_instance(const std::string& id, ShapeKind kind, Points3f gt_canonical,
                            int n_views, const PoseDistribution& poses,
                            const GridResolution<float>& res, float noise_sigma, RngStream& rng,
                            int min_points, int max_retries) {
  if (n_views < 1) throw BadSizeParams("gen_instance: need at least one view");
  InstanceRecord record;
  record.id = id;
  record.kind = kind;
  record.gt_canonical = std::move(gt_canonical);

  WalkState walk;
  bool walk_started = false;
  for (int i = 0; i < n_views; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt <= max_retries && !accepted; ++attempt) {
      Pose<float> pose;
      WalkState candidate;
      if (poses.mode == PoseMode::kWide) {
        pose = random_wide_pose(poses, rng);
      } else {
        candidate = walk_started ? walk_step(walk, poses, rng) : random_walk_start(poses, rng);
        pose = candidate.pose();
      }
      const Points3f scan = simulate_scan(record.gt_canonical, pose, res, noise_sigma, rng);
      if (scan.rows() < min_points) continue;
      if (poses.mode == PoseMode::kWalk) {
        walk = candidate;
        walk_started = true;
      }
      record.views.push_back(ViewRecord{pose, scan, res, noise_sigma});
      accepted = true;
    }
    if (!accepted)
      throw TooSparse("gen_instance: view " + std::to_string(i) + " of " + id +
                      " stayed below " + std::to_string(min_points) + " points");
  }
  return record;
}

std::vector<InstanceRecord> gen_dataset(const DataConfig& config, std::uint64_t seed) {
  if (config.instances < 0) throw BadSizeParams("gen_dataset: negative instance count");
  constexpr ShapeKind kKinds[] = {ShapeKind::kBoxComposite, ShapeKind::kEllipsoidComposite,
                                  ShapeKind::kExtrudedProfile};
  std::vector<InstanceRecord> records;
  records.reserve(static_cast<std::size_t>(config.instances));
  for (int i = 0; i < config.instances; ++i) {
    RngStream rng = derive_stream(seed, {kTagData, static_cast<std::uint64_t>(i)});
    const ShapeKind kind = kKinds[rng.uniform_index(3)];
    const ShapeParams params = draw_shape_params(kind, rng, config.fore_aft_symmetric);
    Points3f gt = gen_shape(kind, params, config.gt_points, rng);
    char id[32];
    std::snprintf(id, sizeof id, "inst_%04d", i);
    records.push_back(gen_instance(id, kind, std::move(gt), config.views, config.poses,
                                   config.res, config.noise_sigma, rng, config.min_points,
                                   config.max_retries));
  }
  return records;
}

void write_dataset(const std::vector<InstanceRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json index;
  index["format_version"] = kIndexVersion;
  index["instances"] = json::array();
  for (const auto& record : records) index["instances"].push_back(record.id);
  store_json(index, dir / "index.json");

  for (const auto& record : records) {
    const std::filesystem::path inst_dir = dir / record.id;
    std::filesystem::create_directories(inst_dir);
    write_cloud(inst_dir / "gt.pcw", record.gt_canonical);
    json manifest;
    manifest["id"] = record.id;
    manifest["shape_kind"] = to_string(record.kind);
    manifest["gt"] = "gt.pcw";
    manifest["views"] = json::array();
    for (std::size_t v = 0; v < record.views.size(); ++v) {
      const std::string file = view_file_name(v);
      write_cloud(inst_dir / file, record.views[v].scan);
      manifest["views"].push_back(pose_to_json(record.views[v], file));
    }
    store_json(manifest, inst_dir / "manifest.json");
  }
}

std::vector<InstanceRecord> read_dataset(const std::filesystem::path& dir) {
  const json index = load_json(dir / "index.json");
  if (!index.contains("format_version") || index["format_version"].get<int>() != kIndexVersion)
    throw FormatVersionMismatch("read_dataset: unsupported index version in " + dir.string());

  std::vector<InstanceRecord> records;
  for (const auto& id_json : index.at("instances")) {
    const std::string id = id_json.get<std::string>();
    const std::filesystem::path inst_dir = dir / id;
    const json manifest = load_json(inst_dir / "manifest.json");
    InstanceRecord record;
    record.id = manifest.at("id").get<std::string>();
    if (record.id != id)
      throw IoError("read_dataset: manifest id mismatch under " + inst_dir.string());
    record.kind = shape_kind_from_string(manifest.at("shape_kind").get<std::string>());
    record.gt_canonical = read_cloud(inst_dir / manifest.at("gt").get<std::string>());
    for (const auto& vj : manifest.at("views")) {
      ViewRecord view;
      const auto rotation = vj.at("rotation").get<std::vector<double>>();
      if (rotation.size() != 9) throw IoError("read_dataset: bad rotation in " + inst_dir.string());
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          view.pose.R(r, c) = static_cast<float>(rotation[static_cast<std::size_t>(3 * r + c)]);
      const auto translation = vj.at("translation").get<std::vector<double>>();
      if (translation.size() != 3)
        throw IoError("read_dataset: bad translation in " + inst_dir.string());
      for (int c = 0; c < 3; ++c) view.pose.t[c] = static_cast<float>(translation[static_cast<std::size_t>(c)]);
      view.res.d_phi = static_cast<float>(vj.at("d_phi").get<double>());
      view.res.d_theta = static_cast<float>(vj.at("d_theta").get<double>());
      view.noise_sigma = static_cast<float>(vj.at("noise_sigma").get<double>());
      view.scan = read_cloud(inst_dir / vj.at("scan").get<std::string>());
      record.views.push_back(std::move(view));
    }
    records.push_back(std::move(record));
  }
  return records;
}

DatasetSplits split_dataset(const std::vector<InstanceRecord>& records, double train_frac,
                            double val_frac, double test_frac, RngStream& rng) {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw BadFractions("split_dataset: fractions must be non-negative and sum to 1");
  std::vector<std::string> ids;
  for (const auto& record : records) ids.push_back(record.id);
  rng.shuffle(ids.begin(), ids.end());
  const auto n = static_cast<double>(ids.size());
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * n));
  const auto n_train_val = static_cast<std::size_t>(std::llround((train_frac + val_frac) * n));
  DatasetSplits splits;
  splits.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  splits.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                    ids.begin() + static_cast<std::ptrdiff_t>(n_train_val));
  splits.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train_val), ids.end());
  return splits;
}

void write_splits(const DatasetSplits& splits, const std::filesystem::path& dir) {
  json j;
  j["train"] = splits.train;
  j["val"] = splits.val;
  j["test"] = splits.test;
  store_json(j, dir / "splits.json");
}

DatasetSplits read_splits(const std::filesystem::path& dir) {
  const json j = load_json(dir / "splits.json");
  DatasetSplits splits;
  splits.train = j.at("train").get<std::vector<std::string>>();
  splits.val = j.at("val").get<std::vector<std::string>>();
  splits.test = j.at("test").get<std::vector<std::string>>();
  return splits;
}

std::vector<const InstanceRecord*> select_instances(const std::vector<InstanceRecord>& records,
                                                    const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const InstanceRecord*> by_id;
  for (const auto& record : records) by_id[record.id] = &record;
  std::vector<const InstanceRecord*> out;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw IoError("select_instances: unknown id " + id);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace pcw
