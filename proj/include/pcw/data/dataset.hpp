#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcw/common.hpp"
#include "pcw/data/shapes.hpp"
#include "pcw/geometry.hpp"
#include "pcw/projection.hpp"
#include "pcw/rng.hpp"

namespace pcw {

struct ViewRecord {
  Pose<float> pose;  // canonical -> sensor (the sensor sits at the origin)
  Points3f scan;     // sensor frame
  GridResolution<float> res{0.0f, 0.0f};
  float noise_sigma = 0.0f;
};

struct InstanceRecord {
  std::string id;
  ShapeKind kind = ShapeKind::kBoxComposite;
  Points3f gt_canonical;
  std::vector<ViewRecord> views;
};

/// `kWide` draws every view independently (drive-by statistics); `kWalk`
/// makes consecutive views differ by sub-degree, centimeter-scale motion so
/// frame-to-frame ICP has an honest chance.
enum class PoseMode { kWide, kWalk };

struct PoseDistribution {
  PoseMode mode = PoseMode::kWide;
  float distance_min = 5.0f;   // meters to the object center
  float distance_max = 30.0f;
  float pitch_jitter = 0.12f;  // radians, +- range
  float lateral_jitter = 1.0f; // meters, x offset of the object center
  float height_jitter = 0.5f;  // meters, z offset

  float walk_distance_min = 5.0f;
  float walk_distance_max = 10.0f;
  float walk_yaw_step_min = 0.0104720f;  // 0.6 degrees
  float walk_yaw_step_max = 0.0244346f;  // 1.4 degrees
  float walk_distance_step = 0.05f;
  float walk_jitter = 0.02f;
};

struct DataConfig {
  int instances = 270;
  int views = 12;
  int gt_points = 8192;
  float noise_sigma = 0.03f;
  GridResolution<float> res{0.0087266462f, 0.0087266462f};  // 0.5 degree bins
  int min_points = 100;
  int max_retries = 20;
  bool fore_aft_symmetric = false;
  PoseDistribution poses;
};

/// Simulates M scans of one ground-truth cloud at distinct poses. Views that
/// come back with fewer than min_points points are redrawn; the retry budget
/// is per view.
InstanceRecord gen_instance(const std::string& id, ShapeKind kind, Points3f gt_canonical,
                            int n_views, const PoseDistribution& poses,
                            const GridResolution<float>& res, float noise_sigma, RngStream& rng,
                            int min_points = 100, int max_retries = 20);

/// Full corpus: shape kind, proportions and scans all drawn from per-instance
/// streams derived from the seed, so any instance can be regenerated alone.
std::vector<InstanceRecord> gen_dataset(const DataConfig& config, std::uint64_t seed);

/// One directory per instance (manifest.json + binary clouds) plus a root
/// index listing instances in order; read(write(d)) is bit-exact.
void write_dataset(const std::vector<InstanceRecord>& records, const std::filesystem::path& dir);
std::vector<InstanceRecord> read_dataset(const std::filesystem::path& dir);

struct DatasetSplits {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Partition by instance id; fractions must be non-negative and sum to 1.
DatasetSplits split_dataset(const std::vector<InstanceRecord>& records, double train_frac,
                            double val_frac, double test_frac, RngStream& rng);

void write_splits(const DatasetSplits& splits, const std::filesystem::path& dir);
DatasetSplits read_splits(const std::filesystem::path& dir);

/// The subset of records whose id is in `ids`, in `ids` order.
std::vector<const InstanceRecord*> select_instances(const std::vector<InstanceRecord>& records,
                                                    const std::vector<std::string>& ids);

}  // namespace pcw
