#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcw/data/dataset.hpp"
#include "pcw/geometry.hpp"

namespace pcw {

/// Completion metrics. `precision` is the prediction-to-GT direction of the
/// chamfer distance, `coverage` the GT-to-prediction direction, and
/// cd = precision + coverage. All in meters (mean point-to-NN distance).
struct CompletionRow {
  std::string instance_id;
  int view_id = 0;
  double cd = 0, precision = 0, coverage = 0;
};

struct CompletionAggregate {
  double cd = 0, precision = 0, coverage = 0;
};

struct CompletionReport {
  std::vector<CompletionRow> per_view;
  std::vector<std::pair<std::string, CompletionAggregate>> per_instance;
  CompletionAggregate mean_over_views;
  /// Mean of per-instance means — both aggregations reported since they
  /// differ whenever view counts differ across instances.
  CompletionAggregate mean_over_instances;
};

/// Registration metrics for one (source view, target view) pair within an
/// instance. Failed pairs (an unaligned baseline view) carry no numbers but
/// still count toward the accuracy denominator.
struct RegistrationRow {
  std::string instance_id;
  int view_id = 0;
  bool failed = false;
  double angle_deg = 0;
  double trans_mse = 0;  // squared L2 norm of the translation residual, m^2
};

struct RegistrationReport {
  std::vector<RegistrationRow> per_view;
  double accuracy_at_30deg = 0;        // failures count against it
  double median_angle_deg = 0;         // over successful pairs
  double median_translation_mse = 0;   // over successful pairs
  std::vector<std::string> failures;   // "instance_id/view_index"
};

/// Per-view sensor-frame shape predictions, keyed by instance id. Each entry
/// must hold exactly one cloud per view of that instance.
using CompletionPredictions = std::unordered_map<std::string, std::vector<Points3f>>;

/// Per-view canonical-to-sensor poses, keyed by instance id.
using PosePredictions = std::unordered_map<std::string, std::vector<Pose<float>>>;

/// Per-view poses into the instance's target frame; nullopt marks a view the
/// method failed to align. The target view's own entry is ignored.
using RelativePosePredictions =
    std::unordered_map<std::string, std::vector<std::optional<Pose<float>>>>;

/// Index of the target (reference) view used for registration pairs.
inline std::size_t target_view(std::size_t n_views) { return (n_views - 1) / 2; }

/// The accuracy threshold is inclusive: a pair off by exactly 30 degrees
/// still counts as registered.
inline bool within_30deg(double angle_deg) { return angle_deg <= 30.0; }

/// Which frame completion predictions live in. kSensor compares against the
/// posed ground truth of each view; kCanonical compares against the canonical
/// ground truth (used for the supervised oracle, which never predicts poses).
enum class CompletionFrame { kSensor, kCanonical };

/// Symmetric chamfer of every predicted cloud against the ground truth of its
/// view, in the chosen frame.
CompletionReport eval_completion(const std::vector<const InstanceRecord*>& dataset,
                                 const CompletionPredictions& preds,
                                 CompletionFrame frame = CompletionFrame::kSensor);

/// Registration metrics from canonical-to-sensor poses: the prediction for a
/// source/target pair is T_tgt * T_src^-1, compared against the same
/// composition of generator poses.
RegistrationReport eval_registration(const std::vector<const InstanceRecord*>& dataset,
                                     const PosePredictions& preds);

/// Same metrics, but the predictions are already relative poses into the
/// target frame (the ICP baseline's native output).
RegistrationReport eval_registration_relative(const std::vector<const InstanceRecord*>& dataset,
                                              const RelativePosePredictions& preds);

struct ReportMeta {
  std::string method;       // "ours" | "icp" | "oracle" | "gt-poses"
  std::uint64_t seed = 0;
  std::string config_json;  // echoed verbatim into the report ("{}" if none)
};

/// JSON report: {config, seed, method, git_describe, timestamp, completion,
/// registration, per_instance}. Deterministic bytes apart from `timestamp`.
/// Either section pointer may be null.
void write_report(const std::filesystem::path& path, const ReportMeta& meta,
                  const CompletionReport* completion, const RegistrationReport* registration);

/// Flat CSV: instance_id, view_id, cd, precision, coverage, angle_deg,
/// trans_mse. Cells a view has no number for stay empty.
void write_report_csv(const std::filesystem::path& path, const CompletionReport* completion,
                      const RegistrationReport* registration);

}  // namespace pcw
