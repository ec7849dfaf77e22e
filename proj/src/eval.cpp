#include "pcw/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numbers>

#include "pcw/chamfer.hpp"

namespace pcw {

namespace {

using nlohmann::json;

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json aggregate_to_json(const CompletionAggregate& a) {
  return json{{"cd", a.cd}, {"precision", a.precision}, {"coverage", a.coverage}};
}

}  // namespace

CompletionReport eval_completion(const std::vector<const InstanceRecord*>& dataset,
                                 const CompletionPredictions& preds, CompletionFrame frame) {
  CompletionReport report;
  CompletionAggregate view_sum;
  CompletionAggregate instance_sum;
  std::size_t n_views = 0;
  for (const InstanceRecord* record : dataset) {
    const auto it = preds.find(record->id);
    if (it == preds.end())
      throw MissingPrediction("eval_completion: no predictions for " + record->id);
    if (it->second.size() != record->views.size())
      throw MissingPrediction("eval_completion: " + record->id + " needs " +
                              std::to_string(record->views.size()) + " predictions, got " +
                              std::to_string(it->second.size()));
    CompletionAggregate inst_sum;
    for (std::size_t v = 0; v < record->views.size(); ++v) {
      if (it->second[v].rows() == 0)
        throw MissingPrediction("eval_completion: empty prediction for " + record->id);
      // Posed GT built in float exactly as the generator would, so a perfect
      // prediction scores an exact zero.
      const Points3<double> gt =
          frame == CompletionFrame::kSensor
              ? Points3<double>(record->views[v].pose.apply(record->gt_canonical).cast<double>())
              : Points3<double>(record->gt_canonical.cast<double>());
      const auto m = chamfer_symmetric<double>(it->second[v].cast<double>(), gt);
      report.per_view.push_back(
          {record->id, static_cast<int>(v), m.cd, m.precision, m.coverage});
      inst_sum.cd += m.cd;
      inst_sum.precision += m.precision;
      inst_sum.coverage += m.coverage;
    }
    const double inv = 1.0 / static_cast<double>(record->views.size());
    const CompletionAggregate inst_mean{inst_sum.cd * inv, inst_sum.precision * inv,
                                        inst_sum.coverage * inv};
    report.per_instance.emplace_back(record->id, inst_mean);
    view_sum.cd += inst_sum.cd;
    view_sum.precision += inst_sum.precision;
    view_sum.coverage += inst_sum.coverage;
    instance_sum.cd += inst_mean.cd;
    instance_sum.precision += inst_mean.precision;
    instance_sum.coverage += inst_mean.coverage;
    n_views += record->views.size();
  }
  if (n_views > 0) {
    const double iv = 1.0 / static_cast<double>(n_views);
    report.mean_over_views = {view_sum.cd * iv, view_sum.precision * iv, view_sum.coverage * iv};
    const double ii = 1.0 / static_cast<double>(dataset.size());
    report.mean_over_instances = {instance_sum.cd * ii, instance_sum.precision * ii,
                                  instance_sum.coverage * ii};
  }
  return report;
}

RegistrationReport eval_registration(const std::vector<const InstanceRecord*>& dataset,
                                     const PosePredictions& preds) {
  RelativePosePredictions relative;
  for (const InstanceRecord* record : dataset) {
    const auto it = preds.find(record->id);
    if (it == preds.end())
      throw MissingPrediction("eval_registration: no poses for " + record->id);
    if (it->second.size() != record->views.size())
      throw MissingPrediction("eval_registration: " + record->id + " needs " +
                              std::to_string(record->views.size()) + " poses, got " +
                              std::to_string(it->second.size()));
    const std::size_t tgt = target_view(record->views.size());
    std::vector<std::optional<Pose<float>>> rel;
    for (std::size_t v = 0; v < record->views.size(); ++v)
      rel.emplace_back(it->second[tgt] * it->second[v].inverse());
    relative.emplace(record->id, std::move(rel));
  }
  return eval_registration_relative(dataset, relative);
}

RegistrationReport eval_registration_relative(const std::vector<const InstanceRecord*>& dataset,
                                              const RelativePosePredictions& preds) {
  RegistrationReport report;
  std::vector<double> angles, trans;
  std::size_t pairs = 0, hits = 0;
  for (const InstanceRecord* record : dataset) {
    const auto it = preds.find(record->id);
    if (it == preds.end())
      throw MissingPrediction("eval_registration: no poses for " + record->id);
    if (it->second.size() != record->views.size())
      throw MissingPrediction("eval_registration: " + record->id + " pose count mismatch");
    const std::size_t tgt = target_view(record->views.size());
    const Pose<float>& gt_tgt = record->views[tgt].pose;
    for (std::size_t v = 0; v < record->views.size(); ++v) {
      if (v == tgt) continue;
      ++pairs;
      if (!it->second[v]) {
        report.per_view.push_back({record->id, static_cast<int>(v), true, 0, 0});
        report.failures.push_back(record->id + "/" + std::to_string(v));
        continue;
      }
      const Pose<float> gt_rel = gt_tgt * record->views[v].pose.inverse();
      const Pose<float>& pred = *it->second[v];
      const double angle_deg =
          angle_between(pred.R.cast<double>().eval(), gt_rel.R.cast<double>().eval()) * 180.0 /
          std::numbers::pi;
      const double t_mse = (pred.t - gt_rel.t).cast<double>().squaredNorm();
      report.per_view.push_back({record->id, static_cast<int>(v), false, angle_deg, t_mse});
      angles.push_back(angle_deg);
      trans.push_back(t_mse);
      if (within_30deg(angle_deg)) ++hits;
    }
  }
  report.accuracy_at_30deg =
      pairs == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(pairs);
  report.median_angle_deg = median(angles);
  report.median_translation_mse = median(trans);
  return report;
}

void write_report(const std::filesystem::path& path, const ReportMeta& meta,
                  const CompletionReport* completion, const RegistrationReport* registration) {
  json j;
  try {
    j["config"] = meta.config_json.empty() ? json::object() : json::parse(meta.config_json);
  } catch (const json::exception& e) {
    throw IoError(std::string("write_report: bad config echo: ") + e.what());
  }
  j["seed"] = meta.seed;
  j["method"] = meta.method;
  j["git_describe"] = PCW_GIT_DESCRIBE;
  j["timestamp"] = utc_timestamp();
  // Fixed schema: a section a method does not produce is null, not absent.
  j["completion"] = nullptr;
  j["registration"] = nullptr;

  // Per-instance rows, merged across both metric families.
  std::map<std::string, json> instances;
  if (completion) {
    json c;
    c["mean_over_views"] = aggregate_to_json(completion->mean_over_views);
    c["mean_over_instances"] = aggregate_to_json(completion->mean_over_instances);
    c["views"] = completion->per_view.size();
    j["completion"] = c;
    for (const auto& [id, agg] : completion->per_instance)
      instances[id]["completion"] = aggregate_to_json(agg);
  }
  if (registration) {
    json r;
    r["accuracy_at_30deg"] = registration->accuracy_at_30deg;
    r["median_angle_deg"] = registration->median_angle_deg;
    r["median_translation_mse"] = registration->median_translation_mse;
    r["pairs"] = registration->per_view.size();
    r["failures"] = registration->failures;
    j["registration"] = r;
    std::map<std::string, std::vector<const RegistrationRow*>> rows;
    for (const auto& row : registration->per_view) rows[row.instance_id].push_back(&row);
    for (const auto& [id, list] : rows) {
      std::vector<double> angles, trans;
      std::size_t fails = 0;
      for (const RegistrationRow* row : list) {
        if (row->failed) {
          ++fails;
          continue;
        }
        angles.push_back(row->angle_deg);
        trans.push_back(row->trans_mse);
      }
      json r_inst;
      r_inst["median_angle_deg"] = median(angles);
      r_inst["median_translation_mse"] = median(trans);
      r_inst["failed_pairs"] = fails;
      instances[id]["registration"] = r_inst;
    }
  }
  j["per_instance"] = json::object();
  for (auto& [id, row] : instances) j["per_instance"][id] = std::move(row);

  std::ofstream os(path);
  if (!os) throw IoError("write_report: cannot open " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write_report: write failed for " + path.string());
}

void write_report_csv(const std::filesystem::path& path, const CompletionReport* completion,
                      const RegistrationReport* registration) {
  // Merge the two per-view tables on (instance, view).
  struct Cells {
    const CompletionRow* completion = nullptr;
    const RegistrationRow* registration = nullptr;
  };
  std::map<std::pair<std::string, int>, Cells> rows;
  if (completion)
    for (const auto& row : completion->per_view)
      rows[{row.instance_id, row.view_id}].completion = &row;
  if (registration)
    for (const auto& row : registration->per_view)
      rows[{row.instance_id, row.view_id}].registration = &row;

  std::ofstream os(path);
  if (!os) throw IoError("write_report_csv: cannot open " + path.string());
  os << "instance_id,view_id,cd,precision,coverage,angle_deg,trans_mse\n";
  char buf[64];
  const auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& [key, cells] : rows) {
    os << key.first << ',' << key.second << ',';
    if (cells.completion)
      os << num(cells.completion->cd) << ',' << num(cells.completion->precision) << ','
         << num(cells.completion->coverage);
    else
      os << ",,";
    os << ',';
    if (cells.registration && !cells.registration->failed)
      os << num(cells.registration->angle_deg) << ',' << num(cells.registration->trans_mse);
    else
      os << ',';
    os << '\n';
  }
  if (!os) throw IoError("write_report_csv: write failed for " + path.string());
}

}  // namespace pcw
