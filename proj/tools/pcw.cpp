#include <CLI11.hpp>
#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "pcw/baseline/icp.hpp"
#include "pcw/config.hpp"
#include "pcw/eval.hpp"
#include "pcw/nn/checkpoint.hpp"
#include "pcw/nn/network.hpp"
#include "pcw/train.hpp"

namespace fs = std::filesystem;
using namespace pcw;

namespace {

struct CommonFlags {
  std::string config_file;
  std::string preset;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string dataset;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "tiny | desk | ablation");
  cmd->add_option("--set", f.sets, "key.path=value override; wins over the config file")
      ->take_all();
  cmd->add_option("--seed", f.seed, "root seed; every random decision derives from it");
  cmd->add_option("--threads", f.threads, "worker thread cap (1 = bit-reproducible)");
  cmd->add_option("--dataset", f.dataset, "dataset directory (overrides the config)");
}

/// Flags are translated to overrides so precedence stays in one place:
/// preset < config file < --set < dedicated flags.
RunConfig resolve(const CommonFlags& f) {
  std::string text;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + f.config_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  std::vector<std::string> sets = f.sets;
  if (f.seed) sets.push_back("seed=" + std::to_string(*f.seed));
  if (f.threads) sets.push_back("threads=" + std::to_string(*f.threads));
  if (!f.dataset.empty()) sets.push_back("dataset_dir=" + nlohmann::json(f.dataset).dump());
  RunConfig config = parse_run_config(text, f.preset, sets);
  Eigen::setNbThreads(config.threads);
  std::cout << "effective config:\n" << config.effective_json << "\n";
  return config;
}

std::vector<const InstanceRecord*> eval_subset(const RunConfig& config,
                                               const std::vector<InstanceRecord>& records,
                                               const DatasetSplits& splits) {
  const auto& ids = config.eval_split == "train" ? splits.train
                    : config.eval_split == "val" ? splits.val
                                                 : splits.test;
  if (ids.empty()) throw ConfigError("eval split \"" + config.eval_split + "\" is empty");
  return select_instances(records, ids);
}

void write_config_echo(const fs::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << config.effective_json << "\n";
}

int cmd_gen_data(const RunConfig& config) {
  const fs::path dir = config.dataset_dir;
  const auto records = gen_dataset(config.data, config.seed);
  write_dataset(records, dir);
  RngStream rng = derive_stream(config.seed, {kTagSplit});
  const auto splits =
      split_dataset(records, config.train_frac, config.val_frac, config.test_frac, rng);
  write_splits(splits, dir);
  write_config_echo(dir / "gen_config.json", config);
  std::size_t views = 0;
  for (const auto& record : records) views += record.views.size();
  std::cout << "wrote " << records.size() << " instances (" << views << " views) to " << dir
            << "\nsplits: train " << splits.train.size() << ", val " << splits.val.size()
            << ", test " << splits.test.size() << "\n";
  return 0;
}

int cmd_train(const RunConfig& config, bool oracle, bool resume, const std::string& checkpoint,
              std::string log) {
  if (log.empty()) log = checkpoint + ".log";
  const auto records = read_dataset(config.dataset_dir);
  const auto splits = read_splits(config.dataset_dir);
  if (splits.train.empty()) throw ConfigError("train split is empty");
  const auto train_set = select_instances(records, splits.train);

  auto params = make_network<float>(config.network, config.seed);
  Adam<float> adam(params, AdamConfig<float>{});
  if (resume) {
    const std::uint64_t at = load_checkpoint(checkpoint, params, &adam);
    std::cout << "resuming " << checkpoint << " at step " << at << "\n";
  }
  TrainConfig tc = config.train;
  tc.checkpoint_path = checkpoint;
  tc.log_path = log;
  const std::uint64_t done = oracle ? train_supervised_oracle(params, adam, train_set, tc)
                                    : train_weak(params, adam, train_set, tc);
  write_config_echo(checkpoint + ".config.json", config);
  std::cout << (oracle ? "oracle" : "weak") << " training reached step " << done << " on "
            << train_set.size() << " instances\ncheckpoint: " << checkpoint << "\nlog: " << log
            << "\n";
  return 0;
}

void print_completion_summary(const CompletionReport& report) {
  std::cout << "completion: cd " << report.mean_over_views.cd << " (precision "
            << report.mean_over_views.precision << ", coverage "
            << report.mean_over_views.coverage << ") over " << report.per_view.size()
            << " views\n";
}

void print_registration_summary(const RegistrationReport& report) {
  std::cout << "registration: accuracy@30deg " << report.accuracy_at_30deg << ", median angle "
            << report.median_angle_deg << " deg, median translation mse "
            << report.median_translation_mse << ", failures " << report.failures.size() << "\n";
}

/// Shared by eval-completion and eval-registration; `completion` toggles the
/// completion section, `canonical` evaluates shapes in the canonical frame
/// (the supervised oracle never learns poses).
int cmd_eval(const RunConfig& config, const std::string& checkpoint, const std::string& report,
             const std::string& csv, bool completion_section, bool canonical, bool gt_poses) {
  const auto records = read_dataset(config.dataset_dir);
  const auto subset = eval_subset(config, records, read_splits(config.dataset_dir));

  CompletionPredictions shapes;
  PosePredictions poses;
  if (gt_poses) {
    for (const InstanceRecord* record : subset) {
      auto& p = poses[record->id];
      for (const auto& view : record->views) p.push_back(view.pose);
    }
  } else {
    auto params = make_network<float>(config.network, config.seed);
    const std::uint64_t step = load_checkpoint(checkpoint, params);
    std::cout << "checkpoint " << checkpoint << " (step " << step << ")\n";
    for (std::size_t i = 0; i < subset.size(); ++i) {
      const InstanceRecord* record = subset[i];
      for (std::size_t v = 0; v < record->views.size(); ++v) {
        RngStream rng = derive_stream(config.seed, {kTagEval, i, v});
        auto result = infer(params, record->views[v].scan, rng);
        shapes[record->id].push_back(canonical ? std::move(result.canonical)
                                               : std::move(result.completed));
        poses[record->id].push_back(result.pose);
      }
    }
  }

  std::optional<CompletionReport> completion;
  if (completion_section)
    completion = eval_completion(
        subset, shapes, canonical ? CompletionFrame::kCanonical : CompletionFrame::kSensor);
  const RegistrationReport registration = eval_registration(subset, poses);

  const std::string method = gt_poses ? "gt-poses" : canonical ? "oracle" : "ours";
  write_report(report, {method, config.seed, config.effective_json},
               completion ? &*completion : nullptr, &registration);
  if (!csv.empty())
    write_report_csv(csv, completion ? &*completion : nullptr, &registration);

  std::cout << "evaluated " << subset.size() << " " << config.eval_split << " instances ("
            << method << ")\n";
  if (completion) print_completion_summary(*completion);
  print_registration_summary(registration);
  std::cout << "report: " << report << "\n";
  return 0;
}

int cmd_icp(const RunConfig& config, const std::string& report, const std::string& csv) {
  const auto records = read_dataset(config.dataset_dir);
  const auto subset = eval_subset(config, records, read_splits(config.dataset_dir));

  CompletionPredictions shapes;
  RelativePosePredictions relative;
  for (const InstanceRecord* record : subset) {
    std::vector<Points3<double>> views;
    views.reserve(record->views.size());
    for (const auto& view : record->views) views.push_back(view.scan.cast<double>());
    const AccumulatedPoses<double> acc = accumulate_poses(views, config.icp);

    std::vector<Points3<double>> aligned;
    std::vector<Pose<double>> aligned_poses;
    for (std::size_t v = 0; v < views.size(); ++v)
      if (acc.poses[v]) {
        aligned.push_back(views[v]);
        aligned_poses.push_back(*acc.poses[v]);
      }
    const Points3<double> fused = fuse_clouds(aligned, aligned_poses);

    auto& rel = relative[record->id];
    auto& comp = shapes[record->id];
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (acc.poses[v]) {
        rel.emplace_back(
            Pose<float>{acc.poses[v]->R.cast<float>(), acc.poses[v]->t.cast<float>()});
        // The fused cloud carried into this view's frame is ICP's completion.
        comp.push_back(acc.poses[v]->inverse().apply(fused).cast<float>());
      } else {
        // Unaligned view: the raw partial scan is the only honest prediction.
        rel.emplace_back(std::nullopt);
        comp.push_back(record->views[v].scan);
      }
    }
  }

  const CompletionReport completion = eval_completion(subset, shapes);
  const RegistrationReport registration = eval_registration_relative(subset, relative);
  write_report(report, {"icp", config.seed, config.effective_json}, &completion, &registration);
  if (!csv.empty()) write_report_csv(csv, &completion, &registration);

  std::cout << "icp baseline over " << subset.size() << " " << config.eval_split
            << " instances\n";
  print_completion_summary(completion);
  print_registration_summary(registration);
  std::cout << "report: " << report << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly-supervised shape completion and registration from partial scans"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string checkpoint = "checkpoint.pcw";
  std::string log;
  std::string report = "report.json";
  std::string csv;
  bool oracle = false, resume = false, gt_poses = false;
  std::string frame = "sensor";

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset plus splits");
  add_common(gen, flags);

  CLI::App* train = app.add_subcommand("train", "train on the dataset's train split");
  add_common(train, flags);
  train->add_option("--checkpoint", checkpoint, "checkpoint path (written during training)");
  train->add_option("--log", log, "per-step csv log (default: <checkpoint>.log)");
  train->add_flag("--oracle", oracle, "train the fully supervised reference instead");
  train->add_flag("--resume", resume, "continue from the checkpoint (bit-identical)");

  CLI::App* evalc = app.add_subcommand("eval-completion",
                                       "evaluate completion and registration on a split");
  evalc->alias("eval");
  add_common(evalc, flags);
  evalc->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  evalc->add_option("--report", report, "JSON report path");
  evalc->add_option("--csv", csv, "optional per-view csv path");
  evalc->add_option("--frame", frame, "completion frame: sensor | canonical (oracle)")
      ->check(CLI::IsMember({"sensor", "canonical"}));

  CLI::App* evalr = app.add_subcommand("eval-registration", "evaluate registration only");
  add_common(evalr, flags);
  evalr->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  evalr->add_option("--report", report, "JSON report path");
  evalr->add_option("--csv", csv, "optional per-view csv path");
  evalr->add_flag("--gt-poses", gt_poses,
                  "score the generator's own poses (pipeline self-check; must be perfect)");

  CLI::App* icp = app.add_subcommand("icp-baseline", "ICP accumulate-and-fuse baseline");
  add_common(icp, flags);
  icp->add_option("--report", report, "JSON report path");
  icp->add_option("--csv", csv, "optional per-view csv path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunConfig config;
  try {
    config = resolve(flags);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config);
    if (train->parsed()) return cmd_train(config, oracle, resume, checkpoint, log);
    if (evalc->parsed())
      return cmd_eval(config, checkpoint, report, csv, true, frame == "canonical", false);
    if (evalr->parsed()) return cmd_eval(config, checkpoint, report, csv, false, false, gt_poses);
    if (icp->parsed()) return cmd_icp(config, report, csv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const BadFractions& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
