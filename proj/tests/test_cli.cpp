#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Each invocation runs in its own working directory so relative artifact
// paths never collide between cases.
int run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd =
      "cd " + cwd.string() + " && " + PCW_CLI_PATH + " " + args + " >cli_stdout.txt 2>cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Tiny preset shrunk further so every case stays sub-second.
const std::string kFast =
    "--preset tiny --set optimizer.steps=8 --set optimizer.batch_instances=1 "
    "--set optimizer.views_per_instance=1";

}  // namespace

TEST_CASE("gen-data writes a dataset, splits, and a config echo") {
  const fs::path dir = fresh_dir("pcw_cli_gen");
  REQUIRE(run_cli(dir, "gen-data --preset tiny --seed 5 --dataset d") == 0);
  CHECK(fs::exists(dir / "d" / "index.json"));
  CHECK(fs::exists(dir / "d" / "splits.json"));
  CHECK(fs::exists(dir / "d" / "inst_0000" / "manifest.json"));
  const auto echo = json::parse(slurp(dir / "d" / "gen_config.json"));
  CHECK(echo.at("seed") == 5);
  CHECK(echo.at("preset") == "tiny");

  // Same seed elsewhere: every dataset byte matches.
  const fs::path dir2 = fresh_dir("pcw_cli_gen2");
  REQUIRE(run_cli(dir2, "gen-data --preset tiny --seed 5 --dataset d") == 0);
  for (const auto& entry : fs::recursive_directory_iterator(dir / "d")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "d");
    CAPTURE(rel.string());
    CHECK(slurp(entry.path()) == slurp(dir2 / "d" / rel));
  }
}

TEST_CASE("invalid configs exit 2 before any work") {
  const fs::path dir = fresh_dir("pcw_cli_bad");
  CHECK(run_cli(dir, "gen-data --preset nope") == 2);
  CHECK(run_cli(dir, "gen-data --preset tiny --set data.train_frac=0.95 --dataset d") == 2);
  CHECK(run_cli(dir, "gen-data --preset tiny --set data.bogus=1 --dataset d") == 2);
  CHECK(run_cli(dir, "eval --no-such-flag") == 2);
  CHECK(!fs::exists(dir / "d"));  // rejected before writing
  CHECK(run_cli(dir, "--help") == 0);
}

TEST_CASE("train, eval, and the baseline run end to end") {
  const fs::path dir = fresh_dir("pcw_cli_pipeline");
  REQUIRE(run_cli(dir, "gen-data --preset tiny --seed 5 --dataset d") == 0);
  REQUIRE(run_cli(dir, "train " + kFast + " --seed 5 --dataset d --checkpoint c.pcw") == 0);
  CHECK(fs::exists(dir / "c.pcw"));
  CHECK(fs::exists(dir / "c.pcw.log"));
  CHECK(fs::exists(dir / "c.pcw.config.json"));

  // Retraining from scratch reproduces the checkpoint byte for byte.
  REQUIRE(run_cli(dir, "train " + kFast + " --seed 5 --dataset d --checkpoint c2.pcw") == 0);
  CHECK(slurp(dir / "c.pcw") == slurp(dir / "c2.pcw"));

  REQUIRE(run_cli(dir, "eval " + kFast +
                           " --seed 5 --dataset d --checkpoint c.pcw --report r.json "
                           "--csv r.csv") == 0);
  const auto report = json::parse(slurp(dir / "r.json"));
  CHECK(report.at("method") == "ours");
  CHECK(report.at("seed") == 5);
  CHECK(report.contains("config"));
  CHECK(report.contains("completion"));
  CHECK(report.contains("registration"));
  CHECK(report.contains("per_instance"));
  CHECK(report.at("completion").at("mean_over_views").at("cd").get<double>() > 0.0);
  const std::string csv = slurp(dir / "r.csv");
  CHECK(csv.rfind("instance_id,view_id,cd,precision,coverage,angle_deg,trans_mse", 0) == 0);

  // The registration-only command and the baseline share the report schema.
  REQUIRE(run_cli(dir, "eval-registration " + kFast +
                           " --seed 5 --dataset d --checkpoint c.pcw --report rr.json") == 0);
  const auto rr = json::parse(slurp(dir / "rr.json"));
  CHECK(rr.at("completion").is_null());
  CHECK(rr.at("registration").contains("accuracy_at_30deg"));

  REQUIRE(run_cli(dir, "icp-baseline --preset tiny --seed 5 --dataset d --report ri.json") == 0);
  const auto ri = json::parse(slurp(dir / "ri.json"));
  CHECK(ri.at("method") == "icp");
  CHECK(ri.at("completion").contains("mean_over_views"));
  CHECK(ri.at("registration").contains("accuracy_at_30deg"));
}

TEST_CASE("gt-pose pass-through scores perfect registration") {
  const fs::path dir = fresh_dir("pcw_cli_gt");
  REQUIRE(run_cli(dir, "gen-data --preset tiny --seed 6 --dataset d") == 0);
  REQUIRE(run_cli(dir,
                  "eval-registration --preset tiny --seed 6 --dataset d --gt-poses "
                  "--report g.json") == 0);
  const auto report = json::parse(slurp(dir / "g.json"));
  CHECK(report.at("method") == "gt-poses");
  CHECK(report.at("registration").at("accuracy_at_30deg").get<double>() == 1.0);
  CHECK(report.at("registration").at("median_angle_deg").get<double>() <= 1e-4);
  CHECK(report.at("registration").at("median_translation_mse").get<double>() <= 1e-10);
}

TEST_CASE("runtime failures exit 3") {
  const fs::path dir = fresh_dir("pcw_cli_runtime");
  REQUIRE(run_cli(dir, "gen-data --preset tiny --seed 5 --dataset d") == 0);
  CHECK(run_cli(dir, "eval --preset tiny --dataset d --checkpoint missing.pcw") == 3);
  CHECK(run_cli(dir, "train --preset tiny --dataset not_generated") == 3);
}
