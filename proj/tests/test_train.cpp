#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "pcw/nn/checkpoint.hpp"
#include "pcw/train.hpp"

using namespace pcw;
namespace fs = std::filesystem;

namespace {

NetConfig tiny_net() {
  NetConfig c;
  c.input_points = 128;
  c.output_points = 128;
  c.latent = 32;
  c.encoder_widths = {16, 32};
  c.shape_widths = {32, 64};
  c.pose_widths = {16, 16};
  c.branches = 1;
  return c;
}

std::vector<InstanceRecord> one_instance_dataset(std::uint64_t seed) {
  DataConfig config;
  config.instances = 1;
  config.views = 1;
  config.gt_points = 2048;
  config.noise_sigma = 0.0f;
  return gen_dataset(config, seed);
}

std::vector<const InstanceRecord*> pointers(const std::vector<InstanceRecord>& records) {
  std::vector<const InstanceRecord*> out;
  for (const auto& record : records) out.push_back(&record);
  return out;
}

bool params_equal(const NetworkParams<float>& a, const NetworkParams<float>& b) {
  bool equal = true;
  std::vector<const MatX<float>*> blocks;
  a.for_each_block([&](const std::string&, const MatX<float>& m) { blocks.push_back(&m); });
  std::size_t i = 0;
  b.for_each_block([&](const std::string&, const MatX<float>& m) {
    if (std::memcmp(blocks[i]->data(), m.data(),
                    sizeof(float) * static_cast<std::size_t>(m.size())) != 0)
      equal = false;
    ++i;
  });
  return equal;
}

TrainConfig quick_config(int steps, std::uint64_t seed) {
  TrainConfig c;
  c.steps = steps;
  c.batch_instances = 1;
  c.views_per_instance = 1;
  c.lr = 1e-3f;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("weak overfit on one view: loss decreases over every 50-step window") {
  const auto records = one_instance_dataset(1);
  auto params = make_network<float>(tiny_net(), 7);
  Adam<float> adam(params, AdamConfig<float>{});

  std::vector<double> losses;
  const auto done = train_weak(params, adam, pointers(records), quick_config(200, 3),
                               [&](const StepEvent& e) { losses.push_back(e.loss); });
  CHECK(done == 200);
  REQUIRE(losses.size() == 200);
  // Per-step loss is noisy (fresh resampling each step); the mean over each
  // successive 50-step window must strictly decrease.
  const auto window_mean = [&](std::size_t start) {
    double sum = 0;
    for (std::size_t i = start; i < start + 50; ++i) sum += losses[i];
    return sum / 50.0;
  };
  for (std::size_t w = 0; w + 1 < 4; ++w) CHECK(window_mean((w + 1) * 50) < window_mean(w * 50));
}

TEST_CASE("lr = 0 leaves every parameter block bitwise untouched") {
  const auto records = one_instance_dataset(2);
  auto params = make_network<float>(tiny_net(), 8);
  const NetworkParams<float> before = params;
  Adam<float> adam(params, AdamConfig<float>{});
  TrainConfig config = quick_config(10, 4);
  config.lr = 0.0f;
  train_weak(params, adam, pointers(records), config);
  CHECK(params_equal(params, before));
  CHECK(adam.step_count() == 10);
}

TEST_CASE("a zero-step run checkpoints the untrained network") {
  const auto records = one_instance_dataset(2);
  auto params = make_network<float>(tiny_net(), 8);
  const NetworkParams<float> before = params;
  Adam<float> adam(params, AdamConfig<float>{});
  TrainConfig config = quick_config(0, 4);
  const fs::path dir = fs::temp_directory_path() / "pcw_train_zero";
  fs::remove_all(dir);
  fs::create_directories(dir);
  config.checkpoint_path = dir / "init.ckpt";
  CHECK(train_weak(params, adam, pointers(records), config) == 0);
  CHECK(params_equal(params, before));

  auto loaded = zeros_network<float>(tiny_net());
  CHECK(load_checkpoint(config.checkpoint_path, loaded) == 0);
  CHECK(params_equal(loaded, before));
  fs::remove_all(dir);
}

TEST_CASE("training is bit-reproducible per seed") {
  const auto records = one_instance_dataset(3);
  auto run = [&](std::uint64_t seed) {
    auto params = make_network<float>(tiny_net(), 9);
    Adam<float> adam(params, AdamConfig<float>{});
    train_weak(params, adam, pointers(records), quick_config(25, seed));
    return params;
  };
  const auto a = run(5);
  const auto b = run(5);
  const auto c = run(6);
  CHECK(params_equal(a, b));
  CHECK_FALSE(params_equal(a, c));
}

TEST_CASE("a resumed run continues bit-identically") {
  const auto records = one_instance_dataset(4);
  const fs::path dir = fs::temp_directory_path() / "pcw_train_resume";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Straight 30-step run.
  auto straight = make_network<float>(tiny_net(), 10);
  Adam<float> adam_s(straight, AdamConfig<float>{});
  TrainConfig config = quick_config(30, 11);
  config.checkpoint_path = dir / "straight.ckpt";
  train_weak(straight, adam_s, pointers(records), config);

  // Same run paused at 15 and resumed from the checkpoint. `run_until` (not
  // a shorter `steps`) keeps the lr-decay schedule anchored to 30.
  auto first = make_network<float>(tiny_net(), 10);
  Adam<float> adam_f(first, AdamConfig<float>{});
  TrainConfig half = config;
  half.run_until = 15;
  half.checkpoint_path = dir / "resumed.ckpt";
  train_weak(first, adam_f, pointers(records), half);

  auto resumed = zeros_network<float>(tiny_net());
  Adam<float> adam_r(resumed, AdamConfig<float>{});
  CHECK(load_checkpoint(dir / "resumed.ckpt", resumed, &adam_r) == 15);
  TrainConfig rest = config;
  rest.checkpoint_path = dir / "resumed.ckpt";
  train_weak(resumed, adam_r, pointers(records), rest);

  CHECK(params_equal(straight, resumed));
  CHECK(adam_r.step_count() == 30);

  // The final checkpoint files agree byte for byte.
  const auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  CHECK(slurp(dir / "straight.ckpt") == slurp(dir / "resumed.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("supervised oracle overfits and never touches the pose heads") {
  const auto records = one_instance_dataset(5);
  auto params = make_network<float>(tiny_net(), 12);
  const NetworkParams<float> before = params;
  Adam<float> adam(params, AdamConfig<float>{});

  std::vector<double> losses;
  train_supervised_oracle(params, adam, pointers(records), quick_config(150, 13),
                          [&](const StepEvent& e) {
                            losses.push_back(e.loss);
                            CHECK(e.winners.empty());
                          });
  REQUIRE(losses.size() == 150);
  CHECK(losses.back() < 0.1 * losses.front());

  for (std::size_t b = 0; b < params.pose.size(); ++b)
    for (std::size_t l = 0; l < params.pose[b].size(); ++l) {
      CHECK(params.pose[b][l].w == before.pose[b][l].w);
      CHECK(params.pose[b][l].b == before.pose[b][l].b);
    }
  // ... while encoder and shape decoder moved.
  CHECK_FALSE(params_equal(params, before));
}

TEST_CASE("win counts accumulate one entry per batch example") {
  const auto records = one_instance_dataset(6);
  NetConfig net = tiny_net();
  net.branches = 2;
  auto params = make_network<float>(net, 14);
  Adam<float> adam(params, AdamConfig<float>{});
  TrainConfig config = quick_config(12, 15);
  config.batch_instances = 3;
  train_weak(params, adam, pointers(records), config);
  CHECK(params.win_counts.sum() == 36.0f);
}

TEST_CASE("the training log has one line per step") {
  const auto records = one_instance_dataset(7);
  NetConfig net = tiny_net();
  net.branches = 2;
  auto params = make_network<float>(net, 16);
  Adam<float> adam(params, AdamConfig<float>{});
  const fs::path dir = fs::temp_directory_path() / "pcw_train_log";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TrainConfig config = quick_config(8, 17);
  config.batch_instances = 2;
  config.log_path = dir / "train_log.csv";
  train_weak(params, adam, pointers(records), config);

  std::ifstream log(config.log_path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(log, line);) lines.push_back(line);
  REQUIRE(lines.size() == 8);
  CHECK(lines[0].rfind("0,", 0) == 0);
  CHECK(lines[7].rfind("7,", 0) == 0);
  // step, loss, winner histogram with one bucket per branch
  const auto& first = lines[0];
  CHECK(std::count(first.begin(), first.end(), ',') == 2);
  CHECK(std::count(first.begin(), first.end(), '|') == 1);
  const std::string hist = first.substr(first.rfind(',') + 1);
  const int left = std::stoi(hist.substr(0, hist.find('|')));
  const int right = std::stoi(hist.substr(hist.find('|') + 1));
  CHECK(left + right == 2);
  fs::remove_all(dir);
}

TEST_CASE("invalid configurations are rejected before any work") {
  const auto records = one_instance_dataset(8);
  auto params = make_network<float>(tiny_net(), 18);
  Adam<float> adam(params, AdamConfig<float>{});
  TrainConfig config = quick_config(5, 19);
  SUBCASE("negative steps") {
    config.steps = -1;
    CHECK_THROWS_AS(train_weak(params, adam, pointers(records), config), ConfigError);
  }
  SUBCASE("zero batch") {
    config.batch_instances = 0;
    CHECK_THROWS_AS(train_weak(params, adam, pointers(records), config), ConfigError);
  }
  SUBCASE("zero views") {
    config.views_per_instance = 0;
    CHECK_THROWS_AS(train_weak(params, adam, pointers(records), config), ConfigError);
  }
  SUBCASE("negative lr") {
    config.lr = -1e-4f;
    CHECK_THROWS_AS(train_weak(params, adam, pointers(records), config), ConfigError);
  }
  SUBCASE("empty dataset") {
    CHECK_THROWS_AS(train_weak(params, adam, {}, config), ConfigError);
  }
}

TEST_CASE("a non-finite gradient aborts without clobbering the last checkpoint") {
  const auto records = one_instance_dataset(9);
  auto params = make_network<float>(tiny_net(), 20);
  Adam<float> adam(params, AdamConfig<float>{});
  const fs::path dir = fs::temp_directory_path() / "pcw_train_nan";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path ckpt = dir / "model.ckpt";
  save_checkpoint(ckpt, params, adam);
  const auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  const std::string good = slurp(ckpt);

  params.encoder[0].w(0, 0) = std::numeric_limits<float>::quiet_NaN();
  const NetworkParams<float> poisoned = params;
  TrainConfig config = quick_config(5, 21);
  config.checkpoint_path = ckpt;
  CHECK_THROWS_AS(train_weak(params, adam, pointers(records), config), NonFiniteGradient);
  CHECK(slurp(ckpt) == good);          // never overwritten
  CHECK(params_equal(params, poisoned));  // optimizer did not half-apply a step
  fs::remove_all(dir);
}
