#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "kinn/error.hpp"
#include "kinn/trainer.hpp"

using namespace kinn;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.arch.width = 16;
  cfg.arch.blocks = 1;
  cfg.batch_size = 64;
  cfg.max_steps = 30;
  cfg.eval_every = 10;
  return cfg;
}

std::string checkpoint_bytes(const NetworkParams& p) {
  std::ostringstream os;
  save_checkpoint(p, os);
  return os.str();
}

NetworkParams load_bytes(const std::string& bytes) {
  std::istringstream is(bytes);
  return load_checkpoint(is);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kinn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Log text with the trailing wall-clock column removed.
std::string strip_ms(const std::string& log) {
  std::istringstream is(log);
  std::string line, out;
  while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("config validation names the field") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.batch_size = 0;
    try {
      cfg.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "batch_size");
    }
    cfg = TrainConfig{};
    cfg.lr_gamma = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.arch.inequality_dim = 6;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("learning rate schedule") {
    TrainConfig cfg;
    CHECK(learning_rate(cfg, 0) == cfg.initial_lr);
    CHECK(learning_rate(cfg, 1) == doctest::Approx(1e-3 * 0.99986));
    CHECK(learning_rate(cfg, 5000) == doctest::Approx(1e-3 * std::pow(0.99986, 5000)));
  }

  TEST_CASE("first Adam step has magnitude lr") {
    std::vector<float> p{0.0f, 0.0f};
    AdamState s(2);
    const std::vector<float> g{1.0f, -4.0f};
    adam_update(p, s, g, 1e-3, 0.9, 0.999, 1e-8);
    CHECK(p[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(s.t == 1);
  }

  TEST_CASE("Adam matches a double-precision recurrence") {
    const double grads[] = {1.0, -2.0, 0.5};
    double m = 0, v = 0, x = 0.3;
    std::vector<float> p{0.3f};
    AdamState s(1);
    for (int t = 1; t <= 3; ++t) {
      const double g = grads[t - 1];
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1 - std::pow(0.9, t));
      const double vh = v / (1 - std::pow(0.999, t));
      x -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
      const std::vector<float> gf{static_cast<float>(g)};
      adam_update(p, s, gf, 1e-2, 0.9, 0.999, 1e-8);
      CHECK(p[0] == doctest::Approx(x).epsilon(1e-6));
    }
    CHECK_THROWS_AS(adam_update(p, s, std::vector<float>{1, 2}, 1e-3, 0.9, 0.999, 1e-8),
                    ContractViolation);
  }

  TEST_CASE("sampler draws valid rows with the stated ranges") {
    Rng rng(51);
    const ParamBatch batch = sample_batch(rng, 10000);
    REQUIRE(batch.size() == 10000);
    double mean_pbar = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const GeneratorParams p = batch[i];
      REQUIRE_FALSE(violated_invariant(p).has_value());
      REQUIRE(p.p_bar >= 0.2);
      REQUIRE(p.p_bar < 0.8);
      REQUIRE(p.a_p >= 0.0);
      REQUIRE(p.a_p < 1.0);
      REQUIRE(p.a_q >= -1.0);
      REQUIRE(p.p_max <= p.p_bar);
      mean_pbar += p.p_bar / 10000.0;
    }
    CHECK(std::abs(mean_pbar - 0.5) < 0.01);
    Rng a(52), b(52);
    const ParamBatch x = sample_batch(a, 5), y = sample_batch(b, 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(x[i] == y[i]);
  }

  TEST_CASE("early stopping counts stale updates") {
    EarlyStopping stop(3, 1e-6);
    CHECK_FALSE(stop.update({1.0, 1.0}));
    CHECK_FALSE(stop.update({1.0, 1.0}));
    CHECK_FALSE(stop.update({1.0, 1.0}));
    CHECK(stop.update({1.0, 1.0}));

    EarlyStopping reset(2, 1e-6);
    CHECK_FALSE(reset.update({1.0, 1.0}));
    CHECK_FALSE(reset.update({1.0, 1.0}));
    CHECK_FALSE(reset.update({1.0, 0.5}));  // progress on one term resets the count
    CHECK_FALSE(reset.update({1.0, 0.5 - 1e-7}));
    CHECK(reset.update({1.0, 0.5}));

    EarlyStopping one(1, 1e-6);
    CHECK_FALSE(one.update({2.0}));
    CHECK(one.update({2.0}));
  }

  TEST_CASE("log record format") {
    TrainLogRecord r;
    r.step = 3;
    r.lr = 0.001;
    r.loss.stationarity = 0.5;
    r.loss.inequality = 0.25;
    r.ms = 1.5;
    CHECK(format_log_record(r) == "3,0.001,0.5,0.25,0,,,1.500");
    r.mae = 0.125;
    r.r2 = 0.75;
    CHECK(format_log_record(r) == "3,0.001,0.5,0.25,0,0.125,0.75,1.500");
    std::ostringstream os;
    write_log_csv(os, std::vector<TrainLogRecord>{r});
    CHECK(os.str() == std::string(kTrainLogHeader) + "\n3,0.001,0.5,0.25,0,0.125,0.75,1.500\n");
  }

  TEST_CASE("training lowers the loss on a small network") {
    TrainConfig cfg = tiny_config();
    cfg.arch.width = 64;
    cfg.batch_size = 256;
    Rng rng(cfg.seed);
    NetworkParams p = init_params(rng, cfg.arch);
    AdamState adam(p.size());
    TrainWorkspace ws;
    double first = 0.0, last = 0.0;
    for (long step = 0; step < 150; ++step) {
      const LossVector l = train_step(p, adam, cfg, rng, step, ws);
      const double total = l.stationarity + l.inequality + l.complementarity;
      if (step < 10) first += total;
      if (step >= 140) last += total;
    }
    CHECK(last < 0.5 * first);
  }

  TEST_CASE("run_training writes artifacts and is reproducible") {
    const auto dir = temp_dir("run");
    auto run = [&](const std::string& tag) {
      TrainConfig cfg = tiny_config();
      cfg.checkpoint_out = (dir / (tag + ".kinn")).string();
      cfg.best_checkpoint_out = (dir / (tag + "_best.kinn")).string();
      cfg.log_out = (dir / (tag + ".csv")).string();
      return run_training(cfg);
    };
    const TrainResult a = run("a");
    const TrainResult b = run("b");
    CHECK(a.log.size() == 30);
    CHECK(a.stop_reason == "max_steps");
    CHECK(a.log[9].mae.has_value());
    CHECK_FALSE(a.log[8].mae.has_value());
    REQUIRE(a.best_params.has_value());
    CHECK(slurp(dir / "a.kinn") == slurp(dir / "b.kinn"));
    CHECK(slurp(dir / "a_best.kinn") == slurp(dir / "b_best.kinn"));
    const std::string log = slurp(dir / "a.csv");
    CHECK(log.starts_with(std::string(kTrainLogHeader) + "\n"));
    CHECK(strip_ms(log) == strip_ms(slurp(dir / "b.csv")));
    CHECK(load_checkpoint((dir / "a.kinn").string()) == a.final_params);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("patience ends a run early") {
    TrainConfig cfg = tiny_config();
    cfg.patience = 1;
    cfg.improvement_tolerance = 1e9;
    const TrainResult r = run_training(cfg);
    CHECK(r.stop_reason == "patience");
    CHECK(r.log.size() == 2);
    CHECK(r.log.back().mae.has_value());
  }

  TEST_CASE("checkpoint round trip") {
    Rng rng(53);
    const NetworkParams p = init_params(rng, tiny_config().arch);
    const std::string bytes = checkpoint_bytes(p);
    CHECK(bytes.size() == 4 + 4 + 20 + 4 * p.size() + 8);
    CHECK(bytes.substr(0, 4) == "KINN");
    CHECK(load_bytes(bytes) == p);
  }

  TEST_CASE("corrupt checkpoints are rejected") {
    Rng rng(54);
    const std::string bytes = checkpoint_bytes(init_params(rng, tiny_config().arch));
    CHECK_THROWS_AS(load_bytes(bytes.substr(0, bytes.size() - 3)), CorruptCheckpoint);
    CHECK_THROWS_AS(load_bytes(bytes.substr(0, 6)), CorruptCheckpoint);
    CHECK_THROWS_AS(load_bytes(bytes + "x"), CorruptCheckpoint);
    std::string flipped = bytes;
    flipped[40] = static_cast<char>(flipped[40] ^ 0x10);
    CHECK_THROWS_AS(load_bytes(flipped), CorruptCheckpoint);
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(load_bytes(magic), CorruptCheckpoint);
    std::string version = bytes;
    version[4] = 2;
    CHECK_THROWS_AS(load_bytes(version), UnsupportedVersion);
    CHECK_THROWS_AS(load_checkpoint(std::string("/nonexistent/model.kinn")), IoError);
  }

  TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);
    const unsigned char a[] = {'a'};
    CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cull);
    const unsigned char foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
    CHECK(fnv1a64(foobar) == 0x85944171f73967e8ull);
  }
}
