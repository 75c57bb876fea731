#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "kinn/cli.hpp"
#include "kinn/error.hpp"

using namespace kinn;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kinn_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::size_t line_count(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

const char* kHeader = "a_p,a_q,p_bar,p_plus,q_bar,q_plus,p_max\n";

// Trains the small network used by the model-consuming tests once.
const std::filesystem::path& small_model() {
  static const std::filesystem::path dir = [] {
    auto d = scratch("model");
    write_file(d / "cfg.json", R"({"width": 16, "blocks": 1, "batch_size": 32, "max_steps": 5, "eval_every": 5})");
    const CliRun r = cli({"train", "--config", (d / "cfg.json").string(), "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("configuration keys") {
    const TrainConfig cfg =
        parse_train_config(R"({"batch_size": 8, "initial_lr": 0.01, "width": 32, "seed": 5})");
    CHECK(cfg.batch_size == 8);
    CHECK(cfg.initial_lr == 0.01);
    CHECK(cfg.arch.width == 32);
    CHECK(cfg.seed == 5u);
    CHECK(cfg.patience == TrainConfig{}.patience);

    try {
      parse_train_config(R"({"batch_sise": 8})");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "batch_sise");
    }
    CHECK_THROWS_AS(parse_train_config(R"({"initial_lr": "fast"})"), ConfigError);
    CHECK_THROWS_AS(parse_train_config(R"({"batch_size": 0})"), ConfigError);
    CHECK_THROWS_AS(parse_train_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_train_config("{"), ConfigError);
  }

  TEST_CASE("parameter CSV reader") {
    std::istringstream ok(std::string(kHeader) + "0.5,0.1,0.3,0.2,0.3,0.15,0.25\r\n\n");
    const ParamBatch b = read_param_csv(ok);
    REQUIRE(b.size() == 1);
    CHECK(b[0].p_max == 0.25);

    std::istringstream bad_row(std::string(kHeader) + "0.5,0.1,0.3,0.2,0.3,0.15,0.25\n"
                               "0.5,0.1,0.3,0.4,0.3,0.15,0.25\n");
    try {
      read_param_csv(bad_row);
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()) == "row 2: p_plus > p_bar");
    }
    std::istringstream short_row(std::string(kHeader) + "0.5,0.1\n");
    CHECK_THROWS_AS(read_param_csv(short_row), InputError);
    std::istringstream text(std::string(kHeader) + "0.5,x,0.3,0.2,0.3,0.15,0.25\n");
    CHECK_THROWS_AS(read_param_csv(text), InputError);
    std::istringstream header("p,q\n");
    CHECK_THROWS_AS(read_param_csv(header), InputError);
  }

  TEST_CASE("oracle subcommand") {
    const auto dir = scratch("oracle");
    write_file(dir / "in.csv", std::string(kHeader) + "2,0,0.3,0.2,0.3,0.15,0.25\n"
                                                      "0.1,0.05,0.3,0.2,0.3,0.15,0.25\n"
                                                      "2,2,0.3,0.2,0.3,0.15,0.25\n");
    const CliRun r = cli({"oracle", "--input", (dir / "in.csv").string(), "--output",
                          (dir / "out.csv").string()});
    REQUIRE(r.code == 0);
    const std::string csv = read_file(dir / "out.csv");
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "a_p,a_q,p_bar,p_plus,q_bar,q_plus,p_max,p_star,q_star,distance,active_set");
    std::getline(is, line);
    CHECK(line == "2,0,0.3,0.2,0.3,0.15,0.25,0.25,0,1.75,3");
    std::getline(is, line);
    CHECK(line == "0.1,0.05,0.3,0.2,0.3,0.15,0.25,0.1,0.05,0,");
    std::getline(is, line);
    CHECK(line.ends_with(",5;6"));

    const CliRun again = cli({"oracle", "--input", (dir / "in.csv").string()});
    CHECK(again.out == csv);
  }

  TEST_CASE("input errors name the row") {
    const auto dir = scratch("badrow");
    write_file(dir / "in.csv", std::string(kHeader) + "0.5,0.1,0.3,0.4,0.3,0.15,0.25\n");
    const CliRun r = cli({"oracle", "--input", (dir / "in.csv").string()});
    CHECK(r.code != 0);
    CHECK(r.err == "error: input: row 1: p_plus > p_bar\n");
    const CliRun p = cli({"predict", "--model", (small_model() / "model.kinn").string(), "--input",
                          (dir / "in.csv").string()});
    CHECK(p.code != 0);
    CHECK(p.err.starts_with("error: input: row 1"));
  }

  TEST_CASE("train writes artifacts and honours --seed") {
    const auto& dir = small_model();
    CHECK(std::filesystem::exists(dir / "model.kinn"));
    CHECK(std::filesystem::exists(dir / "best.kinn"));
    const std::string log = read_file(dir / "train_log.csv");
    CHECK(log.starts_with("step,lr,loss_s,loss_i,loss_c,mae,r2,ms\n"));
    CHECK(line_count(log) == 6);

    const auto other = scratch("seed");
    const CliRun r = cli({"train", "--config", (dir / "cfg.json").string(), "--out", other.string(),
                          "--seed", "9"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("validation: mae") != std::string::npos);
    CHECK(read_file(other / "model.kinn") != read_file(dir / "model.kinn"));
  }

  TEST_CASE("train errors") {
    const CliRun missing = cli({"train", "--config", "/nonexistent/cfg.json"});
    CHECK(missing.code != 0);
    CHECK(missing.err.find("/nonexistent/cfg.json") != std::string::npos);

    const auto dir = scratch("badcfg");
    write_file(dir / "cfg.json", R"({"max_step": 3})");
    const CliRun bad = cli({"train", "--config", (dir / "cfg.json").string(), "--out", dir.string()});
    CHECK(bad.code != 0);
    CHECK(bad.err.starts_with("error: config: max_step"));
  }

  TEST_CASE("predict output shape") {
    const auto dir = scratch("predict");
    write_file(dir / "empty.csv", kHeader);
    const std::string model = (small_model() / "model.kinn").string();
    const CliRun empty = cli({"predict", "--model", model, "--input", (dir / "empty.csv").string()});
    REQUIRE(empty.code == 0);
    CHECK(empty.out == "p_hat,q_hat,lambda_1,lambda_2,lambda_3,lambda_4,lambda_5,lambda_6,lambda_7\n");

    write_file(dir / "in.csv", std::string(kHeader) + "2,0,0.3,0.2,0.3,0.15,0.25\n"
                                                      "0.1,0.05,0.5,0.35,0.5,0.2,0.4\n");
    const CliRun r = cli({"predict", "--model", model, "--input", (dir / "in.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(line_count(r.out) == 3);
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }

  TEST_CASE("eval and bench") {
    const std::string model = (small_model() / "model.kinn").string();
    const CliRun a = cli({"eval", "--model", model, "--seed", "5"});
    const CliRun b = cli({"eval", "--model", model, "--seed", "5"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("\"mae\"") != std::string::npos);

    const CliRun bench = cli({"bench", "--model", model, "--batch-sizes", "1,10,100,1000",
                              "--repetitions", "2"});
    REQUIRE(bench.code == 0);
    CHECK(line_count(bench.out) == 5);
    CHECK(bench.out.starts_with("batch_size,predict_ms,oracle_ms,ratio\n"));

    const auto dir = scratch("corrupt");
    const std::string good = read_file(small_model() / "model.kinn");
    write_file(dir / "bad.kinn", good.substr(0, good.size() / 2));
    const CliRun corrupt = cli({"eval", "--model", (dir / "bad.kinn").string()});
    CHECK(corrupt.code != 0);
    CHECK(corrupt.err.starts_with("error: corrupt-checkpoint: "));
  }

  TEST_CASE("usage errors") {
    CHECK(cli({}).code != 0);
    CHECK(cli({"predict"}).code != 0);
    CHECK(cli({"frobnicate"}).err.starts_with("error: usage: "));
    CHECK(cli({"--help"}).code == 0);
  }
}
