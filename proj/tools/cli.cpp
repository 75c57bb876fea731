#include "kinn/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "kinn/error.hpp"
#include "kinn/eval.hpp"
#include "kinn/oracle.hpp"

namespace kinn {

namespace {

using nlohmann::json;

double json_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

long json_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<long>();
}

std::string json_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) fields.push_back(trim(field));
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

std::string param_header() {
  std::string h;
  for (const char* c : kParamColumns) h += (h.empty() ? "" : ",") + std::string(c);
  return h;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return is;
}

// Runs `write` against the file at `path`, or against `fallback` when the
// path is empty.
void with_output(const std::string& path, std::ostream& fallback,
                 const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write(os);
  if (!os) throw IoError("failed to write " + path);
}

std::string format_row(const GeneratorParams& p) {
  const auto r = p.to_row();
  return fmt::format("{},{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5], r[6]);
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, bool seed_given, std::ostream& out) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  if (seed_given) cfg.seed = a.seed;
  if (!a.out.empty() || cfg.checkpoint_out.empty()) {
    const std::filesystem::path dir = a.out.empty() ? "." : a.out;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());
    cfg.checkpoint_out = (dir / "model.kinn").string();
    cfg.best_checkpoint_out = (dir / "best.kinn").string();
    cfg.log_out = (dir / "train_log.csv").string();
  }
  const TrainResult r = run_training(cfg, &out);
  const auto& last = r.log.back();
  const auto& m = r.final_report.metrics;
  fmt::print(out, "stopped: {} after {} steps\n", r.stop_reason, r.log.size());
  fmt::print(out, "final loss: stationarity {} inequality {} complementarity {}\n",
             last.loss.stationarity, last.loss.inequality, last.loss.complementarity);
  fmt::print(out, "validation: mae {} r2 {} (reference mae {} r2 {})\n", m.mae, m.r2,
             kReferenceMae, kReferenceR2);
  fmt::print(out, "best validation mae {}\n", r.best_mae);
  fmt::print(out, "checkpoint: {}\n", cfg.checkpoint_out);
  return 0;
}

int cmd_predict(const std::string& model, const std::string& input, const std::string& output,
                std::ostream& out) {
  const NetworkParams params = load_checkpoint(model);
  const ParamBatch batch = read_param_csv_file(input);
  NetworkOutput pred;
  if (!batch.empty()) pred = predict(params, batch.theta());
  with_output(output, out, [&](std::ostream& os) {
    os << "p_hat,q_hat";
    for (int i = 1; i <= kConstraintCount; ++i) os << ",lambda_" << i;
    os << '\n';
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(batch.size()); ++r) {
      os << fmt::format("{},{}", pred.x_hat(r, 0), pred.x_hat(r, 1));
      for (int i = 0; i < kConstraintCount; ++i) os << fmt::format(",{}", pred.lambda_hat(r, i));
      os << '\n';
    }
  });
  return 0;
}

int cmd_oracle(const std::string& input, const std::string& output, std::ostream& out) {
  const ParamBatch batch = read_param_csv_file(input);
  std::vector<OracleSolution> sols;
  sols.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      sols.push_back(project(build_instance(batch[i])));
    } catch (const InfeasibleInstance& e) {
      throw InputError(static_cast<long>(i) + 1, e.what());
    }
  }
  with_output(output, out, [&](std::ostream& os) {
    os << param_header() << ",p_star,q_star,distance,active_set\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::string active;
      for (int c : sols[i].active_set) active += (active.empty() ? "" : ";") + std::to_string(c + 1);
      os << format_row(batch[i])
         << fmt::format(",{},{},{},{}\n", sols[i].x_star[0], sols[i].x_star[1], sols[i].distance,
                        active);
    }
  });
  return 0;
}

int cmd_eval(const std::string& model, std::uint64_t seed, const std::string& output,
             std::ostream& out) {
  const NetworkParams params = load_checkpoint(model);
  const ValidationSet set = build_validation_set(seed);
  const std::string doc = to_json(evaluate(params, set));
  out << doc << '\n';
  if (!output.empty()) with_output(output, out, [&](std::ostream& os) { os << doc << '\n'; });
  return 0;
}

int cmd_bench(const std::string& model, const std::vector<int>& sizes, int repetitions,
              const std::string& output, std::ostream& out) {
  const NetworkParams params = load_checkpoint(model);
  const ValidationSet set = build_validation_set(kDefaultValidationSeed);
  const std::string csv = bench_csv(bench(params, set.params, sizes, repetitions));
  out << csv;
  if (!output.empty()) with_output(output, out, [&](std::ostream& os) { os << csv; });
  return 0;
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");

  TrainConfig cfg;
  using Setter = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"batch_size", [&](const json& v, const std::string& k) { cfg.batch_size = static_cast<int>(json_integer(v, k)); }},
      {"initial_lr", [&](const json& v, const std::string& k) { cfg.initial_lr = json_number(v, k); }},
      {"lr_gamma", [&](const json& v, const std::string& k) { cfg.lr_gamma = json_number(v, k); }},
      {"adam_beta1", [&](const json& v, const std::string& k) { cfg.adam_beta1 = json_number(v, k); }},
      {"adam_beta2", [&](const json& v, const std::string& k) { cfg.adam_beta2 = json_number(v, k); }},
      {"adam_epsilon", [&](const json& v, const std::string& k) { cfg.adam_epsilon = json_number(v, k); }},
      {"patience", [&](const json& v, const std::string& k) { cfg.patience = json_integer(v, k); }},
      {"max_steps", [&](const json& v, const std::string& k) { cfg.max_steps = json_integer(v, k); }},
      {"eval_every", [&](const json& v, const std::string& k) { cfg.eval_every = json_integer(v, k); }},
      {"improvement_tolerance", [&](const json& v, const std::string& k) { cfg.improvement_tolerance = json_number(v, k); }},
      {"seed", [&](const json& v, const std::string& k) {
         if (!v.is_number_unsigned()) throw ConfigError(k, "expected a non-negative integer");
         cfg.seed = v.get<std::uint64_t>();
       }},
      {"validation_seed", [&](const json& v, const std::string& k) {
         if (!v.is_number_unsigned()) throw ConfigError(k, "expected a non-negative integer");
         cfg.validation_seed = v.get<std::uint64_t>();
       }},
      {"width", [&](const json& v, const std::string& k) { cfg.arch.width = static_cast<int>(json_integer(v, k)); }},
      {"blocks", [&](const json& v, const std::string& k) { cfg.arch.blocks = static_cast<int>(json_integer(v, k)); }},
      {"checkpoint_out", [&](const json& v, const std::string& k) { cfg.checkpoint_out = json_string(v, k); }},
      {"best_checkpoint_out", [&](const json& v, const std::string& k) { cfg.best_checkpoint_out = json_string(v, k); }},
      {"log_out", [&](const json& v, const std::string& k) { cfg.log_out = json_string(v, k); }},
  };
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    it->second(value, key);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_train_config(ss.str());
}

ParamBatch read_param_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError(0, "missing header; expected " + param_header());
  if (trim(line) != param_header()) {
    throw InputError(0, "bad header '" + trim(line) + "'; expected " + param_header());
  }
  ParamBatch batch;
  long row = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split(line, ',');
    if (fields.size() != static_cast<std::size_t>(kParamDim)) {
      throw InputError(row, fmt::format("expected {} fields, got {}", kParamDim, fields.size()));
    }
    std::array<double, kParamDim> values{};
    for (int j = 0; j < kParamDim; ++j) {
      const std::string& f = fields[j];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[j]);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw InputError(row, fmt::format("{} is not a number: '{}'", kParamColumns[j], f));
      }
    }
    const GeneratorParams p = GeneratorParams::from_row(values);
    if (const auto why = violated_invariant(p)) throw InputError(row, *why);
    batch.push_back(p);
  }
  return batch;
}

ParamBatch read_param_csv_file(const std::string& path) {
  auto is = open_input(path);
  return read_param_csv(is);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"KKT-informed neural surrogate for generator setpoint projection", "kinn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "kinn 0.1.0");

  TrainArgs train;
  auto* sub_train = app.add_subcommand("train", "Train a network and write checkpoint and log");
  sub_train->add_option("--config", train.config, "JSON training configuration");
  sub_train->add_option("--out", train.out, "Output directory for model.kinn, best.kinn, train_log.csv");
  auto* seed_opt = sub_train->add_option("--seed", train.seed, "Override the configured seed");

  std::string model, input, output;
  auto* sub_predict = app.add_subcommand("predict", "Run a checkpoint on a parameter CSV");
  sub_predict->add_option("--model", model, "Checkpoint file")->required();
  sub_predict->add_option("--input", input, "Parameter CSV")->required();
  sub_predict->add_option("--output", output, "Output CSV (default: stdout)");

  auto* sub_oracle = app.add_subcommand("oracle", "Exact projection of every row of a parameter CSV");
  sub_oracle->add_option("--input", input, "Parameter CSV")->required();
  sub_oracle->add_option("--output", output, "Output CSV (default: stdout)");

  std::uint64_t eval_seed = kDefaultValidationSeed;
  auto* sub_eval = app.add_subcommand("eval", "Score a checkpoint on the validation set");
  sub_eval->add_option("--model", model, "Checkpoint file")->required();
  sub_eval->add_option("--seed", eval_seed, "Validation set seed");
  sub_eval->add_option("--output", output, "Also write the JSON report here");

  std::vector<int> sizes{1, 10, 100, 1000};
  int repetitions = kBenchRepetitions;
  auto* sub_bench = app.add_subcommand("bench", "Time batched prediction against the oracle");
  sub_bench->add_option("--model", model, "Checkpoint file")->required();
  sub_bench->add_option("--batch-sizes", sizes, "Comma-separated batch sizes")->delimiter(',');
  sub_bench->add_option("--repetitions", repetitions, "Timed repetitions per size")
      ->check(CLI::PositiveNumber);
  sub_bench->add_option("--output", output, "Also write the CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    fmt::print(err, "error: usage: {}\n", e.what());
    return 2;
  }

  try {
    configure_threads_from_env();
    if (sub_train->parsed()) return cmd_train(train, seed_opt->count() > 0, out);
    if (sub_predict->parsed()) return cmd_predict(model, input, output, out);
    if (sub_oracle->parsed()) return cmd_oracle(input, output, out);
    if (sub_eval->parsed()) return cmd_eval(model, eval_seed, output, out);
    if (sub_bench->parsed()) return cmd_bench(model, sizes, repetitions, output, out);
  } catch (const Error& e) {
    fmt::print(err, "error: {}: {}\n", e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(err, "error: internal: {}\n", e.what());
    return 1;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"kinn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace kinn
