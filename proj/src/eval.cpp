#include "kinn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "json.hpp"
#include "kinn/error.hpp"
#include "kinn/loss.hpp"

namespace kinn {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Fn>
double median_ms(Fn&& fn, int repetitions, int warmup) {
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    const auto start = Clock::now();
    fn();
    times.push_back(elapsed_ms(start));
  }
  return median(std::move(times));
}

class ScopedThreads {
 public:
  explicit ScopedThreads(int n) : previous_(thread_count()) { set_thread_count(n); }
  ~ScopedThreads() { set_thread_count(previous_); }
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  int previous_;
};

}  // namespace

ValidationSet build_validation_set(std::uint64_t seed, int samples_per_generator) {
  ValidationSet set;
  set.seed = seed;
  Rng rng(seed);
  const std::size_t total = 2 * static_cast<std::size_t>(samples_per_generator);
  set.params.reserve(total);
  for (const auto& gen : {kGenerator1, kGenerator2}) {
    for (int i = 0; i < samples_per_generator; ++i) {
      GeneratorParams p;
      p.a_p = rng.uniform(0.0, 1.0);
      p.a_q = rng.uniform(-1.0, 1.0);
      p.p_max = rng.uniform(0.0, gen.p_bar);
      p.p_bar = gen.p_bar;
      p.p_plus = gen.p_plus;
      p.q_bar = gen.q_bar;
      p.q_plus = gen.q_plus;
      set.params.push_back(p);
    }
  }
  set.instances = build_instances(set.params);
  set.solutions = batch_project(set.instances);
  set.truths.resize(static_cast<Eigen::Index>(total), kPrimalDim);
  for (std::size_t i = 0; i < total; ++i) {
    set.truths.row(static_cast<Eigen::Index>(i)) = set.solutions[i].x_star.transpose();
  }
  return set;
}

Metrics metrics(const MatD& predictions, const MatD& truths) {
  if (predictions.rows() != truths.rows() || predictions.cols() != truths.cols()) {
    throw ContractViolation("metrics: prediction and truth shapes differ");
  }
  if (truths.size() == 0) throw ContractViolation("metrics: empty input");
  Metrics m;
  const auto diff = (predictions - truths).array();
  m.mae = diff.abs().mean();
  const double ss_res = diff.square().sum();
  const double ss_tot = (truths.array() - truths.mean()).square().sum();
  if (ss_tot == 0.0) throw Error("undefined-r2", "metrics: truths have zero variance");
  m.r2 = 1.0 - ss_res / ss_tot;
  for (Eigen::Index c = 0; c < truths.cols(); ++c) {
    const auto col = truths.col(c).array();
    const double tot = (col - col.mean()).square().sum();
    const double res = (predictions.col(c) - truths.col(c)).array().square().sum();
    m.r2_per_component.push_back(tot == 0.0 ? std::nan("") : 1.0 - res / tot);
  }
  return m;
}

ViolationStats kkt_violation_report(std::span<const ProblemInstance> insts, const MatD& x_hat,
                                    const MatD& lambda_hat) {
  const auto n = static_cast<Eigen::Index>(insts.size());
  if (x_hat.rows() != n || lambda_hat.rows() != n || x_hat.cols() != kPrimalDim ||
      lambda_hat.cols() != kConstraintCount) {
    throw ContractViolation("kkt_violation_report: prediction shapes do not match the set");
  }
  ViolationStats s;
  if (n == 0) return s;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& inst = insts[static_cast<std::size_t>(i)];
    const Point x = x_hat.row(i).transpose();
    const ConstraintVec lambda = lambda_hat.row(i).transpose();
    const ConstraintVec viol = eval_constraints(inst, x).cwiseMax(0.0);
    Eigen::Index row = 0;
    const double worst = viol.maxCoeff(&row);
    if (worst > s.max_violation) {
      s.max_violation = worst;
      s.max_violation_constraint = static_cast<int>(row);
    }
    const auto t = loss_terms(inst, x, lambda);
    s.mean_violation += t.inequality;
    s.mean_complementarity += t.complementarity;
    s.mean_stationarity += t.stationarity;
  }
  s.mean_violation /= static_cast<double>(n);
  s.mean_complementarity /= static_cast<double>(n);
  s.mean_stationarity /= static_cast<double>(n);
  return s;
}

EvalReport evaluate(const NetworkParams& params, const ValidationSet& set) {
  EvalReport report;
  report.threads = thread_count();
  report.validation_seed = set.seed;
  report.samples = set.size();
  const auto out = predict(params, set.params.theta());
  const MatD x_hat = out.x_hat.cast<double>();
  const MatD lambda_hat = out.lambda_hat.cast<double>();
  report.metrics = metrics(x_hat, set.truths);
  report.violations = kkt_violation_report(set.instances, x_hat, lambda_hat);
  return report;
}

std::vector<BenchRow> bench(const NetworkParams& params, const ParamBatch& source,
                            std::span<const int> batch_sizes, int repetitions, int warmup) {
  if (source.empty()) throw ContractViolation("bench: empty parameter source");
  if (repetitions < 1 || warmup < 0) throw ContractViolation("bench: invalid repetition counts");
  ScopedThreads single(1);
  std::vector<BenchRow> rows;
  for (const int b : batch_sizes) {
    if (b < 1) throw ContractViolation("bench: batch sizes must be >= 1");
    ParamBatch batch;
    batch.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) batch.push_back(source[static_cast<std::size_t>(i) % source.size()]);

    BenchRow row;
    row.batch_size = b;
    row.predict_ms = median_ms([&] { (void)predict(params, batch.theta()); }, repetitions, warmup);
    row.oracle_ms = median_ms([&] { (void)batch_project(build_instances(batch)); }, repetitions,
                              warmup);
    row.ratio = row.predict_ms > 0.0 ? row.oracle_ms / row.predict_ms : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["validation_seed"] = r.validation_seed;
  j["threads"] = r.threads;
  j["mae"] = r.metrics.mae;
  j["r2"] = r.metrics.r2;
  j["r2_per_component"] = r.metrics.r2_per_component;
  j["max_violation"] = r.violations.max_violation;
  j["max_violation_constraint"] = r.violations.max_violation_constraint + 1;
  j["mean_violation"] = r.violations.mean_violation;
  j["mean_complementarity"] = r.violations.mean_complementarity;
  j["mean_stationarity"] = r.violations.mean_stationarity;
  j["reference"] = {{"mae", kReferenceMae}, {"r2", kReferenceR2}};
  j["timing"] = nlohmann::ordered_json::array();
  for (const auto& t : r.timing) {
    j["timing"].push_back({{"batch_size", t.batch_size},
                           {"predict_ms", t.predict_ms},
                           {"oracle_ms", t.oracle_ms},
                           {"ratio", t.ratio}});
  }
  return j.dump(2);
}

std::string bench_csv(std::span<const BenchRow> rows) {
  std::string out = "batch_size,predict_ms,oracle_ms,ratio\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{}\n", r.batch_size, r.predict_ms, r.oracle_ms, r.ratio);
  }
  return out;
}

}  // namespace kinn
