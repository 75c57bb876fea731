#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kinn/linalg.hpp"
#include "kinn/network.hpp"
#include "kinn/oracle.hpp"
#include "kinn/problem.hpp"

namespace kinn {

/// Fixed physical parameters of one generator.
struct GeneratorProfile {
  double p_bar;
  double p_plus;
  double q_bar;
  double q_plus;
};

inline constexpr GeneratorProfile kGenerator1{0.3, 0.2, 0.3, 0.15};
inline constexpr GeneratorProfile kGenerator2{0.5, 0.35, 0.5, 0.2};
inline constexpr int kSamplesPerGenerator = 500;
inline constexpr std::uint64_t kDefaultValidationSeed = 1234;

/// 500 random setpoints per reference generator (generator 1 first) with
/// a_p ~ U(0, 1), a_q ~ U(-1, 1), p_max ~ U(0, p_bar), drawn in that order
/// per sample from one stream, and their exact projections.
struct ValidationSet {
  std::uint64_t seed = 0;
  ParamBatch params;
  std::vector<ProblemInstance> instances;
  std::vector<OracleSolution> solutions;
  MatD truths;  ///< N x 2 oracle optima

  std::size_t size() const { return instances.size(); }
};

ValidationSet build_validation_set(std::uint64_t seed = kDefaultValidationSeed,
                                   int samples_per_generator = kSamplesPerGenerator);

struct Metrics {
  double mae = 0.0;  ///< mean |pred - truth| over every scalar component
  double r2 = 0.0;   ///< pooled over every scalar component
  std::vector<double> r2_per_component;
};

/// MAE and pooled R^2 = 1 - SS_res / SS_tot, SS_tot centred on the pooled
/// truth mean. Throws ContractViolation for shape mismatch and Error
/// ("undefined-r2") when SS_tot is 0.
Metrics metrics(const MatD& predictions, const MatD& truths);

struct ViolationStats {
  double max_violation = 0.0;        ///< largest entry of max(0, Gx - h)
  int max_violation_constraint = -1; ///< 0-based row of that entry, -1 if none
  double mean_violation = 0.0;       ///< mean of ||max(0, Gx - h)||
  double mean_complementarity = 0.0; ///< mean of ||lambda .* (Gx - h)||
  double mean_stationarity = 0.0;    ///< mean of ||(x - a) + G^T lambda||
};

ViolationStats kkt_violation_report(std::span<const ProblemInstance> insts, const MatD& x_hat,
                                    const MatD& lambda_hat);

struct BenchRow {
  int batch_size = 0;
  double predict_ms = 0.0;
  double oracle_ms = 0.0;
  double ratio = 0.0;  ///< oracle_ms / predict_ms
};

struct EvalReport {
  Metrics metrics;
  ViolationStats violations;
  std::vector<BenchRow> timing;
  int threads = 1;
  std::uint64_t validation_seed = 0;
  std::size_t samples = 0;
};

/// Predictions of `params` on `set`, scored against the oracle.
EvalReport evaluate(const NetworkParams& params, const ValidationSet& set);

inline constexpr int kBenchWarmup = 3;
inline constexpr int kBenchRepetitions = 10;

/// Median wall-clock of one batched forward pass and of building plus
/// projecting the same instances, per batch size. Inputs cycle through
/// `source`. Runs single-threaded and restores the previous thread count.
/// Throws ContractViolation for batch sizes below 1 or an empty source.
std::vector<BenchRow> bench(const NetworkParams& params, const ParamBatch& source,
                            std::span<const int> batch_sizes, int repetitions = kBenchRepetitions,
                            int warmup = kBenchWarmup);

/// Published full-scale results, reported next to the measured metrics.
inline constexpr double kReferenceMae = 0.0056;
inline constexpr double kReferenceR2 = 0.9972;

/// JSON document; constraint numbers in it are 1-based.
std::string to_json(const EvalReport& report);
std::string bench_csv(std::span<const BenchRow> rows);

}  // namespace kinn
