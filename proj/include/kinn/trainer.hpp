#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinn/eval.hpp"
#include "kinn/linalg.hpp"
#include "kinn/loss.hpp"
#include "kinn/network.hpp"
#include "kinn/problem.hpp"

namespace kinn {

struct TrainConfig {
  int batch_size = 1024;
  double initial_lr = 1e-3;
  double lr_gamma = 0.99986;  ///< applied once per step
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  long patience = 5000;
  long max_steps = 8000;
  long eval_every = 100;
  std::uint64_t seed = 0;
  double improvement_tolerance = 1e-6;
  std::uint64_t validation_seed = kDefaultValidationSeed;
  Architecture arch;

  /// Written when non-empty: final parameters, best-by-MAE parameters and the
  /// per-step CSV log.
  std::string checkpoint_out;
  std::string best_checkpoint_out;
  std::string log_out;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Learning rate used at 0-based step `step`: initial_lr * gamma^step.
double learning_rate(const TrainConfig& cfg, long step);

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  long t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}
};

/// One bias-corrected Adam step treating `direction` as the gradient.
void adam_update(std::span<float> params, AdamState& state, std::span<const float> direction,
                 double lr, double beta1, double beta2, double epsilon);

/// B rows drawn per row in the order a_p ~ U(0,1), a_q ~ U(-1,1),
/// p_bar ~ U(0.2,0.8), p_plus ~ U(0,p_bar), q_bar ~ U(0.2,0.8),
/// q_plus ~ U(0,q_bar), p_max ~ U(0,p_bar). Rows violating an invariant
/// (p_plus or q_plus exactly 0, p_bar - p_plus < kMinCornerGap) are redrawn.
ParamBatch sample_batch(Rng& rng, int batch_size);

/// Sample, forward, per-term backward, UPGrad, Adam. `step` is 0-based and
/// sets the learning rate. Throws DivergenceError carrying `step` on
/// non-finite loss, output or direction; params are untouched in that case.
/// Buffers reused by `train_step` across steps.
struct TrainWorkspace {
  ForwardResult forward;
  BackwardWorkspace backward;
  std::vector<float> direction;
};

LossVector train_step(NetworkParams& params, AdamState& adam, const TrainConfig& cfg, Rng& rng,
                      long step);
LossVector train_step(NetworkParams& params, AdamState& adam, const TrainConfig& cfg, Rng& rng,
                      long step, TrainWorkspace& ws);

/// Stops after `patience` consecutive updates in which no term improved its
/// best value by more than `tolerance`.
class EarlyStopping {
 public:
  EarlyStopping(long patience, double tolerance) : patience_(patience), tolerance_(tolerance) {}

  /// Records one step; returns true when training should stop.
  bool update(const std::vector<double>& terms);
  long stale_steps() const noexcept { return stale_; }
  const std::vector<double>& best() const noexcept { return best_; }

 private:
  long patience_;
  double tolerance_;
  long stale_ = 0;
  std::vector<double> best_;
};

struct TrainLogRecord {
  long step = 0;
  double lr = 0.0;
  LossVector loss;
  std::optional<double> mae;
  std::optional<double> r2;
  double ms = 0.0;  ///< wall-clock since training started
};

inline constexpr const char* kTrainLogHeader = "step,lr,loss_s,loss_i,loss_c,mae,r2,ms";

std::string format_log_record(const TrainLogRecord& rec);
void write_log_csv(std::ostream& os, std::span<const TrainLogRecord> records);

struct TrainResult {
  NetworkParams final_params;
  std::optional<NetworkParams> best_params;
  double best_mae = std::numeric_limits<double>::infinity();
  std::vector<TrainLogRecord> log;
  std::string stop_reason;  ///< "patience" or "max_steps"
  EvalReport final_report;
};

/// Runs `train_step` until early stopping or `max_steps`, evaluating on the
/// validation set every `eval_every` steps and after the last step. The best
/// checkpoint is rewritten whenever the validation MAE improves, so it
/// survives a later divergence. Progress lines go to `progress` if given.
TrainResult run_training(const TrainConfig& cfg, std::ostream* progress = nullptr);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, little-endian:
///   "KINN" | u32 version | u32 input_dim, width, blocks, primal_dim,
///   inequality_dim | f32 tensors in layout order | u64 FNV-1a of the tensor
///   bytes.
void save_checkpoint(const NetworkParams& params, std::ostream& os);
void save_checkpoint(const NetworkParams& params, const std::string& path);
/// Throws CorruptCheckpoint (bad magic, truncation, trailing bytes, checksum)
/// or UnsupportedVersion.
NetworkParams load_checkpoint(std::istream& is);
NetworkParams load_checkpoint(const std::string& path);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

}  // namespace kinn
