#include "kinn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "kinn/aggregator.hpp"
#include "kinn/error.hpp"

namespace kinn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw ConfigError("initial_lr", "must be > 0");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ConfigError("lr_gamma", "must be in (0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon", "must be > 0");
  if (patience < 1) throw ConfigError("patience", "must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps", "must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
  if (!(improvement_tolerance >= 0.0)) throw ConfigError("improvement_tolerance", "must be >= 0");
  if (arch.width < 1) throw ConfigError("width", "must be >= 1");
  if (arch.blocks < 0) throw ConfigError("blocks", "must be >= 0");
  if (arch.input_dim != kParamDim || arch.primal_dim != kPrimalDim ||
      arch.inequality_dim != kConstraintCount || arch.equality_dim != 0) {
    throw ConfigError("arch", "input/output dimensions must match the generator problem");
  }
}

double learning_rate(const TrainConfig& cfg, long step) {
  return cfg.initial_lr * std::pow(cfg.lr_gamma, static_cast<double>(step));
}

void adam_update(std::span<float> params, AdamState& state, std::span<const float> direction,
                 double lr, double beta1, double beta2, double epsilon) {
  if (params.size() != direction.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ContractViolation("adam_update: parameter, state and direction sizes differ");
  }
  ++state.t;
  const auto t = static_cast<double>(state.t);
  const float b1 = static_cast<float>(beta1);
  const float b2 = static_cast<float>(beta2);
  const float step = static_cast<float>(lr / (1.0 - std::pow(beta1, t)));
  const float inv_c2 = static_cast<float>(1.0 / (1.0 - std::pow(beta2, t)));
  const float eps = static_cast<float>(epsilon);
  float* p = params.data();
  float* m = state.m.data();
  float* v = state.v.data();
  const float* g = direction.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = b1 * m[i] + (1.0f - b1) * g[i];
    v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
    p[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
  }
}

ParamBatch sample_batch(Rng& rng, int batch_size) {
  if (batch_size < 1) throw ContractViolation("sample_batch: batch size must be >= 1");
  ParamBatch batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  while (batch.size() < static_cast<std::size_t>(batch_size)) {
    GeneratorParams p;
    p.a_p = rng.uniform(0.0, 1.0);
    p.a_q = rng.uniform(-1.0, 1.0);
    p.p_bar = rng.uniform(0.2, 0.8);
    p.p_plus = rng.uniform(0.0, p.p_bar);
    p.q_bar = rng.uniform(0.2, 0.8);
    p.q_plus = rng.uniform(0.0, p.q_bar);
    p.p_max = rng.uniform(0.0, p.p_bar);
    if (!violated_invariant(p)) batch.push_back(p);
  }
  return batch;
}

LossVector train_step(NetworkParams& params, AdamState& adam, const TrainConfig& cfg, Rng& rng,
                      long step) {
  TrainWorkspace ws;
  return train_step(params, adam, cfg, rng, step, ws);
}

LossVector train_step(NetworkParams& params, AdamState& adam, const TrainConfig& cfg, Rng& rng,
                      long step, TrainWorkspace& ws) {
  const ParamBatch batch = sample_batch(rng, cfg.batch_size);
  const auto insts = build_instances(batch);

  try {
    forward_into(params, batch.theta(), ws.forward);
  } catch (const DivergenceError&) {
    throw DivergenceError("non-finite network output", step);
  }
  const auto& out = ws.forward.out;
  const LossVector loss = batch_loss(insts, out.x_hat, out.lambda_hat);
  if (!loss.all_finite()) throw DivergenceError("non-finite loss", step);

  std::vector<std::vector<float>> grads;
  for (const LossTerm term : loss.terms()) {
    const auto seeds = batch_loss_seeds(insts, out.x_hat, out.lambda_hat, term);
    auto& g = grads.emplace_back(params.size());
    backward_into(params, ws.forward.tape, seeds.d_x, seeds.d_lambda, MatF(), g, ws.backward);
  }
  const LossJacobian jac(std::move(grads));
  Vec64 direction;
  try {
    direction = aggregate_upgrad(jac);
  } catch (const DivergenceError&) {
    throw DivergenceError("non-finite loss Jacobian", step);
  }
  if (!direction.allFinite()) throw DivergenceError("non-finite update direction", step);

  ws.direction.resize(params.size());
  Eigen::Map<Eigen::VectorXf>(ws.direction.data(), direction.size()) = direction.cast<float>();
  adam_update(params.values(), adam, ws.direction, learning_rate(cfg, step), cfg.adam_beta1,
              cfg.adam_beta2, cfg.adam_epsilon);
  return loss;
}

bool EarlyStopping::update(const std::vector<double>& terms) {
  if (best_.empty()) best_.assign(terms.size(), std::numeric_limits<double>::infinity());
  if (terms.size() != best_.size()) throw ContractViolation("EarlyStopping: term count changed");
  bool progress = false;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i] < best_[i] - tolerance_) progress = true;
    if (terms[i] < best_[i]) best_[i] = terms[i];
  }
  stale_ = progress ? 0 : stale_ + 1;
  return stale_ >= patience_;
}

std::string format_log_record(const TrainLogRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  return fmt::format("{},{},{},{},{},{},{},{:.3f}", r.step, r.lr, r.loss.stationarity,
                     r.loss.inequality, r.loss.complementarity, opt(r.mae), opt(r.r2), r.ms);
}

void write_log_csv(std::ostream& os, std::span<const TrainLogRecord> records) {
  os << kTrainLogHeader << '\n';
  for (const auto& r : records) os << format_log_record(r) << '\n';
}

TrainResult run_training(const TrainConfig& cfg, std::ostream* progress) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  Rng rng(cfg.seed);
  NetworkParams params = init_params(rng, cfg.arch);
  AdamState adam(params.size());
  const ValidationSet vset = build_validation_set(cfg.validation_seed);
  EarlyStopping stopper(cfg.patience, cfg.improvement_tolerance);

  std::ofstream log_file;
  if (!cfg.log_out.empty()) {
    log_file.open(cfg.log_out, std::ios::binary | std::ios::trunc);
    if (!log_file) throw IoError("cannot open log file " + cfg.log_out);
    log_file << kTrainLogHeader << '\n';
  }

  TrainWorkspace ws;
  TrainResult result{params, std::nullopt, std::numeric_limits<double>::infinity(), {}, "max_steps", {}};
  for (long step = 0; step < cfg.max_steps; ++step) {
    TrainLogRecord rec;
    rec.step = step;
    rec.lr = learning_rate(cfg, step);
    rec.loss = train_step(params, adam, cfg, rng, step, ws);
    const bool stop = stopper.update(rec.loss.values());
    const bool last = stop || step + 1 == cfg.max_steps;

    if ((step + 1) % cfg.eval_every == 0 || last) {
      const EvalReport report = evaluate(params, vset);
      rec.mae = report.metrics.mae;
      rec.r2 = report.metrics.r2;
      if (report.metrics.mae < result.best_mae) {
        result.best_mae = report.metrics.mae;
        result.best_params = params;
        if (!cfg.best_checkpoint_out.empty()) save_checkpoint(params, cfg.best_checkpoint_out);
      }
      if (progress) {
        fmt::print(*progress, "step {:>6}  lr {:.3e}  S {:.5f}  I {:.5f}  C {:.6f}  mae {:.5f}  r2 {:.5f}\n",
                   step, rec.lr, rec.loss.stationarity, rec.loss.inequality,
                   rec.loss.complementarity, *rec.mae, *rec.r2);
        progress->flush();
      }
    }
    rec.ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    if (log_file.is_open()) {
      log_file << format_log_record(rec) << '\n';
      if (rec.mae) log_file.flush();
    }
    result.log.push_back(rec);
    if (stop) {
      result.stop_reason = "patience";
      break;
    }
  }

  result.final_params = params;
  result.final_report = evaluate(params, vset);
  if (!cfg.checkpoint_out.empty()) save_checkpoint(params, cfg.checkpoint_out);
  return result;
}

}  // namespace kinn
