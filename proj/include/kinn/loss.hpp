#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kinn/linalg.hpp"
#include "kinn/problem.hpp"

namespace kinn {

/// The KKT residual terms minimized during training.
enum class LossTerm { Stationarity, Inequality, Equality, Complementarity };

const char* to_string(LossTerm term);

/// Per-instance residual norms for the generator problem:
///   stationarity    ||(x - a) + G^T lambda||
///   inequality      ||max(0, Gx - h)||
///   complementarity ||lambda .* (Gx - h)||
struct LossTerms {
  double stationarity = 0.0;
  double inequality = 0.0;
  double complementarity = 0.0;
};

/// Throws ContractViolation if any multiplier is negative.
LossTerms loss_terms(const ProblemInstance& inst, const Point& x_hat,
                     const ConstraintVec& lambda_hat);

struct LossSeeds {
  Point d_x = Point::Zero();
  ConstraintVec d_lambda = ConstraintVec::Zero();
};

/// Exact partial derivatives of one per-instance term with respect to
/// (x_hat, lambda_hat). A term whose norm is zero gets zero seeds, and
/// max(0, .) has derivative 0 at 0. `LossTerm::Equality` yields zero seeds
/// since the generator problem has no equality constraints.
LossSeeds loss_seeds(const ProblemInstance& inst, const Point& x_hat,
                     const ConstraintVec& lambda_hat, LossTerm term);

/// Batch-averaged loss terms. `equality` is present only for problems with
/// equality constraints.
struct LossVector {
  double stationarity = 0.0;
  double inequality = 0.0;
  double complementarity = 0.0;
  std::optional<double> equality;

  /// Terms in training order: S, I, [E], C.
  std::vector<double> values() const;
  std::vector<LossTerm> terms() const;
  bool all_finite() const;
};

/// Mean of the per-instance terms. `x_hat` is B x 2 and `lambda_hat` B x 7.
/// Throws ContractViolation for an empty batch or mismatched sizes.
LossVector batch_loss(std::span<const ProblemInstance> insts, const MatF& x_hat,
                      const MatF& lambda_hat);

/// Seeds of the batch-mean term for network backward, scaled by 1/B.
struct BatchSeeds {
  MatF d_x;
  MatF d_lambda;
};

BatchSeeds batch_loss_seeds(std::span<const ProblemInstance> insts, const MatF& x_hat,
                            const MatF& lambda_hat, LossTerm term);

/// Residual norms for a general problem; `equality` is 0 when p == 0.
struct KktTerms {
  double stationarity = 0.0;
  double inequality = 0.0;
  double equality = 0.0;
  double complementarity = 0.0;
};

KktTerms kkt_terms(const ProblemContract& problem, const Vec64& x, const Vec64& lambda,
                   const Vec64& nu);

struct KktSeeds {
  Vec64 d_x;
  Vec64 d_lambda;
  Vec64 d_nu;
};

/// Partial derivatives of one general-problem term with respect to
/// (x, lambda, nu), using the contract's Hessians for the stationarity term.
KktSeeds kkt_seeds(const ProblemContract& problem, const Vec64& x, const Vec64& lambda,
                   const Vec64& nu, LossTerm term);

}  // namespace kinn
