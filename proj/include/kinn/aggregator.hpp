#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "kinn/linalg.hpp"

namespace kinn {

/// Per-term gradients of the vector loss, one row per term (L x P), plus
/// their Gram matrix. Rows are stored as float; every reduction over them
/// (Gram entries, combinations) accumulates in double.
class LossJacobian {
 public:
  /// Rows must share one length. Throws ContractViolation otherwise.
  explicit LossJacobian(std::vector<std::vector<float>> rows);

  Eigen::Index terms() const noexcept { return static_cast<Eigen::Index>(rows_.size()); }
  Eigen::Index params() const noexcept { return params_; }
  std::span<const float> row(Eigen::Index i) const { return rows_[static_cast<std::size_t>(i)]; }
  const Mat64& gram() const noexcept { return gram_; }

  /// sum_j weights[j] * row(j), accumulated in double.
  Vec64 combine(const Vec64& weights) const;

 private:
  std::vector<std::vector<float>> rows_;
  Eigen::Index params_ = 0;
  Mat64 gram_;
};

/// Arithmetic mean of the rows.
Vec64 aggregate_mean(const LossJacobian& jac);

/// Combination weights w such that UPGrad's direction is J^T w:
/// w = (1/L) sum_i (e_i + v_i) with v_i = nnls_solve(G, G e_i).
/// The subproblems are solved for rows rescaled to unit length, which leaves
/// every projection unchanged. Throws DivergenceError for non-finite entries.
Vec64 upgrad_weights(const Mat64& gram);

/// Mean over rows of each row's projection onto the dual cone
/// {v : <v, g_j> >= 0 for all j}.
Vec64 aggregate_upgrad(const LossJacobian& jac);

/// argmin over w >= 0 of 0.5 w^T G w + c^T w for a symmetric PSD G with at
/// most 8 rows, by enumerating every support set. Throws SolverFailure if no
/// support yields a KKT point.
Vec64 nnls_solve(const Mat64& gram, const Vec64& c);

}  // namespace kinn
