#include "kinn/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "kinn/error.hpp"

namespace kinn {

namespace {

constexpr double kNullDirectionTol = 1e-9;

constexpr int kMaxTerms = 8;
constexpr double kRidge = 1e-12;
constexpr double kWeightTol = 1e-12;
constexpr double kDualTol = 1e-10;
constexpr double kMinRcond = 1e-12;

Vec64 solve_support(const Mat64& g_ss, const Vec64& rhs) {
  Eigen::LDLT<Mat64> ldlt(g_ss);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() >= kMinRcond) {
    return ldlt.solve(rhs);
  }
  const Mat64 ridged = g_ss + kRidge * Mat64::Identity(g_ss.rows(), g_ss.cols());
  return ridged.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace

LossJacobian::LossJacobian(std::vector<std::vector<float>> rows) : rows_(std::move(rows)) {
  params_ = rows_.empty() ? 0 : static_cast<Eigen::Index>(rows_.front().size());
  for (const auto& r : rows_) {
    if (static_cast<Eigen::Index>(r.size()) != params_) {
      throw ContractViolation("LossJacobian: gradient rows differ in length");
    }
  }
  const Eigen::Index l = terms();
  gram_.setZero(l, l);
  // One pass over the rows in cache-sized chunks instead of one per pair.
  constexpr Eigen::Index kChunk = 4096;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block(l, kChunk);
  for (Eigen::Index start = 0; start < params_; start += kChunk) {
    const Eigen::Index n = std::min(kChunk, params_ - start);
    for (Eigen::Index i = 0; i < l; ++i) {
      block.row(i).head(n) =
          Eigen::Map<const Eigen::RowVectorXf>(rows_[i].data() + start, n).cast<double>();
    }
    for (Eigen::Index i = 0; i < l; ++i) {
      for (Eigen::Index j = i; j < l; ++j) {
        gram_(i, j) += block.row(i).head(n).dot(block.row(j).head(n));
      }
    }
  }
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) gram_(i, j) = gram_(j, i);
  }
}

Vec64 LossJacobian::combine(const Vec64& weights) const {
  if (weights.size() != terms()) throw ContractViolation("LossJacobian: weight count mismatch");
  Vec64 out = Vec64::Zero(params_);
  for (Eigen::Index j = 0; j < terms(); ++j) {
    out += weights[j] * Eigen::Map<const Eigen::VectorXf>(rows_[j].data(), params_).cast<double>();
  }
  return out;
}

Vec64 aggregate_mean(const LossJacobian& jac) {
  const Eigen::Index l = jac.terms();
  if (l == 0) return Vec64::Zero(jac.params());
  return jac.combine(Vec64::Constant(l, 1.0 / static_cast<double>(l)));
}

Vec64 nnls_solve(const Mat64& gram, const Vec64& c) {
  const auto l = gram.rows();
  if (gram.cols() != l || c.size() != l) {
    throw ContractViolation("nnls_solve: Gram matrix and linear term sizes differ");
  }
  if (l > kMaxTerms) {
    throw ContractViolation("nnls_solve: at most " + std::to_string(kMaxTerms) + " terms supported");
  }

  Vec64 best;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_norm = std::numeric_limits<double>::infinity();
  const unsigned masks = 1u << l;
  for (unsigned mask = 0; mask < masks; ++mask) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < l; ++i) {
      if (mask & (1u << i)) support.push_back(i);
    }
    Vec64 w = Vec64::Zero(l);
    if (!support.empty()) {
      const auto k = static_cast<Eigen::Index>(support.size());
      Mat64 g_ss(k, k);
      Vec64 rhs(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        rhs[a] = -c[support[a]];
        for (Eigen::Index b = 0; b < k; ++b) g_ss(a, b) = gram(support[a], support[b]);
      }
      const Vec64 w_s = solve_support(g_ss, rhs);
      if (!w_s.allFinite() || (w_s.array() < -kWeightTol).any()) continue;
      for (Eigen::Index a = 0; a < k; ++a) w[support[a]] = std::max(0.0, w_s[a]);
    }
    const Vec64 residual = gram * w + c;
    bool dual_ok = true;
    for (Eigen::Index i = 0; i < l && dual_ok; ++i) {
      if (!(mask & (1u << i)) && residual[i] < -kDualTol) dual_ok = false;
    }
    if (!dual_ok) continue;

    const double obj = 0.5 * w.dot(gram * w) + c.dot(w);
    const double norm = w.norm();
    const double tie = 1e-12 * std::max(1.0, std::abs(best_obj));
    if (best.size() == 0 || obj < best_obj - tie || (std::abs(obj - best_obj) <= tie && norm < best_norm)) {
      best = w;
      best_obj = obj;
      best_norm = norm;
    }
  }
  if (best.size() == 0) throw SolverFailure("nnls_solve: no support set satisfies the KKT conditions");
  return best;
}

Vec64 upgrad_weights(const Mat64& gram) {
  const auto l = gram.rows();
  if (!gram.allFinite()) throw DivergenceError("non-finite Gram matrix in UPGrad", -1);
  Vec64 weights = Vec64::Constant(l, 1.0 / static_cast<double>(l));
  if (l == 0 || !(gram.diagonal().maxCoeff() > 0.0)) return weights;
  // Solve with unit-length rows: J' = D^-1 J gives G' = D^-1 G D^-1 and the
  // solution for row i maps back as w_i = d_i D^-1 nnls(G', G' e_i).
  Vec64 norms = gram.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index i = 0; i < l; ++i) {
    if (!(norms[i] > 0.0)) norms[i] = 1.0;
  }
  const Vec64 inv = norms.cwiseInverse();
  const Mat64 unit = inv.asDiagonal() * gram * inv.asDiagonal();
  for (Eigen::Index i = 0; i < l; ++i) {
    const Vec64 u = nnls_solve(unit, unit.col(i));
    weights += (norms[i] / static_cast<double>(l)) * inv.cwiseProduct(u);
  }
  return weights;
}

Vec64 aggregate_upgrad(const LossJacobian& jac) {
  if (jac.terms() == 0) return Vec64::Zero(jac.params());
  Vec64 d = jac.combine(upgrad_weights(jac.gram()));
  // When the dual cone is (numerically) {0} the combination is rounding
  // noise with no guaranteed sign against the gradients.
  const double longest = std::sqrt(jac.gram().diagonal().maxCoeff());
  if (d.norm() <= kNullDirectionTol * longest) d.setZero();
  return d;
}

}  // namespace kinn
