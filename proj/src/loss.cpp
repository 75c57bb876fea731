#include "kinn/loss.hpp"

#include <cmath>
#include <string>

#include "kinn/error.hpp"

namespace kinn {

namespace {

template <typename Vector>
void check_multipliers(const Vector& lambda) {
  if ((lambda.array() < 0.0).any()) {
    throw ContractViolation("loss: multipliers must be non-negative");
  }
}

// Gradient of ||v|| with respect to v, with the zero subgradient at v = 0.
template <typename Vector>
Vector unit(const Vector& v) {
  const double n = v.norm();
  if (n == 0.0) return Vector::Zero(v.size());
  return v / n;
}

void check_batch(std::span<const ProblemInstance> insts, const MatF& x_hat,
                 const MatF& lambda_hat) {
  if (insts.empty()) throw ContractViolation("batch_loss: empty batch");
  const auto b = static_cast<Eigen::Index>(insts.size());
  if (x_hat.rows() != b || lambda_hat.rows() != b || x_hat.cols() != kPrimalDim ||
      lambda_hat.cols() != kConstraintCount) {
    throw ContractViolation("batch_loss: prediction shapes do not match the batch");
  }
}

Point row_point(const MatF& x_hat, Eigen::Index i) {
  return x_hat.row(i).transpose().cast<double>();
}

ConstraintVec row_multipliers(const MatF& lambda_hat, Eigen::Index i) {
  return lambda_hat.row(i).transpose().cast<double>();
}

}  // namespace

const char* to_string(LossTerm term) {
  switch (term) {
    case LossTerm::Stationarity: return "stationarity";
    case LossTerm::Inequality: return "inequality";
    case LossTerm::Equality: return "equality";
    case LossTerm::Complementarity: return "complementarity";
  }
  return "unknown";
}

LossTerms loss_terms(const ProblemInstance& inst, const Point& x_hat,
                     const ConstraintVec& lambda_hat) {
  check_multipliers(lambda_hat);
  const ConstraintVec g = eval_constraints(inst, x_hat);
  LossTerms t;
  t.stationarity = ((x_hat - inst.a) + inst.G.transpose() * lambda_hat).norm();
  t.inequality = g.cwiseMax(0.0).norm();
  t.complementarity = lambda_hat.cwiseProduct(g).norm();
  return t;
}

LossSeeds loss_seeds(const ProblemInstance& inst, const Point& x_hat,
                     const ConstraintVec& lambda_hat, LossTerm term) {
  const ConstraintVec g = eval_constraints(inst, x_hat);
  LossSeeds s;
  switch (term) {
    case LossTerm::Stationarity: {
      const Point u = unit<Point>((x_hat - inst.a) + inst.G.transpose() * lambda_hat);
      s.d_x = u;
      s.d_lambda = inst.G * u;
      break;
    }
    case LossTerm::Inequality: {
      s.d_x = inst.G.transpose() * unit<ConstraintVec>(g.cwiseMax(0.0));
      break;
    }
    case LossTerm::Complementarity: {
      const ConstraintVec u = unit<ConstraintVec>(lambda_hat.cwiseProduct(g));
      s.d_x = inst.G.transpose() * lambda_hat.cwiseProduct(u);
      s.d_lambda = g.cwiseProduct(u);
      break;
    }
    case LossTerm::Equality:
      break;
  }
  return s;
}

std::vector<double> LossVector::values() const {
  std::vector<double> v{stationarity, inequality};
  if (equality) v.push_back(*equality);
  v.push_back(complementarity);
  return v;
}

std::vector<LossTerm> LossVector::terms() const {
  std::vector<LossTerm> t{LossTerm::Stationarity, LossTerm::Inequality};
  if (equality) t.push_back(LossTerm::Equality);
  t.push_back(LossTerm::Complementarity);
  return t;
}

bool LossVector::all_finite() const {
  for (double v : values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

LossVector batch_loss(std::span<const ProblemInstance> insts, const MatF& x_hat,
                      const MatF& lambda_hat) {
  check_batch(insts, x_hat, lambda_hat);
  double s = 0.0, in = 0.0, c = 0.0;
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto t = loss_terms(insts[i], row_point(x_hat, r), row_multipliers(lambda_hat, r));
    s += t.stationarity;
    in += t.inequality;
    c += t.complementarity;
  }
  const double b = static_cast<double>(insts.size());
  LossVector out;
  out.stationarity = s / b;
  out.inequality = in / b;
  out.complementarity = c / b;
  return out;
}

BatchSeeds batch_loss_seeds(std::span<const ProblemInstance> insts, const MatF& x_hat,
                            const MatF& lambda_hat, LossTerm term) {
  check_batch(insts, x_hat, lambda_hat);
  const auto b = static_cast<Eigen::Index>(insts.size());
  const double scale = 1.0 / static_cast<double>(b);
  BatchSeeds out{MatF(b, kPrimalDim), MatF(b, kConstraintCount)};
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto s = loss_seeds(insts[static_cast<std::size_t>(i)], row_point(x_hat, i),
                              row_multipliers(lambda_hat, i), term);
    out.d_x.row(i) = (s.d_x * scale).transpose().cast<float>();
    out.d_lambda.row(i) = (s.d_lambda * scale).transpose().cast<float>();
  }
  return out;
}

namespace {

void check_general(const ProblemContract& problem, const Vec64& x, const Vec64& lambda,
                   const Vec64& nu) {
  if (x.size() != problem.primal_dim() || lambda.size() != problem.inequality_count() ||
      nu.size() != problem.equality_count()) {
    throw ContractViolation("kkt_terms: argument sizes do not match the problem");
  }
  check_multipliers(lambda);
}

Vec64 stationarity_residual(const ProblemContract& problem, const Vec64& x, const Vec64& lambda,
                            const Vec64& nu) {
  Vec64 r = problem.cost_gradient(x) + problem.constraint_jacobian(x).transpose() * lambda;
  if (problem.equality_count() > 0) r += problem.equality_matrix().transpose() * nu;
  return r;
}

}  // namespace

KktTerms kkt_terms(const ProblemContract& problem, const Vec64& x, const Vec64& lambda,
                   const Vec64& nu) {
  check_general(problem, x, lambda, nu);
  const Vec64 g = problem.constraints(x);
  KktTerms t;
  t.stationarity = stationarity_residual(problem, x, lambda, nu).norm();
  t.inequality = g.cwiseMax(0.0).norm();
  if (problem.equality_count() > 0) {
    t.equality = (problem.equality_matrix() * x - problem.equality_rhs()).norm();
  }
  t.complementarity = lambda.cwiseProduct(g).norm();
  return t;
}

KktSeeds kkt_seeds(const ProblemContract& problem, const Vec64& x, const Vec64& lambda,
                   const Vec64& nu, LossTerm term) {
  check_general(problem, x, lambda, nu);
  const int n = problem.primal_dim();
  const int m = problem.inequality_count();
  const int p = problem.equality_count();
  KktSeeds s{Vec64::Zero(n), Vec64::Zero(m), Vec64::Zero(p)};
  const Vec64 g = problem.constraints(x);
  const Mat64 jac = problem.constraint_jacobian(x);
  switch (term) {
    case LossTerm::Stationarity: {
      const Vec64 u = unit<Vec64>(stationarity_residual(problem, x, lambda, nu));
      Mat64 hess = problem.cost_hessian(x);
      for (int j = 0; j < m; ++j) {
        if (lambda[j] != 0.0) hess += lambda[j] * problem.constraint_hessian(j, x);
      }
      s.d_x = hess.transpose() * u;
      s.d_lambda = jac * u;
      if (p > 0) s.d_nu = problem.equality_matrix() * u;
      break;
    }
    case LossTerm::Inequality:
      s.d_x = jac.transpose() * unit<Vec64>(g.cwiseMax(0.0));
      break;
    case LossTerm::Equality:
      if (p > 0) {
        const Mat64 a = problem.equality_matrix();
        s.d_x = a.transpose() * unit<Vec64>(a * x - problem.equality_rhs());
      }
      break;
    case LossTerm::Complementarity: {
      const Vec64 u = unit<Vec64>(lambda.cwiseProduct(g));
      s.d_x = jac.transpose() * lambda.cwiseProduct(u);
      s.d_lambda = g.cwiseProduct(u);
      break;
    }
  }
  return s;
}

}  // namespace kinn
