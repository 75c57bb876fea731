#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinn/linalg.hpp"

namespace kinn {

inline constexpr int kParamDim = 7;
inline constexpr int kPrimalDim = 2;
inline constexpr int kConstraintCount = 7;

/// Smallest accepted P_bar - P_plus; below this the oblique edges have no run.
inline constexpr double kMinCornerGap = 1e-9;

using Point = Eigen::Vector2d;
using ConstraintVec = Eigen::Matrix<double, kConstraintCount, 1>;
using ConstraintMat = Eigen::Matrix<double, kConstraintCount, kPrimalDim>;

/// Physical parameters (all per-unit) of one renewable generator plus the
/// requested setpoint. Field order matches the network input column order.
struct GeneratorParams {
  double a_p = 0.0;      ///< requested active power
  double a_q = 0.0;      ///< requested reactive power
  double p_bar = 0.0;    ///< maximum active power
  double p_plus = 0.0;   ///< active power at the capability-curve corner
  double q_bar = 0.0;    ///< maximum reactive power magnitude
  double q_plus = 0.0;   ///< reactive power magnitude at P_bar
  double p_max = 0.0;    ///< currently available active power

  static GeneratorParams from_row(std::span<const double, kParamDim> row);
  std::array<double, kParamDim> to_row() const;

  friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

/// Column names of a parameter row, in order.
inline constexpr std::array<const char*, kParamDim> kParamColumns = {
    "a_p", "a_q", "p_bar", "p_plus", "q_bar", "q_plus", "p_max"};

/// Returns a description of the first violated invariant, if any.
std::optional<std::string> violated_invariant(const GeneratorParams& params);

/// Throws DegenerateGeometry when P_bar - P_plus < kMinCornerGap and
/// ContractViolation for any other violated invariant.
void validate(const GeneratorParams& params);

/// Batch of parameter rows stored densely as a B x 7 row-major matrix.
class ParamBatch {
 public:
  ParamBatch() = default;
  explicit ParamBatch(std::span<const GeneratorParams> rows);

  std::size_t size() const noexcept { return data_.size() / kParamDim; }
  bool empty() const noexcept { return data_.empty(); }

  GeneratorParams operator[](std::size_t i) const;
  void push_back(const GeneratorParams& row);
  void reserve(std::size_t n) { data_.reserve(n * kParamDim); }

  /// Network input: B x 7 in column order (a_p, a_q, p_bar, ..., p_max).
  MatF theta() const;

 private:
  std::vector<double> data_;
};

struct TauRho {
  double tau1 = 0.0;
  double rho1 = 0.0;
  double tau2 = 0.0;
  double rho2 = 0.0;
};

/// Slopes and intercepts of the two oblique capability edges.
TauRho tau_rho(const GeneratorParams& params);

/// Materialized constraint data Gx <= h and target a for one parameter row.
///
/// Row order of G and h:
///   0: -P <= 0            1: P <= P_bar          2: P <= P_max
///   3: -Q <= Q_bar        4: Q <= Q_bar
///   5: Q - tau1 P <= rho1 6: tau2 P - Q <= -rho2
struct ProblemInstance {
  ConstraintMat G = ConstraintMat::Zero();
  ConstraintVec h = ConstraintVec::Zero();
  Point a = Point::Zero();
  TauRho edges;
};

ProblemInstance build_instance(const GeneratorParams& params);
std::vector<ProblemInstance> build_instances(const ParamBatch& batch);

/// Gx - h; non-positive entries are satisfied constraints.
ConstraintVec eval_constraints(const ProblemInstance& inst, const Point& x);

/// Parametric convex program
///
///   min f(x)  s.t.  g_i(x) <= 0,  A x - b = 0
///
/// with the parameter vector already bound. Constraint Hessians default to
/// zero (affine constraints).
class ProblemContract {
 public:
  virtual ~ProblemContract() = default;

  virtual int primal_dim() const = 0;
  virtual int inequality_count() const = 0;
  virtual int equality_count() const { return 0; }

  virtual double cost(const Vec64& x) const = 0;
  virtual Vec64 cost_gradient(const Vec64& x) const = 0;
  virtual Mat64 cost_hessian(const Vec64& x) const = 0;

  /// Values g_i(x), length m.
  virtual Vec64 constraints(const Vec64& x) const = 0;
  /// m x n matrix whose row i is the gradient of g_i.
  virtual Mat64 constraint_jacobian(const Vec64& x) const = 0;
  /// Hessian of g_i; zero unless overridden.
  virtual Mat64 constraint_hessian(int i, const Vec64& x) const;

  /// p x n.
  virtual Mat64 equality_matrix() const;
  virtual Vec64 equality_rhs() const;
};

/// The generator projection problem min 0.5 ||a - x||^2 s.t. Gx <= h.
class GeneratorProblem final : public ProblemContract {
 public:
  explicit GeneratorProblem(ProblemInstance inst) : inst_(std::move(inst)) {}

  const ProblemInstance& instance() const noexcept { return inst_; }

  int primal_dim() const override { return kPrimalDim; }
  int inequality_count() const override { return kConstraintCount; }

  double cost(const Vec64& x) const override;
  Vec64 cost_gradient(const Vec64& x) const override;
  Mat64 cost_hessian(const Vec64& x) const override;
  Vec64 constraints(const Vec64& x) const override;
  Mat64 constraint_jacobian(const Vec64& x) const override;

 private:
  ProblemInstance inst_;
};

}  // namespace kinn
