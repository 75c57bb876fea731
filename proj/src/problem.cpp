#include "kinn/problem.hpp"

#include <cmath>

#include "kinn/error.hpp"

namespace kinn {

GeneratorParams GeneratorParams::from_row(std::span<const double, kParamDim> row) {
  return {row[0], row[1], row[2], row[3], row[4], row[5], row[6]};
}

std::array<double, kParamDim> GeneratorParams::to_row() const {
  return {a_p, a_q, p_bar, p_plus, q_bar, q_plus, p_max};
}

std::optional<std::string> violated_invariant(const GeneratorParams& p) {
  const auto row = p.to_row();
  for (int i = 0; i < kParamDim; ++i) {
    if (!std::isfinite(row[i])) return std::string(kParamColumns[i]) + " is not finite";
  }
  if (p.p_bar < 0.0) return "p_bar < 0";
  if (p.q_bar < 0.0) return "q_bar < 0";
  if (!(p.p_plus > 0.0)) return "p_plus <= 0";
  if (p.p_plus > p.p_bar) return "p_plus > p_bar";
  if (!(p.q_plus > 0.0)) return "q_plus <= 0";
  if (p.q_plus > p.q_bar) return "q_plus > q_bar";
  if (p.p_max < 0.0) return "p_max < 0";
  if (p.p_max > p.p_bar) return "p_max > p_bar";
  if (p.p_bar - p.p_plus < kMinCornerGap) return "p_bar == p_plus (degenerate oblique edges)";
  return std::nullopt;
}

void validate(const GeneratorParams& params) {
  if (auto why = violated_invariant(params)) {
    if (why->starts_with("p_bar == p_plus")) throw DegenerateGeometry(*why);
    throw ContractViolation("invalid generator parameters: " + *why);
  }
}

ParamBatch::ParamBatch(std::span<const GeneratorParams> rows) {
  reserve(rows.size());
  for (const auto& r : rows) push_back(r);
}

GeneratorParams ParamBatch::operator[](std::size_t i) const {
  return GeneratorParams::from_row(
      std::span<const double, kParamDim>(data_.data() + i * kParamDim, kParamDim));
}

void ParamBatch::push_back(const GeneratorParams& row) {
  const auto values = row.to_row();
  data_.insert(data_.end(), values.begin(), values.end());
}

MatF ParamBatch::theta() const {
  const auto rows = static_cast<Eigen::Index>(size());
  return Eigen::Map<const MatD>(data_.data(), rows, kParamDim).cast<float>();
}

TauRho tau_rho(const GeneratorParams& p) {
  const double run = p.p_bar - p.p_plus;
  if (!(std::abs(run) >= kMinCornerGap)) {
    throw DegenerateGeometry("p_bar == p_plus (degenerate oblique edges)");
  }
  TauRho e;
  e.tau1 = (p.q_plus - p.q_bar) / run;
  e.rho1 = p.q_bar - e.tau1 * p.p_plus;
  e.tau2 = (p.q_bar - p.q_plus) / run;
  e.rho2 = -p.q_bar - e.tau2 * p.p_plus;
  return e;
}

ProblemInstance build_instance(const GeneratorParams& p) {
  validate(p);
  ProblemInstance inst;
  inst.edges = tau_rho(p);
  const auto& e = inst.edges;
  // clang-format off
  inst.G << -1.0,     0.0,
             1.0,     0.0,
             1.0,     0.0,
             0.0,    -1.0,
             0.0,     1.0,
            -e.tau1,  1.0,
             e.tau2, -1.0;
  inst.h << 0.0, p.p_bar, p.p_max, p.q_bar, p.q_bar, e.rho1, -e.rho2;
  // clang-format on
  inst.a = Point(p.a_p, p.a_q);
  return inst;
}

std::vector<ProblemInstance> build_instances(const ParamBatch& batch) {
  std::vector<ProblemInstance> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(build_instance(batch[i]));
  return out;
}

ConstraintVec eval_constraints(const ProblemInstance& inst, const Point& x) {
  return inst.G * x - inst.h;
}

Mat64 ProblemContract::constraint_hessian(int /*i*/, const Vec64& /*x*/) const {
  return Mat64::Zero(primal_dim(), primal_dim());
}

Mat64 ProblemContract::equality_matrix() const { return Mat64(equality_count(), primal_dim()); }

Vec64 ProblemContract::equality_rhs() const { return Vec64(equality_count()); }

double GeneratorProblem::cost(const Vec64& x) const {
  return 0.5 * (inst_.a - x).squaredNorm();
}

Vec64 GeneratorProblem::cost_gradient(const Vec64& x) const { return x - inst_.a; }

Mat64 GeneratorProblem::cost_hessian(const Vec64& /*x*/) const {
  return Mat64::Identity(kPrimalDim, kPrimalDim);
}

Vec64 GeneratorProblem::constraints(const Vec64& x) const {
  return inst_.G * x - inst_.h;
}

Mat64 GeneratorProblem::constraint_jacobian(const Vec64& /*x*/) const { return inst_.G; }

}  // namespace kinn
