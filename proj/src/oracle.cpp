#include "kinn/oracle.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

#include "kinn/error.hpp"

namespace kinn {

namespace {

constexpr double kParallelDet = 1e-12;
constexpr double kDistanceTie = 1e-12;

bool primal_feasible(const ProblemInstance& inst, const Point& x) {
  return ((inst.G * x - inst.h).array() <= kOracleFeasTol).all();
}

}  // namespace

OracleSolution project(const ProblemInstance& inst) {
  OracleSolution best;
  bool found = false;
  auto consider = [&](const Point& x, const ConstraintVec& lambda, std::vector<int> active) {
    if (!x.allFinite() || !primal_feasible(inst, x)) return;
    if ((lambda.array() < -kOracleMultiplierTol).any()) return;
    const double d = (inst.a - x).norm();
    // Candidates arrive ordered by set size, then lexicographically, so a tie
    // keeps the incumbent.
    if (found && d >= best.distance - kDistanceTie) return;
    best.x_star = x;
    best.lambda_star = lambda.cwiseMax(0.0);
    best.active_set = std::move(active);
    best.distance = d;
    found = true;
  };

  consider(inst.a, ConstraintVec::Zero(), {});

  for (int i = 0; i < kConstraintCount; ++i) {
    const Point g = inst.G.row(i).transpose();
    const double gg = g.squaredNorm();
    if (gg == 0.0) continue;
    const double mult = (g.dot(inst.a) - inst.h[i]) / gg;
    ConstraintVec lambda = ConstraintVec::Zero();
    lambda[i] = mult;
    consider(inst.a - mult * g, lambda, {i});
  }

  for (int i = 0; i < kConstraintCount; ++i) {
    for (int j = i + 1; j < kConstraintCount; ++j) {
      Eigen::Matrix2d m;
      m.row(0) = inst.G.row(i);
      m.row(1) = inst.G.row(j);
      if (std::abs(m.determinant()) < kParallelDet) continue;
      const Point x = m.inverse() * Point(inst.h[i], inst.h[j]);
      // Stationarity x - a + m^T mu = 0.
      const Point mu = m.transpose().inverse() * (inst.a - x);
      ConstraintVec lambda = ConstraintVec::Zero();
      lambda[i] = mu[0];
      lambda[j] = mu[1];
      consider(x, lambda, {i, j});
    }
  }

  if (!found) throw InfeasibleInstance("projection: no feasible candidate (empty feasible set)");
  return best;
}

std::vector<OracleSolution> batch_project(std::span<const ProblemInstance> insts,
                                          double* elapsed_ms) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<OracleSolution> out;
  out.reserve(insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i) {
    try {
      out.push_back(project(insts[i]));
    } catch (const InfeasibleInstance& e) {
      throw InfeasibleInstance("instance " + std::to_string(i) + ": " + e.what());
    }
  }
  if (elapsed_ms) {
    *elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                      .count();
  }
  return out;
}

}  // namespace kinn
