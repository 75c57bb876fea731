#pragma once

#include <span>
#include <vector>

#include "kinn/problem.hpp"

namespace kinn {

inline constexpr double kOracleFeasTol = 1e-9;
inline constexpr double kOracleMultiplierTol = 1e-12;

struct OracleSolution {
  Point x_star = Point::Zero();
  ConstraintVec lambda_star = ConstraintVec::Zero();
  /// 0-based constraint rows carrying the solution (empty when a is feasible).
  std::vector<int> active_set;
  double distance = 0.0;  ///< ||a - x_star||
};

/// Euclidean projection of the target onto {x : Gx <= h} with multipliers.
///
/// Enumerates the unconstrained point, the projection onto each constraint
/// line and each vertex of two non-parallel lines, keeps the candidates that
/// are primal feasible (tolerance kOracleFeasTol) and dual feasible
/// (lambda >= -kOracleMultiplierTol), and returns the closest one. Ties prefer
/// the smaller active set, then the lexicographically first.
///
/// Throws InfeasibleInstance when no candidate survives.
OracleSolution project(const ProblemInstance& inst);

/// `project` applied to each instance in order. If `elapsed_ms` is non-null
/// it receives the wall-clock time of the loop. Errors name the failing
/// instance index.
std::vector<OracleSolution> batch_project(std::span<const ProblemInstance> insts,
                                          double* elapsed_ms = nullptr);

}  // namespace kinn
