#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "kinn/aggregator.hpp"
#include "kinn/error.hpp"
#include "kinn/linalg.hpp"

using namespace kinn;

namespace {

std::vector<float> to_row(std::initializer_list<double> v) {
  return std::vector<float>(v.begin(), v.end());
}

// Projection of v onto {u : <u, g_j> >= 0 for all j} in the plane, by
// checking v itself, its projection onto each boundary ray and the origin.
Eigen::Vector2d dual_cone_projection_2d(const Eigen::Vector2d& v,
                                        const std::vector<Eigen::Vector2d>& gs) {
  auto inside = [&](const Eigen::Vector2d& u) {
    for (const auto& g : gs) {
      if (u.dot(g) < -1e-12 * std::max(1.0, u.norm() * g.norm())) return false;
    }
    return true;
  };
  if (inside(v)) return v;
  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double best_d = v.norm();
  for (const auto& g : gs) {
    const Eigen::Vector2d n = g / g.norm();
    const Eigen::Vector2d u = v - std::min(0.0, v.dot(n)) * n;
    if (inside(u) && (u - v).norm() < best_d) {
      best_d = (u - v).norm();
      best = u;
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("aggregator") {
  TEST_CASE("Gram matrix of the rows") {
    const LossJacobian jac({to_row({1, 2, 0}), to_row({0, 1, 3})});
    CHECK(jac.terms() == 2);
    CHECK(jac.params() == 3);
    CHECK(jac.gram()(0, 0) == 5.0);
    CHECK(jac.gram()(0, 1) == 2.0);
    CHECK(jac.gram()(1, 0) == 2.0);
    CHECK(jac.gram()(1, 1) == 10.0);
    CHECK_THROWS_AS(LossJacobian({to_row({1, 2}), to_row({1})}), ContractViolation);
  }

  TEST_CASE("mean aggregator") {
    const LossJacobian jac({to_row({1, 2}), to_row({3, -2})});
    const Vec64 d = aggregate_mean(jac);
    CHECK(d[0] == 2.0);
    CHECK(d[1] == 0.0);
  }

  TEST_CASE("orthogonal gradients are averaged unchanged") {
    const LossJacobian jac({to_row({1, 0}), to_row({0, 1})});
    const Vec64 d = aggregate_upgrad(jac);
    CHECK(d[0] == doctest::Approx(0.5));
    CHECK(d[1] == doctest::Approx(0.5));
  }

  TEST_CASE("identical gradients give that gradient") {
    const LossJacobian jac({to_row({2, -1, 0.5}), to_row({2, -1, 0.5}), to_row({2, -1, 0.5})});
    const Vec64 d = aggregate_upgrad(jac);
    CHECK(d[0] == doctest::Approx(2.0));
    CHECK(d[1] == doctest::Approx(-1.0));
    CHECK(d[2] == doctest::Approx(0.5));
  }

  TEST_CASE("planar directions match explicit dual-cone projections") {
    Rng rng(31);
    for (int k = 0; k < 500; ++k) {
      std::vector<Eigen::Vector2d> gs;
      std::vector<std::vector<float>> rows;
      const int l = 2 + static_cast<int>(rng.next_u64() % 2);
      for (int i = 0; i < l; ++i) {
        // Keep every gradient in one open half-plane so the cone is not {0}.
        const double ang = rng.uniform(-1.4, 1.4);
        const double r = rng.uniform(0.5, 2.0);
        gs.emplace_back(r * std::cos(ang), r * std::sin(ang));
        rows.push_back({static_cast<float>(gs.back()[0]), static_cast<float>(gs.back()[1])});
        gs.back() = Eigen::Vector2d(rows.back()[0], rows.back()[1]);
      }
      Eigen::Vector2d expected = Eigen::Vector2d::Zero();
      for (const auto& g : gs) expected += dual_cone_projection_2d(g, gs) / l;
      const Vec64 d = aggregate_upgrad(LossJacobian(rows));
      REQUIRE((d - expected).norm() <= 1e-9 * std::max(1.0, expected.norm()));
    }
  }

  TEST_CASE("aggregated direction never conflicts with a term") {
    Rng rng(32);
    for (int k = 0; k < 1000; ++k) {
      const int l = 2 + static_cast<int>(rng.next_u64() % 3);
      const int p = 3 + static_cast<int>(rng.next_u64() % 20);
      std::vector<std::vector<float>> rows(l, std::vector<float>(p));
      for (auto& r : rows) {
        const double scale = std::pow(10.0, rng.uniform(-3, 3));
        for (auto& v : r) v = static_cast<float>(scale * rng.uniform(-1, 1));
      }
      const LossJacobian jac(rows);
      const Vec64 d = aggregate_upgrad(jac);
      for (int i = 0; i < l; ++i) {
        const Vec64 g = Eigen::Map<const Eigen::VectorXf>(rows[i].data(), p).cast<double>();
        REQUIRE(d.dot(g) >= -1e-8 * d.norm() * g.norm());
      }
    }
  }

  TEST_CASE("weights are invariant to rescaling the Gram matrix") {
    Rng rng(33);
    for (int k = 0; k < 50; ++k) {
      Mat64 j = Mat64::NullaryExpr(3, 5, [&] { return rng.uniform(-1, 1); });
      const Mat64 g = j * j.transpose();
      const Vec64 w = upgrad_weights(g);
      for (double s : {1e-6, 3.0, 1e6}) {
        CHECK((upgrad_weights(s * g) - w).norm() <= 1e-9 * w.norm());
      }
    }
  }

  TEST_CASE("degenerate Gram matrices") {
    const Vec64 w = upgrad_weights(Mat64::Zero(3, 3));
    CHECK(w[0] == doctest::Approx(1.0 / 3));
    Mat64 bad = Mat64::Identity(2, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(upgrad_weights(bad), DivergenceError);
  }

  TEST_CASE("nnls matches grid search on 2x2 problems") {
    Rng rng(34);
    int solved = 0;
    while (solved < 100) {
      Mat64 a = Mat64::NullaryExpr(2, 2, [&] { return rng.uniform(-1, 1); });
      const Mat64 g = a.transpose() * a;
      const Vec64 c = Vec64::NullaryExpr(2, [&] { return rng.uniform(-2, 2); });
      const Vec64 w = nnls_solve(g, c);
      if (w.maxCoeff() > 9.0) continue;
      ++solved;
      auto obj = [&](const Vec64& v) { return 0.5 * v.dot(g * v) + c.dot(v); };
      double grid_best = std::numeric_limits<double>::infinity();
      Vec64 grid_arg(2);
      Vec64 v(2);
      for (int i = 0; i <= 2000; ++i) {
        for (int k = 0; k <= 2000; ++k) {
          v << 0.005 * i, 0.005 * k;
          const double o = obj(v);
          if (o < grid_best) {
            grid_best = o;
            grid_arg = v;
          }
        }
      }
      REQUIRE(w.minCoeff() >= 0.0);
      CHECK(obj(w) <= grid_best + 1e-12);
      CHECK(grid_best - obj(w) <= 1e-4 * std::max(1.0, g.norm()));
      const double lmin = Eigen::SelfAdjointEigenSolver<Mat64>(g).eigenvalues()[0];
      if (lmin > 0.05) CHECK((grid_arg - w).norm() <= 0.01 / lmin + 0.01);
    }
  }

  TEST_CASE("nnls rejects oversized problems") {
    CHECK_THROWS_AS(nnls_solve(Mat64::Identity(9, 9), Vec64::Zero(9)), ContractViolation);
    CHECK_THROWS_AS(nnls_solve(Mat64::Identity(2, 2), Vec64::Zero(3)), ContractViolation);
  }
}
