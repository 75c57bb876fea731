#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace kinn {

using Vec64 = Eigen::VectorXd;
using Mat64 = Eigen::MatrixXd;

/// Row-major single-precision matrix; rows are batch samples.
using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Row-major double-precision matrix with the same batch convention.
using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Matrix-vector product. Throws ContractViolation if `m.cols() != v.size()`.
Vec64 matvec(const Mat64& m, const Vec64& v);

/// Euclidean norm; exactly 0 for the zero vector.
double l2_norm(const Vec64& v);

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

/// Worker threads used by the dense kernels (Eigen's parallel GEMM).
int thread_count();
void set_thread_count(int n);
/// Applies the KINN_THREADS environment variable if set and returns the
/// resulting count. Throws ContractViolation for a non-positive value.
int configure_threads_from_env();

/// Seeded pseudo-random stream.
///
/// Backed by the 64-bit Mersenne Twister (`std::mt19937_64`, whose output
/// sequence is fixed by the C++ standard). Uniform doubles take the top 53 bits
/// of one draw, so a seed produces the same values on every conforming
/// platform. Single owner: do not share one instance across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi); returns lo when lo == hi. Throws ContractViolation
  /// when lo > hi.
  double uniform(double lo, double hi);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Free-function spelling of `rng.uniform(lo, hi)`.
inline double uniform_sample(Rng& rng, double lo, double hi) {
  return rng.uniform(lo, hi);
}

}  // namespace kinn
