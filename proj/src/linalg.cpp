#include "kinn/linalg.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "kinn/error.hpp"

namespace kinn {

Vec64 matvec(const Mat64& m, const Vec64& v) {
  if (m.cols() != v.size()) {
    throw ContractViolation("matvec: matrix has " + std::to_string(m.cols()) +
                            " columns but vector has " +
                            std::to_string(v.size()) + " entries");
  }
  return m * v;
}

double l2_norm(const Vec64& v) { return v.norm(); }

int thread_count() { return Eigen::nbThreads(); }

void set_thread_count(int n) {
  if (n <= 0) throw ContractViolation("thread count must be positive");
  Eigen::setNbThreads(n);
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("KINN_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n <= 0) throw ContractViolation("KINN_THREADS must be a positive integer");
    set_thread_count(static_cast<int>(n));
  }
  return thread_count();
}

double Rng::uniform(double lo, double hi) {
  if (!(lo <= hi)) {
    throw ContractViolation("uniform: lower bound exceeds upper bound");
  }
  if (lo == hi) return lo;
  const double x = lo + (hi - lo) * uniform01();
  // Rounding in the affine map can land exactly on hi.
  return x < hi ? x : std::nextafter(hi, lo);
}

}  // namespace kinn
