#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pbelab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A value table over states; indexed like the state space it was built for.
using ValueFunction = Vector;

namespace tol {
// States with mu-mass at or below this are treated as unvisited.
inline constexpr double support_eps = 1e-12;
// Row-stochasticity / measure normalization slack.
inline constexpr double stochastic = 1e-12;
// Relative singular-value threshold for rank and null-space decisions.
inline constexpr double rank_rel = 1e-10;
// Basis normalization target (sum_s psi_i(s) mu(s) = 1).
inline constexpr double basis_norm = 1e-10;
// Residual for linear-system solutions and template constraints.
inline constexpr double solve_residual = 1e-9;
// Iterative-run convergence and divergence guards.
inline constexpr double run_converged = 1e-8;
inline constexpr double run_diverged = 1e8;
}  // namespace tol

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };      // parameter outside its domain
struct ValidationError : Error { using Error::Error; };  // malformed object or file content
struct SingularSystem : Error { using Error::Error; };
struct NonConvergent : Error { using Error::Error; };
struct NonUnique : Error { using Error::Error; };
struct ZeroMass : Error { using Error::Error; };
struct ZeroDirection : Error { using Error::Error; };
struct NotNullVector : Error { using Error::Error; };
struct RangeViolation : Error { using Error::Error; };
struct UnsupportedLambda : Error { using Error::Error; };
struct InvalidSplit : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Fixed 17-significant-digit rendering; shared by every report writer so
// repeated runs are byte-identical.
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

// Thread cap: PBE_LAB_THREADS when set, else hardware concurrency.
inline int thread_cap() {
  if (const char* env = std::getenv("PBE_LAB_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<int>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Index-chunked parallel map. Workers write disjoint slots, so the merged
// result is identical for every thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn, int max_threads = thread_cap()) {
  const int workers = std::max(1, std::min(max_threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pbelab
