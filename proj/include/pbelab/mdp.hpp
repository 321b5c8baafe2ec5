#pragma once

#include "pbelab/common.hpp"
#include "pbelab/linalg.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace pbelab {

// Finite-state Markov reward process under a fixed policy. `transition` is
// row-stochastic (row = source state), `reward` is the expected one-step
// reward per state. `cell_widths`, when present, marks the chain as the
// discretization of a continuous state space and carries each cell's width;
// without it states are genuine atoms of width 1.
struct FiniteMdp {
  int n_states = 0;
  Matrix transition;
  Vector reward;
  double gamma = 0.0;
  double lambda = 0.0;
  Vector cell_widths;  // empty unless grid-discretized

  FiniteMdp() = default;

  FiniteMdp(Matrix t, Vector r, double gamma_, double lambda_,
            Vector widths = Vector())
      : n_states(static_cast<int>(t.rows())),
        transition(std::move(t)),
        reward(std::move(r)),
        gamma(gamma_),
        lambda(lambda_),
        cell_widths(std::move(widths)) {
    validate();
  }

  bool has_grid() const { return cell_widths.size() > 0; }

  // Width vector used by Lebesgue-style sums: actual cell widths on grids,
  // unit atoms otherwise.
  Vector widths_or_unit() const {
    return has_grid() ? cell_widths : Vector::Ones(n_states);
  }

  void validate() const {
    require(n_states >= 1, "mdp: needs at least one state");
    require(transition.rows() == n_states && transition.cols() == n_states,
            "mdp: transition must be n_states x n_states");
    require(reward.size() == n_states,
            "mdp: reward length " + std::to_string(reward.size()) +
                " != n_states " + std::to_string(n_states));
    require(reward.allFinite(), "mdp: reward has non-finite entries");
    require(gamma >= 0.0 && gamma < 1.0,
            "mdp: gamma " + format_real(gamma) + " outside [0,1)");
    require(lambda >= 0.0 && lambda < 1.0,
            "mdp: lambda " + format_real(lambda) + " outside [0,1)");
    for (int i = 0; i < n_states; ++i) {
      double sum = 0.0;
      for (int j = 0; j < n_states; ++j) {
        const double p = transition(i, j);
        require(std::isfinite(p) && p >= 0.0 && p <= 1.0 + tol::stochastic,
                "mdp: transition row " + std::to_string(i) + " entry " +
                    std::to_string(j) + " = " + format_real(p) +
                    " outside [0,1]");
        sum += p;
      }
      require(std::abs(sum - 1.0) <= tol::stochastic,
              "mdp: transition row " + std::to_string(i) + " sums to " +
                  format_real(sum));
    }
    if (cell_widths.size() > 0) {
      require(cell_widths.size() == n_states,
              "mdp: cell_widths length != n_states");
      require((cell_widths.array() > 0.0).all(),
              "mdp: cell_widths must be positive");
    }
  }
};

// Probability weights over states (mass per state, summing to one).
struct Measure {
  Vector weights;

  Measure() = default;

  explicit Measure(Vector w) : weights(std::move(w)) {
    require(weights.size() >= 1, "measure: empty");
    require(weights.allFinite() && (weights.array() >= 0.0).all(),
            "measure: weights must be finite and non-negative");
    require(std::abs(weights.sum() - 1.0) <= tol::stochastic,
            "measure: weights sum to " + format_real(weights.sum()));
  }

  int n_states() const { return static_cast<int>(weights.size()); }

  std::vector<int> support(double eps = tol::support_eps) const {
    std::vector<int> idx;
    for (int s = 0; s < weights.size(); ++s) {
      if (weights(s) > eps) idx.push_back(s);
    }
    return idx;
  }
};

// Weighted inner product <f,g>_mu = sum_s f(s) g(s) mu(s).
inline double mu_inner(const Vector& f, const Vector& g, const Measure& mu) {
  if (f.size() != g.size() || f.size() != mu.weights.size()) {
    throw DimensionMismatch("mu_inner: lengths " + std::to_string(f.size()) +
                            ", " + std::to_string(g.size()) + ", " +
                            std::to_string(mu.weights.size()));
  }
  return (f.array() * g.array() * mu.weights.array()).sum();
}

inline double mu_norm(const Vector& f, const Measure& mu) {
  return std::sqrt(std::max(0.0, mu_inner(f, f, mu)));
}

// Stationary distribution by power iteration from the uniform start.
// Deterministic; NonUnique when the fixed-vector space of T has dimension
// greater than one (rank check on T - I, skipped above 512 states where the
// O(n^3) decomposition is not worth it), NonConvergent past max_iter.
inline Measure stationary_distribution(const FiniteMdp& mdp,
                                       double tolerance = 1e-12,
                                       long max_iter = 1000000) {
  const int n = mdp.n_states;
  require(tolerance > 0.0, "stationary_distribution: tolerance must be > 0");
  if (n <= 512) {
    const Matrix shifted = mdp.transition - Matrix::Identity(n, n);
    if (n - numerical_rank(shifted, 1.0) > 1) {
      throw NonUnique(
          "stationary_distribution: multiple independent fixed vectors");
    }
  }
  Vector mu = Vector::Constant(n, 1.0 / n);
  for (long it = 0; it < max_iter; ++it) {
    Vector next = mdp.transition.transpose() * mu;
    next /= next.sum();
    const double resid = (next - mu).cwiseAbs().maxCoeff();
    mu = next;
    if (resid <= tolerance) return Measure(mu);
  }
  throw NonConvergent("stationary_distribution: residual above " +
                      format_real(tolerance) + " after " +
                      std::to_string(max_iter) + " iterations");
}

// One application of the Bellman operator T V = R + gamma * P V.
inline Vector apply_bellman(const FiniteMdp& mdp, const Vector& v) {
  if (v.size() != mdp.n_states) {
    throw DimensionMismatch("apply_bellman: value length " +
                            std::to_string(v.size()));
  }
  return mdp.reward + mdp.gamma * (mdp.transition * v);
}

// Unique fixed point of the Bellman operator, V = (I - gamma T)^{-1} R.
inline Vector exact_value(const FiniteMdp& mdp) {
  const Matrix m =
      Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * mdp.transition;
  return solve_dense(m, mdp.reward, "exact_value");
}

// Contraction factor of the lambda-weighted operator:
// G = (1 - lambda) gamma / (1 - lambda gamma), in [0,1); G = gamma at
// lambda = 0 and G -> 0 as lambda -> 1.
inline double g_factor(double gamma, double lambda) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw DomainError("g_factor: gamma " + format_real(gamma) +
                      " outside [0,1)");
  }
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw DomainError("g_factor: lambda " + format_real(lambda) +
                      " outside [0,1)");
  }
  return (1.0 - lambda) * gamma / (1.0 - lambda * gamma);
}

// lambda-weighted transition operator applied to v:
// P^(lambda) v = (1 - lambda) T (I - lambda gamma T)^{-1} v,
// the closed form of (1 - lambda) sum_m (lambda gamma)^m T^{m+1} v.
inline Vector apply_p_lambda(const FiniteMdp& mdp, const Vector& v) {
  if (v.size() != mdp.n_states) {
    throw DimensionMismatch("apply_p_lambda: value length " +
                            std::to_string(v.size()));
  }
  if (mdp.lambda == 0.0) return mdp.transition * v;
  const int n = mdp.n_states;
  const Matrix m =
      Matrix::Identity(n, n) - (mdp.lambda * mdp.gamma) * mdp.transition;
  const Vector resolved = solve_dense(m, v, "apply_p_lambda");
  return (1.0 - mdp.lambda) * (mdp.transition * resolved);
}

// lambda-weighted reward R^(lambda) = (I - lambda gamma T)^{-1} R; equals R
// at lambda = 0.
inline Vector r_lambda(const FiniteMdp& mdp) {
  if (mdp.lambda == 0.0) return mdp.reward;
  const int n = mdp.n_states;
  const Matrix m =
      Matrix::Identity(n, n) - (mdp.lambda * mdp.gamma) * mdp.transition;
  return solve_dense(m, mdp.reward, "r_lambda");
}

// Dense matrix of P^(lambda); column j is apply_p_lambda on e_j, solved in
// one factorization.
inline Matrix p_lambda_matrix(const FiniteMdp& mdp) {
  if (mdp.lambda == 0.0) return mdp.transition;
  const int n = mdp.n_states;
  const Matrix m =
      Matrix::Identity(n, n) - (mdp.lambda * mdp.gamma) * mdp.transition;
  Eigen::PartialPivLU<Matrix> lu(m);
  return (1.0 - mdp.lambda) * (mdp.transition * lu.solve(Matrix::Identity(n, n)));
}

// Squared mu-weighted Bellman-equation error of the linear value Phi^T w:
// || (I - gamma T) Phi^T w - R ||^2_mu. `phi_table` holds one feature per row.
inline double bellman_error(const FiniteMdp& mdp, const Matrix& phi_table,
                            const Vector& w, const Measure& mu) {
  if (phi_table.cols() != mdp.n_states || phi_table.rows() != w.size()) {
    throw DimensionMismatch("bellman_error: feature table " +
                            std::to_string(phi_table.rows()) + "x" +
                            std::to_string(phi_table.cols()) + " vs w " +
                            std::to_string(w.size()));
  }
  const Vector v = phi_table.transpose() * w;
  const Vector resid = v - mdp.gamma * (mdp.transition * v) - mdp.reward;
  return mu_inner(resid, resid, mu);
}

}  // namespace pbelab
