#pragma once

#include "pbelab/common.hpp"
#include "pbelab/linalg.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/projection.hpp"
#include "pbelab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace pbelab {

// Iteration record shared by every solver below. `iterates` holds every
// `stride`-th weight vector plus the final one; `residuals` matches it
// entry for entry (distance to the known target when one exists, successive
// step norms otherwise).
struct RunTrace {
  enum class Verdict { converged, diverged, oscillating, max_iter };

  Verdict verdict = Verdict::max_iter;
  std::vector<Vector> iterates;
  std::vector<double> residuals;
  std::vector<long> recorded_at;  // iteration index of each recorded entry
  int stride = 1;
  long steps_taken = 0;
  double step = 0.0;
  uint64_t seed = 0;
  std::optional<Vector> target;
  Vector final_w;
  Vector averaged_w;  // tail average (stochastic runs only)
  std::vector<std::string> warnings;
};

inline const char* verdict_name(RunTrace::Verdict v) {
  switch (v) {
    case RunTrace::Verdict::converged: return "converged";
    case RunTrace::Verdict::diverged: return "diverged";
    case RunTrace::Verdict::oscillating: return "oscillating";
    default: return "max-iter";
  }
}

namespace detail {

// Final classification once a deterministic run has exhausted its budget:
// a residual tail that refuses to shrink reads as oscillation/drift.
inline RunTrace::Verdict classify_tail(const std::vector<double>& residuals,
                                       double tolerance) {
  if (residuals.empty()) return RunTrace::Verdict::max_iter;
  const double last = residuals.back();
  if (last <= tolerance) return RunTrace::Verdict::converged;
  const double mid = residuals[residuals.size() / 2];
  if (last >= 0.5 * mid && mid > 0.0) return RunTrace::Verdict::oscillating;
  return RunTrace::Verdict::max_iter;
}

}  // namespace detail

// Deterministic expected update w += step (b - (A - gamma B) w). Converges
// exactly when the spectral radius of I - step (A - gamma B) is below one;
// on singular systems the limit (if any) depends on initialization, which is
// recorded as a warning.
inline RunTrace expected_td_lambda(const FiniteMdp& mdp, const FeatureSet& phi,
                                   const ProjectionBasis& psi,
                                   const Measure& mu, double step = 0.0,
                                   long iters = 20000,
                                   double tolerance = tol::run_converged,
                                   int stride = 1,
                                   const Vector& w0 = Vector()) {
  const ProjectedSystem sys = assemble_system(mdp, phi, psi, mu);
  const Matrix m = sys.system_matrix();
  const SolveReport solved = solve_system(sys);

  RunTrace trace;
  trace.stride = std::max(1, stride);
  if (solved.unique) {
    trace.target = solved.w;
  } else {
    trace.warnings.push_back(
        "system is singular (rank " + std::to_string(solved.rank) +
        "); any limit depends on initialization");
  }
  if (step <= 0.0) {
    const double smax = spectral_norm(m);
    step = 0.1 / std::max(smax, 1e-12 * sys.scale());
  }
  trace.step = step;

  Vector w = w0.size() == phi.k ? w0 : Vector::Zero(phi.k);
  Vector prev = w;
  auto residual_of = [&](const Vector& cur, const Vector& before) {
    return trace.target ? (cur - *trace.target).norm() : (cur - before).norm();
  };
  auto record = [&](const Vector& cur, const Vector& before) {
    trace.iterates.push_back(cur);
    trace.residuals.push_back(residual_of(cur, before));
    trace.recorded_at.push_back(trace.steps_taken);
  };

  record(w, prev);
  for (long t = 1; t <= iters; ++t) {
    prev = w;
    w += step * (sys.b - m * w);
    trace.steps_taken = t;
    if (!w.allFinite() || w.norm() > tol::run_diverged) {
      record(w, prev);
      trace.verdict = RunTrace::Verdict::diverged;
      trace.final_w = w;
      return trace;
    }
    if (t % trace.stride == 0 || t == iters) record(w, prev);
    if (residual_of(w, prev) <= tolerance) {
      if (t % trace.stride != 0 && t != iters) record(w, prev);
      trace.verdict = RunTrace::Verdict::converged;
      trace.final_w = w;
      return trace;
    }
  }
  trace.final_w = w;
  trace.verdict = detail::classify_tail(trace.residuals, tolerance);
  return trace;
}

struct StepSchedule {
  double base = 0.05;
  double decay_horizon = 0.0;  // 0 = constant step

  double at(long t) const {
    return decay_horizon > 0.0 ? base / (1.0 + static_cast<double>(t) / decay_horizon)
                               : base;
  }
};

// Single-trajectory TD(lambda) with accumulating eligibility traces, sampled
// from the chain under its stationary start. The reported target is the
// unique solution of the expected system with test functions Phi (the
// algorithm's own projection); `averaged_w` is the mean weight over the
// final half of the run and is what the verdict judges.
inline RunTrace sampled_td_lambda(const FiniteMdp& mdp, const FeatureSet& phi,
                                  long steps, const StepSchedule& schedule,
                                  uint64_t seed,
                                  double tolerance = 1e-2,
                                  int stride = 0) {
  require(steps >= 1, "sampled_td_lambda: steps must be >= 1");
  const Measure mu = stationary_distribution(mdp);
  RunTrace trace;
  trace.seed = seed;
  trace.step = schedule.base;
  trace.stride = stride > 0 ? stride : std::max<long>(1, steps / 5000);

  ProjectionBasis psi;
  try {
    psi = normalize_basis(phi.table, mu);
  } catch (const ZeroMass&) {
    psi = ProjectionBasis(phi.table);  // scaling does not move the solution
    trace.warnings.push_back("phi row has zero mu-mass; using raw test functions");
  }
  const SolveReport solved = solve_system(assemble_system(mdp, phi, psi, mu));
  if (solved.unique) {
    trace.target = solved.w;
  } else {
    trace.warnings.push_back("expected system is singular");
  }

  Rng rng(seed, /*stream=*/1);
  auto sample_from = [&](const Vector& pmf) {
    double u = rng.uniform01();
    for (int s = 0; s < pmf.size(); ++s) {
      u -= pmf(s);
      if (u < 0.0) return s;
    }
    return static_cast<int>(pmf.size()) - 1;
  };

  int s = sample_from(mu.weights);
  Vector w = Vector::Zero(phi.k);
  Vector trace_e = Vector::Zero(phi.k);
  Vector prev = w;
  Vector tail_sum = Vector::Zero(phi.k);
  long tail_count = 0;
  const long tail_start = steps / 2;

  auto record = [&](const Vector& cur, const Vector& before) {
    trace.iterates.push_back(cur);
    trace.residuals.push_back(trace.target ? (cur - *trace.target).norm()
                                           : (cur - before).norm());
    trace.recorded_at.push_back(trace.steps_taken);
  };
  record(w, prev);

  for (long t = 0; t < steps; ++t) {
    const int s_next = sample_from(mdp.transition.row(s).transpose());
    const Vector feat = phi.table.col(s);
    const double td_error = mdp.reward(s) +
                            mdp.gamma * phi.table.col(s_next).dot(w) -
                            feat.dot(w);
    trace_e = mdp.gamma * mdp.lambda * trace_e + feat;
    prev = w;
    w += schedule.at(t) * td_error * trace_e;
    s = s_next;
    trace.steps_taken = t + 1;
    if (!w.allFinite() || w.norm() > tol::run_diverged) {
      record(w, prev);
      trace.verdict = RunTrace::Verdict::diverged;
      trace.final_w = w;
      trace.averaged_w = tail_count > 0 ? Vector(tail_sum / tail_count) : w;
      return trace;
    }
    if (t >= tail_start) {
      tail_sum += w;
      ++tail_count;
    }
    if ((t + 1) % trace.stride == 0 || t + 1 == steps) record(w, prev);
  }
  trace.final_w = w;
  trace.averaged_w = tail_count > 0 ? Vector(tail_sum / tail_count) : w;
  trace.verdict =
      trace.target && (trace.averaged_w - *trace.target).norm() <= tolerance
          ? RunTrace::Verdict::converged
          : RunTrace::Verdict::max_iter;
  return trace;
}

// Gradient of the squared mu-weighted Bellman-equation error
// E(w) = ||(I - gamma T) Phi^T w - R||^2_mu.
inline Vector bellman_error_gradient(const FiniteMdp& mdp,
                                     const FeatureSet& phi, const Vector& w,
                                     const Measure& mu) {
  const Matrix m =
      (Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * mdp.transition) *
      phi.table.transpose();
  const Vector resid = m * w - mdp.reward;
  return 2.0 * m.transpose() * (mu.weights.asDiagonal() * resid);
}

// Plain gradient descent on the Bellman-equation error. The quadratic has
// the closed-form minimizer of the mu-weighted normal equations, which the
// trace reports as target: residual convergence means convergence to the
// error floor, not to the true value parameters.
inline RunTrace residual_gradient(const FiniteMdp& mdp, const FeatureSet& phi,
                                  const Measure& mu, double step = 0.0,
                                  long iters = 50000,
                                  double tolerance = tol::run_converged,
                                  int stride = 1,
                                  const Vector& w0 = Vector()) {
  const Matrix m =
      (Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * mdp.transition) *
      phi.table.transpose();
  const Matrix hessian = 2.0 * m.transpose() * mu.weights.asDiagonal() * m;
  const Vector rhs = m.transpose() * (mu.weights.asDiagonal() * mdp.reward);

  RunTrace trace;
  trace.stride = std::max(1, stride);
  if (numerical_rank(hessian) == phi.k) {
    trace.target = solve_dense(hessian, 2.0 * rhs, "residual_gradient");
  } else {
    trace.warnings.push_back("error Hessian is singular; minimizer not unique");
  }
  if (step <= 0.0) step = 1.0 / std::max(spectral_norm(hessian), 1e-300);
  trace.step = step;

  Vector w = w0.size() == phi.k ? w0 : Vector::Zero(phi.k);
  Vector prev = w;
  auto residual_of = [&](const Vector& cur, const Vector& before) {
    return trace.target ? (cur - *trace.target).norm() : (cur - before).norm();
  };
  auto record = [&](const Vector& cur, const Vector& before) {
    trace.iterates.push_back(cur);
    trace.residuals.push_back(residual_of(cur, before));
    trace.recorded_at.push_back(trace.steps_taken);
  };
  record(w, prev);
  for (long t = 1; t <= iters; ++t) {
    prev = w;
    w -= step * bellman_error_gradient(mdp, phi, w, mu);
    trace.steps_taken = t;
    if (!w.allFinite() || w.norm() > tol::run_diverged) {
      record(w, prev);
      trace.verdict = RunTrace::Verdict::diverged;
      trace.final_w = w;
      return trace;
    }
    if (t % trace.stride == 0 || t == iters) record(w, prev);
    if (residual_of(w, prev) <= tolerance) {
      if (t % trace.stride != 0 && t != iters) record(w, prev);
      trace.verdict = RunTrace::Verdict::converged;
      trace.final_w = w;
      return trace;
    }
  }
  trace.final_w = w;
  trace.verdict = detail::classify_tail(trace.residuals, tolerance);
  return trace;
}

// Convex-hull membership of every feature column in the hull of the
// representative columns, certified by non-negative least squares on the
// simplex (equality sum = 1 enforced by an appended penalty row).
inline bool features_in_hull(const FeatureSet& phi,
                             const std::vector<int>& rep_states,
                             double rel_tol = 1e-8) {
  const int k = phi.k;
  const double scale = phi.table.cwiseAbs().maxCoeff() + 1.0;
  const double rho = 100.0 * scale;
  Matrix a(k + 1, static_cast<Eigen::Index>(rep_states.size()));
  for (size_t j = 0; j < rep_states.size(); ++j) {
    a.col(static_cast<Eigen::Index>(j)).head(k) = phi.table.col(rep_states[j]);
    a(k, static_cast<Eigen::Index>(j)) = rho;
  }
  for (int s = 0; s < phi.n_states(); ++s) {
    Vector b(k + 1);
    b.head(k) = phi.table.col(s);
    b(k) = rho;
    const Vector theta = nnls(a, b);
    if ((a * theta - b).norm() > rel_tol * rho) return false;
  }
  return true;
}

// Fitted value iteration through k representative states: push the current
// linear value through the lambda-weighted Bellman operator, then re-fit w
// exactly at the representatives. Outside the convex hull of the
// representative feature vectors the interpolation can extrapolate and the
// iteration may diverge; that condition is checked and surfaced as a
// warning, not an error.
inline RunTrace representative_value_iteration(
    const FiniteMdp& mdp, const FeatureSet& phi,
    const std::vector<int>& rep_states, long iters = 10000,
    double tolerance = tol::run_converged, int stride = 1) {
  const int k = phi.k;
  require(static_cast<int>(rep_states.size()) == k,
          "representative_value_iteration: need exactly k representatives");
  for (int s : rep_states) {
    require(s >= 0 && s < phi.n_states(),
            "representative_value_iteration: state " + std::to_string(s) +
                " out of range");
  }
  Matrix rep_rows(k, k);  // row i = phi(rep_i)^T
  for (int i = 0; i < k; ++i) {
    rep_rows.row(i) = phi.table.col(rep_states[i]).transpose();
  }
  if (numerical_rank(rep_rows) < k) {
    throw SingularSystem(
        "representative_value_iteration: representative features are dependent");
  }

  RunTrace trace;
  trace.stride = std::max(1, stride);
  if (!features_in_hull(phi, rep_states)) {
    trace.warnings.push_back(
        "features leave the convex hull of the representatives; "
        "the fitted operator may expand");
  }

  const Matrix p_lam = p_lambda_matrix(mdp);
  const Vector r_lam = r_lambda(mdp);
  Matrix rep_image(k, mdp.n_states);  // rows: gamma * (P^(lambda))(rep_i, :)
  Vector rep_reward(k);
  for (int i = 0; i < k; ++i) {
    rep_image.row(i) = mdp.gamma * p_lam.row(rep_states[i]);
    rep_reward(i) = r_lam(rep_states[i]);
  }

  // Fixed point solves (rep_rows - rep_image Phi^T) w = rep_reward.
  const Matrix fixed_m = rep_rows - rep_image * phi.table.transpose();
  if (numerical_rank(fixed_m) == k) {
    trace.target = solve_dense(fixed_m, rep_reward, "representative_value_iteration");
  } else {
    trace.warnings.push_back("representative fixed-point system is singular");
  }

  Eigen::PartialPivLU<Matrix> rep_lu(rep_rows);
  Vector w = Vector::Zero(k);
  Vector prev = w;
  auto residual_of = [&](const Vector& cur, const Vector& before) {
    return trace.target ? (cur - *trace.target).norm() : (cur - before).norm();
  };
  auto record = [&](const Vector& cur, const Vector& before) {
    trace.iterates.push_back(cur);
    trace.residuals.push_back(residual_of(cur, before));
    trace.recorded_at.push_back(trace.steps_taken);
  };
  record(w, prev);
  for (long t = 1; t <= iters; ++t) {
    prev = w;
    const Vector backed_up = rep_reward + rep_image * phi.combination(w);
    w = rep_lu.solve(backed_up);
    trace.steps_taken = t;
    if (!w.allFinite() || w.norm() > tol::run_diverged) {
      record(w, prev);
      trace.verdict = RunTrace::Verdict::diverged;
      trace.final_w = w;
      return trace;
    }
    if (t % trace.stride == 0 || t == iters) record(w, prev);
    if (residual_of(w, prev) <= tolerance) {
      if (t % trace.stride != 0 && t != iters) record(w, prev);
      trace.verdict = RunTrace::Verdict::converged;
      trace.final_w = w;
      return trace;
    }
  }
  trace.final_w = w;
  trace.verdict = detail::classify_tail(trace.residuals, tolerance);
  return trace;
}

}  // namespace pbelab
