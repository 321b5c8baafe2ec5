#pragma once

#include "pbelab/common.hpp"
#include "pbelab/linalg.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pbelab {

// Density-weighted test functions chi_i(s) = psi_i(s) * mu(s)/h(s), paired
// with the plain Lebesgue sum <f,g> = sum_s f(s) g(s) h(s). Note
// <chi_i, f> = <psi_i, f>_mu for any f; the widths matter only where chi
// appears quadratically or as a function (the Gram matrix X and the
// correction g below).
struct ChiBasis {
  Matrix table;   // n x n_states
  Vector widths;  // h(s)

  ChiBasis(const ProjectionBasis& psi, const Measure& mu, Vector h)
      : widths(std::move(h)) {
    require(widths.size() == psi.n_states() &&
                mu.n_states() == psi.n_states(),
            "chi: state count");
    require((widths.array() > 0.0).all(), "chi: widths must be positive");
    table = psi.table *
            (mu.weights.array() / widths.array()).matrix().asDiagonal();
  }

  int n() const { return static_cast<int>(table.rows()); }

  // Gram matrix X_ij = <chi_i, chi_j>.
  Matrix gram() const {
    return table * widths.asDiagonal() * table.transpose();
  }
};

inline double lebesgue_inner(const Vector& f, const Vector& g,
                             const Vector& widths) {
  return (f.array() * g.array() * widths.array()).sum();
}

// Null space of A - gamma B, or nothing when the system pins w uniquely.
// Any null vector is a direction along which admissible environments
// disagree while producing identical projected data.
inline std::optional<Matrix> detect_ambiguity(const ProjectedSystem& sys) {
  const SvdAnalysis an = svd_analyze(sys.system_matrix(), sys.scale());
  if (an.rank == sys.system_matrix().cols()) return std::nullopt;
  return an.nullspace;
}

// A solution of the generalized fixed-point constraint
// Phi^T w = R + gamma P^(lambda)_T Phi^T w; R is the generalized reward
// (for a raw chain at lambda > 0 that is its lambda-weighted reward).
struct TemplateSolution {
  Vector w;
  Vector reward;
  Matrix transition;
};

inline double template_residual(const TemplateSolution& sol,
                                const FeatureSet& phi, double gamma,
                                double lambda) {
  const Vector v = phi.combination(sol.w);
  FiniteMdp carrier(sol.transition, sol.reward, gamma, lambda);
  const Vector image = sol.reward + gamma * apply_p_lambda(carrier, v);
  return (v - image).cwiseAbs().maxCoeff();
}

// Two template solutions over the same transition kernel that share the
// assembled (A, B, b) exactly while differing in w by xi * v.
struct AmbiguityWitness {
  TemplateSolution base;
  TemplateSolution alternate;
  double xi = 0.0;
  ProjectedSystem shared_system;
  double max_abc_discrepancy = 0.0;
  double w_gap = 0.0;
  double base_residual = 0.0;
  double alternate_residual = 0.0;
};

// Instantiates the witness along null vector v: keep the kernel, shift w by
// xi*v, and let each solution carry the reward its constraint demands,
// R = Phi^T w - gamma P^(lambda) Phi^T w. Since (A - gamma B) v = 0 the two
// rewards project to the same b.
inline AmbiguityWitness witness_from_nullspace(const FiniteMdp& base_mdp,
                                               const FeatureSet& phi,
                                               const ProjectionBasis& psi,
                                               const Measure& mu,
                                               const Vector& v, double xi) {
  if (!(xi > 0.0)) {
    throw DomainError("witness_from_nullspace: xi must be > 0");
  }
  if (v.size() != phi.k) {
    throw DimensionMismatch("witness_from_nullspace: null vector length");
  }
  const ProjectedSystem sys = assemble_system(base_mdp, phi, psi, mu);
  const Matrix m = sys.system_matrix();
  const double vnorm = v.norm();
  if (vnorm == 0.0 || (m * v).norm() > 1e-8 * sys.scale() * vnorm) {
    throw NotNullVector("witness_from_nullspace: v is not in the null space");
  }

  auto realize = [&](const Vector& w) {
    TemplateSolution sol;
    sol.w = w;
    sol.transition = base_mdp.transition;
    const Vector value = phi.combination(w);
    FiniteMdp carrier(base_mdp.transition, base_mdp.reward, base_mdp.gamma,
                      base_mdp.lambda);
    sol.reward = value - base_mdp.gamma * apply_p_lambda(carrier, value);
    return sol;
  };

  AmbiguityWitness wit;
  wit.xi = xi;
  wit.base = realize(lsq_min_norm(m, sys.b, sys.scale()));
  wit.alternate = realize(wit.base.w + xi * v);
  wit.w_gap = (wit.alternate.w - wit.base.w).norm();

  const ProjectedSystem sys_base =
      assemble_from_parts(wit.base.transition, wit.base.reward, base_mdp.gamma,
                          base_mdp.lambda, phi, psi, mu);
  const ProjectedSystem sys_alt = assemble_from_parts(
      wit.alternate.transition, wit.alternate.reward, base_mdp.gamma,
      base_mdp.lambda, phi, psi, mu);
  wit.shared_system = sys_base;
  wit.max_abc_discrepancy = std::max(
      {(sys_base.A - sys_alt.A).cwiseAbs().maxCoeff(),
       (sys_base.B - sys_alt.B).cwiseAbs().maxCoeff(),
       (sys_base.b - sys_alt.b).cwiseAbs().maxCoeff()});
  wit.base_residual =
      template_residual(wit.base, phi, base_mdp.gamma, base_mdp.lambda);
  wit.alternate_residual =
      template_residual(wit.alternate, phi, base_mdp.gamma, base_mdp.lambda);
  return wit;
}

// Balance condition linking a span direction to a candidate averaged image f:
// residual_i = <psi_i, phi>_mu - G <psi_i, f>_mu. A bounded f with zero
// residual is exactly what an admissible averaging kernel must produce to
// make the projected system singular along phi. Valid at any lambda (G is
// the lambda-weighted contraction factor).
inline Vector chi_moment_residual(const Vector& f, const Vector& phi_dir,
                                  const ProjectionBasis& psi,
                                  const Measure& mu, double g) {
  if (!(g > 0.0 && g < 1.0)) {
    throw DomainError("chi_moment_residual: G " + format_real(g) +
                      " outside (0,1)");
  }
  Vector resid(psi.n);
  for (int i = 0; i < psi.n; ++i) {
    resid(i) =
        mu_inner(psi.row(i), phi_dir, mu) - g * mu_inner(psi.row(i), f, mu);
  }
  return resid;
}

// Candidate averaged image built by shaving the scaled direction back into
// range: f = phi/G - delta + g_up + delta_lo - g_lo, where delta cuts the
// upper pinnacle {phi > G^2 phi_max}, delta_lo fills the lower one, and the
// corrections g = chi^T X^{-1} <chi, delta> restore the chi-moments exactly.
// Feasibility is decided by the direct range check; the conservative
// mass bound mass(N_{G^2}) <= G / (C (1+G)) is reported as a diagnostic.
struct TargetConstruction {
  Vector f;
  bool feasible = false;
  bool range_upper_ok = false;
  bool range_lower_ok = false;
  bool bound_upper_ok = false;
  bool bound_lower_ok = false;
  bool upper_cut_active = false;
  bool lower_cut_active = false;
  double phi_max = 0.0;
  double phi_min = 0.0;
  double f_max = 0.0;
  double f_min = 0.0;
  double mass_upper = 0.0;  // mu of {phi > G^2 phi_max}
  double mass_lower = 0.0;  // mu of {phi < G^2 phi_min}
  double mass_bound = 0.0;  // G / (C (1+G))
  double c_constant = 0.0;
  Vector residual;          // chi-moment residual of f
};

inline TargetConstruction construct_target(const Vector& phi_dir,
                                           const ProjectionBasis& psi,
                                           const Measure& mu, double g,
                                           Vector widths = Vector()) {
  if (!(g > 0.0 && g < 1.0)) {
    throw DomainError("construct_target: G " + format_real(g) +
                      " outside (0,1)");
  }
  const int n_states = static_cast<int>(phi_dir.size());
  require(psi.n_states() == n_states && mu.n_states() == n_states,
          "construct_target: state count");
  if (phi_dir.cwiseAbs().maxCoeff() == 0.0) {
    throw ZeroDirection("construct_target: zero direction");
  }
  if (widths.size() == 0) widths = Vector::Ones(n_states);

  TargetConstruction out;
  out.phi_max = phi_dir.maxCoeff();
  out.phi_min = phi_dir.minCoeff();

  // Pointwise cuts; the max(0, .) form self-deactivates on the side whose
  // scaled direction already stays in range.
  Vector delta_up(n_states), delta_lo(n_states);
  for (int s = 0; s < n_states; ++s) {
    delta_up(s) = std::max(0.0, phi_dir(s) / g - g * out.phi_max);
    delta_lo(s) = std::max(0.0, g * out.phi_min - phi_dir(s) / g);
    if (phi_dir(s) > g * g * out.phi_max) out.mass_upper += mu.weights(s);
    if (phi_dir(s) < g * g * out.phi_min) out.mass_lower += mu.weights(s);
  }
  out.upper_cut_active = delta_up.maxCoeff() > 0.0;
  out.lower_cut_active = delta_lo.maxCoeff() > 0.0;

  const ChiBasis chi(psi, mu, widths);
  const Matrix gram = chi.gram();
  if (numerical_rank(gram) < chi.n()) {
    throw SingularSystem(
        "construct_target: chi rows are dependent (check mu support and psi)");
  }
  const Vector moments_up = chi.table * widths.asDiagonal() * delta_up;
  const Vector moments_lo = chi.table * widths.asDiagonal() * delta_lo;
  const Vector corr_up =
      chi.table.transpose() * solve_dense(gram, moments_up, "construct_target");
  const Vector corr_lo =
      chi.table.transpose() * solve_dense(gram, moments_lo, "construct_target");

  out.f = phi_dir / g - delta_up + corr_up + delta_lo - corr_lo;
  out.f_max = out.f.maxCoeff();
  out.f_min = out.f.minCoeff();

  const double span =
      std::max({std::abs(out.phi_max), std::abs(out.phi_min), 1e-300});
  const double slack = 1e-9 * span;
  out.range_upper_ok = out.f_max <= out.phi_max + slack;
  out.range_lower_ok = out.f_min >= out.phi_min - slack;
  out.feasible = out.range_upper_ok && out.range_lower_ok;

  // Conservative constant C = ||chi||_inf ||X^{-1}||_inf max_i sup_s psi_i.
  const double chi_inf = chi.table.cwiseAbs().maxCoeff();
  const double x_inv_inf = gram.inverse().cwiseAbs().rowwise().sum().maxCoeff();
  const double psi_sup = psi.table.maxCoeff();
  out.c_constant = chi_inf * x_inv_inf * std::max(psi_sup, 0.0);
  out.mass_bound = out.c_constant > 0.0
                       ? g / (out.c_constant * (1.0 + g))
                       : std::numeric_limits<double>::infinity();
  out.bound_upper_ok = out.mass_upper <= out.mass_bound;
  out.bound_lower_ok = out.mass_lower <= out.mass_bound;

  out.residual = chi_moment_residual(out.f, phi_dir, psi, mu, g);
  return out;
}

// Realizes a feasible target as an actual kernel: every state mixes the
// argmax and argmin states of phi so that (T phi)(s) = f(s). Only meaningful
// for lambda = 0, where the averaged operator is the kernel itself; the
// returned chain reuses the template's reward, gamma and widths.
inline FiniteMdp environment_from_target(const Vector& f,
                                         const Vector& phi_dir,
                                         const FiniteMdp& mdp_template) {
  const int n = mdp_template.n_states;
  require(f.size() == n && phi_dir.size() == n,
          "environment_from_target: state count");
  if (mdp_template.lambda != 0.0) {
    throw UnsupportedLambda(
        "environment_from_target: kernel synthesis is defined at lambda = 0 "
        "(use chi_moment_residual for lambda > 0)");
  }
  int s_max = 0, s_min = 0;
  for (int s = 1; s < n; ++s) {
    if (phi_dir(s) > phi_dir(s_max)) s_max = s;
    if (phi_dir(s) < phi_dir(s_min)) s_min = s;
  }
  const double hi = phi_dir(s_max), lo = phi_dir(s_min);
  require(hi > lo, "environment_from_target: direction is constant");
  const double slack = 1e-9 * std::max(std::abs(hi), std::abs(lo));
  Matrix t = Matrix::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    if (f(s) < lo - slack || f(s) > hi + slack) {
      throw RangeViolation("environment_from_target: f(" + std::to_string(s) +
                           ") = " + format_real(f(s)) + " outside [" +
                           format_real(lo) + ", " + format_real(hi) + "]");
    }
    const double beta = std::clamp((f(s) - lo) / (hi - lo), 0.0, 1.0);
    t(s, s_max) += beta;
    t(s, s_min) += 1.0 - beta;
  }
  return FiniteMdp(t, mdp_template.reward, mdp_template.gamma, 0.0,
                   mdp_template.cell_widths);
}

// The classic two-chain aliasing counter-example: a 2-state chain with
// tabular features next to a 3-state chain whose second and third states
// share one feature. Observed through their projections the two are
// indistinguishable, yet their Bellman-equation errors differ.
struct CounterexamplePair {
  FiniteMdp mdp1;
  FiniteMdp mdp2;
  FeatureSet phi1;
  FeatureSet phi2;
  ProjectionBasis psi1;
  ProjectionBasis psi2;
  Measure mu1;
  Measure mu2;
};

inline CounterexamplePair aliasing_pair(double gamma = 0.9,
                                        double lambda = 0.0) {
  CounterexamplePair pair;
  Matrix t1(2, 2);
  t1 << 0.0, 1.0,
        0.5, 0.5;
  Vector r1 = Vector::Zero(2);
  pair.mdp1 = FiniteMdp(t1, r1, gamma, lambda);

  Matrix t2(3, 3);
  t2 << 0.0, 0.5, 0.5,
        1.0, 0.0, 0.0,
        0.0, 0.5, 0.5;
  // The aliased reward: zero mean and zero pairing on the shared feature,
  // but nonzero pointwise, so the 3-state chain has Bellman error 2/3 at
  // w = 0 while projecting to the same data as the zero-reward chain.
  Vector r2(3);
  r2 << 0.0, 1.0, -1.0;
  pair.mdp2 = FiniteMdp(t2, r2, gamma, lambda);

  pair.phi1 = FeatureSet(Matrix::Identity(2, 2));
  Matrix phi2(2, 3);
  phi2 << 1.0, 0.0, 0.0,
          0.0, 1.0, 1.0;
  pair.phi2 = FeatureSet(phi2);

  Vector mu1(2);
  mu1 << 1.0 / 3.0, 2.0 / 3.0;
  pair.mu1 = Measure(mu1);
  pair.mu2 = Measure(Vector::Constant(3, 1.0 / 3.0));

  pair.psi1 = normalize_basis(pair.phi1.table, pair.mu1);
  pair.psi2 = normalize_basis(pair.phi2.table, pair.mu2);
  return pair;
}

// Refines one state into weighted copies that inherit its outgoing row.
// Incoming mass splits by `split_probs`; the copies are indistinguishable to
// any observer of the returned aliased tabular features, and the projected
// system assembled over matching split test functions is unchanged.
struct SplitResult {
  FiniteMdp mdp;
  FeatureSet features;     // one row per original state, aliased over copies
  std::vector<int> state_map;  // new state index -> original state index
};

inline SplitResult state_split_alias(const FiniteMdp& mdp, int state,
                                     int copies, const Vector& split_probs) {
  const int n = mdp.n_states;
  if (state < 0 || state >= n) {
    throw InvalidSplit("state_split_alias: state " + std::to_string(state) +
                       " out of range");
  }
  if (copies < 1 || split_probs.size() != copies) {
    throw InvalidSplit("state_split_alias: need one probability per copy");
  }
  if ((split_probs.array() < 0.0).any() ||
      std::abs(split_probs.sum() - 1.0) > tol::stochastic) {
    throw InvalidSplit("state_split_alias: split_probs must be a distribution");
  }

  const int m = n - 1 + copies;
  std::vector<int> state_map(static_cast<size_t>(m));
  std::vector<int> new_index_of_old(static_cast<size_t>(n));
  {
    int idx = 0;
    for (int s = 0; s < n; ++s) {
      if (s == state) {
        new_index_of_old[static_cast<size_t>(s)] = idx;
        for (int c = 0; c < copies; ++c) state_map[static_cast<size_t>(idx++)] = s;
      } else {
        new_index_of_old[static_cast<size_t>(s)] = idx;
        state_map[static_cast<size_t>(idx++)] = s;
      }
    }
  }

  Matrix t = Matrix::Zero(m, m);
  Vector r(m);
  Vector widths;
  if (mdp.has_grid()) widths = Vector::Zero(m);
  for (int i = 0; i < m; ++i) {
    const int src = state_map[static_cast<size_t>(i)];
    r(i) = mdp.reward(src);
    if (mdp.has_grid()) {
      widths(i) = src == state
                      ? mdp.cell_widths(src) *
                            split_probs(i - new_index_of_old[static_cast<size_t>(state)])
                      : mdp.cell_widths(src);
    }
    for (int j = 0; j < m; ++j) {
      const int dst = state_map[static_cast<size_t>(j)];
      const double p = mdp.transition(src, dst);
      t(i, j) = dst == state
                    ? p * split_probs(j - new_index_of_old[static_cast<size_t>(state)])
                    : p;
    }
  }

  Matrix features = Matrix::Zero(n, m);
  for (int j = 0; j < m; ++j) features(state_map[static_cast<size_t>(j)], j) = 1.0;

  SplitResult out;
  out.mdp = FiniteMdp(t, r, mdp.gamma, mdp.lambda, widths);
  out.features = FeatureSet(features);
  out.state_map = std::move(state_map);
  return out;
}

}  // namespace pbelab
