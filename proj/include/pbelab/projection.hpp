#pragma once

#include "pbelab/common.hpp"
#include "pbelab/linalg.hpp"
#include "pbelab/mdp.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>

namespace pbelab {

// k features over n states, one feature per row. Rows must be linearly
// independent as vectors; independence restricted to the mu-support is a
// separate diagnostic (support_rank) because features may legitimately live
// on unvisited states.
struct FeatureSet {
  int k = 0;
  Matrix table;

  FeatureSet() = default;

  explicit FeatureSet(Matrix t) : k(static_cast<int>(t.rows())), table(std::move(t)) {
    require(k >= 1 && table.cols() >= 1, "features: empty table");
    require(table.allFinite(), "features: non-finite entries");
    const int r = numerical_rank(table);
    require(r == k, "features: rows dependent (rank " + std::to_string(r) +
                        " of " + std::to_string(k) + ")");
  }

  int n_states() const { return static_cast<int>(table.cols()); }

  // Value table of the span element with coefficients c.
  Vector combination(const Vector& c) const {
    if (c.size() != k) {
      throw DimensionMismatch("features: coefficient length " +
                              std::to_string(c.size()) + " vs k " +
                              std::to_string(k));
    }
    return table.transpose() * c;
  }
};

// Rank of the feature rows restricted to states mu actually visits.
inline int support_rank(const FeatureSet& phi, const Measure& mu) {
  const auto support = mu.support();
  Matrix restricted(phi.k, static_cast<Eigen::Index>(support.size()));
  for (size_t j = 0; j < support.size(); ++j) {
    restricted.col(static_cast<Eigen::Index>(j)) = phi.table.col(support[j]);
  }
  return support.size() == 0 ? 0 : numerical_rank(restricted);
}

// Test functions defining the projection's adjoint image, one per row,
// normalized so sum_s psi_i(s) mu(s) = 1.
struct ProjectionBasis {
  int n = 0;
  Matrix table;

  ProjectionBasis() = default;

  explicit ProjectionBasis(Matrix t)
      : n(static_cast<int>(t.rows())), table(std::move(t)) {
    require(n >= 1 && table.cols() >= 1, "basis: empty table");
    require(table.allFinite(), "basis: non-finite entries");
  }

  int n_states() const { return static_cast<int>(table.cols()); }

  Vector row(int i) const { return table.row(i).transpose(); }

  bool normalized(const Measure& mu, double eps = 1e-8) const {
    for (int i = 0; i < n; ++i) {
      if (std::abs(mu_inner(row(i), Vector::Ones(table.cols()), mu) - 1.0) >
          eps) {
        return false;
      }
    }
    return true;
  }
};

// Scale each raw row to unit mu-mass. A row with (near-)zero mass cannot be
// normalized by scaling; the caller must re-choose that test function.
inline ProjectionBasis normalize_basis(const Matrix& raw, const Measure& mu) {
  require(raw.cols() == mu.weights.size(),
          "normalize_basis: table has " + std::to_string(raw.cols()) +
              " states, measure has " + std::to_string(mu.weights.size()));
  Matrix out = raw;
  for (int i = 0; i < raw.rows(); ++i) {
    const double mass = (raw.row(i).transpose().array() * mu.weights.array()).sum();
    const double scale = raw.row(i).cwiseAbs().maxCoeff();
    if (std::abs(mass) <= tol::support_eps * std::max(1.0, scale)) {
      throw ZeroMass("normalize_basis: row " + std::to_string(i) +
                     " has mu-mass " + format_real(mass));
    }
    out.row(i) /= mass;
  }
  return ProjectionBasis(out);
}

// The characteristic linear system of the projected fixed-point equation:
//   A_ij = <psi_i, phi_j>_mu,  B_ij = <psi_i, P^(lambda) phi_j>_mu,
//   b_i  = <psi_i, R^(lambda)>_mu,  solving (A - gamma B) w = b.
// Stored with gamma and lambda so the system is self-describing.
struct ProjectedSystem {
  Matrix A;
  Matrix B;
  Vector b;
  double gamma = 0.0;
  double lambda = 0.0;
  bool psi_normalized = true;

  Matrix system_matrix() const { return A - gamma * B; }

  // Natural magnitude of the assembly; anchors rank thresholds when
  // A - gamma B cancels to zero.
  double scale() const {
    const double a = A.size() ? A.cwiseAbs().maxCoeff() : 0.0;
    const double bb = B.size() ? B.cwiseAbs().maxCoeff() : 0.0;
    return std::max({a, gamma * bb, 1e-300});
  }
};

// Assembly from explicit parts. `reward_gen` must already be the
// lambda-weighted reward (an MDP's r_lambda, or a template's own reward,
// which is generalized by definition).
inline ProjectedSystem assemble_from_parts(const Matrix& transition,
                                           const Vector& reward_gen,
                                           double gamma, double lambda,
                                           const FeatureSet& phi,
                                           const ProjectionBasis& psi,
                                           const Measure& mu) {
  const int n_states = static_cast<int>(transition.rows());
  require(phi.n_states() == n_states && psi.n_states() == n_states &&
              mu.n_states() == n_states && reward_gen.size() == n_states,
          "assemble_system: state-count mismatch");
  FiniteMdp carrier(transition, reward_gen, gamma, lambda);
  const Matrix p_lam = p_lambda_matrix(carrier);
  const Matrix weighted_psi =
      psi.table * mu.weights.asDiagonal();  // rows psi_i(s) mu(s)
  ProjectedSystem sys;
  sys.A = weighted_psi * phi.table.transpose();
  sys.B = weighted_psi * (p_lam * phi.table.transpose()).eval();
  sys.b = weighted_psi * reward_gen;
  sys.gamma = gamma;
  sys.lambda = lambda;
  sys.psi_normalized = psi.normalized(mu);
  return sys;
}

inline ProjectedSystem assemble_system(const FiniteMdp& mdp,
                                       const FeatureSet& phi,
                                       const ProjectionBasis& psi,
                                       const Measure& mu) {
  return assemble_from_parts(mdp.transition, r_lambda(mdp), mdp.gamma,
                             mdp.lambda, phi, psi, mu);
}

// Nothing-up-the-sleeve solve outcome: a unique weight vector when the
// system has full column rank, otherwise the rank and a null-space basis
// plus the minimum-norm least-squares point (labeled, never a silent pick).
struct SolveReport {
  bool unique = false;
  bool generalized = false;  // least-squares (non-square or inconsistent)
  Vector w;                  // unique solution, or min-norm point when !unique
  int rank = 0;
  Matrix nullspace;  // k x (k - rank)
  double residual = 0.0;
};

inline SolveReport solve_system(const ProjectedSystem& sys) {
  const Matrix m = sys.system_matrix();
  const SvdAnalysis an = svd_analyze(m, sys.scale());
  SolveReport rep;
  rep.rank = an.rank;
  rep.nullspace = an.nullspace;
  rep.generalized = m.rows() != m.cols();
  if (an.rank == m.cols()) {
    rep.unique = true;
    rep.w = rep.generalized ? lsq_min_norm(m, sys.b, sys.scale())
                            : solve_dense(m, sys.b, "solve_system");
  } else {
    rep.unique = false;
    rep.w = lsq_min_norm(m, sys.b, sys.scale());
  }
  rep.residual = (m * rep.w - sys.b).norm();
  return rep;
}

// Oblique projection of v onto span(phi) along the complement of span(psi):
// solves <psi_i, v - Phi^T w>_mu = 0. Needs the k x k pairing matrix
// nonsingular (n = k).
inline Vector oblique_project(const Vector& v, const FeatureSet& phi,
                              const ProjectionBasis& psi, const Measure& mu) {
  require(psi.n == phi.k,
          "oblique_project: basis count " + std::to_string(psi.n) +
              " != feature count " + std::to_string(phi.k));
  require(v.size() == phi.n_states(), "oblique_project: value length");
  const Matrix weighted_psi = psi.table * mu.weights.asDiagonal();
  const Matrix pairing = weighted_psi * phi.table.transpose();
  // Anchor the rank test to the cancellation-free magnitude of the pairing so
  // an exact mu-orthogonality (entries that cancelled to noise) is caught.
  const double pairing_scale =
      (weighted_psi.cwiseAbs() * phi.table.transpose().cwiseAbs()).maxCoeff();
  if (numerical_rank(pairing, pairing_scale) < phi.k) {
    throw SingularSystem("oblique_project: <psi_i, phi_j>_mu is singular");
  }
  const Vector rhs = weighted_psi * v;
  const Vector w = solve_dense(pairing, rhs, "oblique_project");
  return phi.combination(w);
}

// Dimension comparison between the projection's image and its adjoint image.
struct AdjointDimCheck {
  int dim_phi = 0;
  int dim_psi = 0;
  bool equal = false;
  // "bounded" when dimensions agree (the projection is a bona fide bounded
  // finite-rank operator); "generalized-finite-rank" otherwise.
  std::string classification;
};

inline AdjointDimCheck adjoint_image_dim_check(const FeatureSet& phi,
                                               const ProjectionBasis& psi) {
  AdjointDimCheck out;
  out.dim_phi = numerical_rank(phi.table);
  out.dim_psi = numerical_rank(psi.table);
  out.equal = out.dim_phi == out.dim_psi;
  out.classification = out.equal ? "bounded" : "generalized-finite-rank";
  return out;
}

inline double bellman_error(const FiniteMdp& mdp, const FeatureSet& phi,
                            const Vector& w, const Measure& mu) {
  return bellman_error(mdp, phi.table, w, mu);
}

}  // namespace pbelab
