#pragma once

// Shared fixtures: independently coded oracles (series expansions, eigen
// decompositions, weighted least squares) and seeded generators. Oracles
// deliberately avoid the library's closed forms so agreement is evidence.

#include <pbelab/ambiguity.hpp>
#include <pbelab/mdp.hpp>
#include <pbelab/projection.hpp>
#include <pbelab/rng.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

namespace testlab {

using pbelab::FeatureSet;
using pbelab::FiniteMdp;
using pbelab::Matrix;
using pbelab::Measure;
using pbelab::ProjectionBasis;
using pbelab::Vector;

// Truncated series for the lambda-averaged kernel applied to v:
//   (1 - lambda) sum_{m>=0} (lambda gamma)^m T^{m+1} v.
inline Vector p_lambda_series(const FiniteMdp& mdp, const Vector& v,
                              int terms = 400) {
  if (mdp.lambda == 0.0) return mdp.transition * v;
  Vector acc = Vector::Zero(mdp.n_states);
  Vector power = mdp.transition * v;  // T^{m+1} v
  double coeff = 1.0;
  for (int m = 0; m < terms; ++m) {
    acc += coeff * power;
    power = mdp.transition * power;
    coeff *= mdp.lambda * mdp.gamma;
  }
  return (1.0 - mdp.lambda) * acc;
}

// Truncated series for the lambda-averaged reward:
//   sum_{m>=0} (lambda gamma)^m T^m R.
inline Vector r_lambda_series(const FiniteMdp& mdp, int terms = 400) {
  Vector acc = Vector::Zero(mdp.n_states);
  Vector power = mdp.reward;  // T^m R
  double coeff = 1.0;
  for (int m = 0; m < terms; ++m) {
    acc += coeff * power;
    power = mdp.transition * power;
    coeff *= mdp.lambda * mdp.gamma;
  }
  return acc;
}

// Stationary weights via the left eigenvector at eigenvalue 1.
inline Vector stationary_eigen(const Matrix& transition) {
  const Eigen::EigenSolver<Matrix> es(transition.transpose());
  int best = 0;
  double best_gap = 1e300;
  for (int i = 0; i < transition.rows(); ++i) {
    const double gap = std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  Vector v = es.eigenvectors().col(best).real();
  return v / v.sum();
}

// mu-orthogonal projection onto span(features): Phi^T (Phi D Phi^T)^{-1} Phi D v.
inline Vector orthogonal_projection(const FeatureSet& phi, const Measure& mu,
                                    const Vector& v) {
  const Matrix d = mu.weights.asDiagonal();
  const Matrix gram = phi.table * d * phi.table.transpose();
  const Vector w = gram.ldlt().solve(phi.table * d * v);
  return phi.table.transpose() * w;
}

// Irreducible aperiodic chain: random rows blended with the uniform kernel.
inline FiniteMdp random_mdp(uint64_t seed, int n, double gamma = 0.9,
                            double lambda = 0.0) {
  pbelab::Rng rng(seed, /*stream=*/11);
  Matrix t(n, n);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      t(i, j) = rng.uniform01() + 1e-3;
      row_sum += t(i, j);
    }
    for (int j = 0; j < n; ++j) {
      t(i, j) = 0.9 * t(i, j) / row_sum + 0.1 / n;
    }
  }
  Vector r(n);
  for (int i = 0; i < n; ++i) r(i) = rng.uniform(-1.0, 1.0);
  return FiniteMdp(t, r, gamma, lambda);
}

inline FeatureSet random_features(uint64_t seed, int k, int n) {
  pbelab::Rng rng(seed, /*stream=*/13);
  Matrix table(k, n);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) table(i, j) = rng.normal();
  }
  return FeatureSet(table);  // Gaussian rows: dependent with probability 0
}

// Partition of n states into k classes (each non-empty), as indicator rows.
inline FeatureSet partition_features(uint64_t seed, int k, int n) {
  pbelab::Rng rng(seed, /*stream=*/17);
  std::vector<int> owner(static_cast<size_t>(n));
  for (int i = 0; i < k; ++i) owner[static_cast<size_t>(i)] = i;  // non-empty
  for (int i = k; i < n; ++i) {
    owner[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(k));
  }
  Matrix table = Matrix::Zero(k, n);
  for (int j = 0; j < n; ++j) table(owner[static_cast<size_t>(j)], j) = 1.0;
  return FeatureSet(table);
}

// A chain + single feature + unit test function engineered so that the
// averaged-target construction is provably feasible: about a third of the
// states sit on the max plateau (value 1) and the rest stay below 0.8, so
// the upper cut's mass obeys m/n <= G/(1+G) at G = 0.95 with room to spare.
struct SingularInstance {
  FiniteMdp mdp;               // synthesized chain with a singular system
  FiniteMdp mdp_template;      // chain the target was built against
  FeatureSet phi;
  ProjectionBasis psi;
  Measure mu;
  Vector direction;            // null direction of the synthesized system
  pbelab::TargetConstruction construction;
};

inline SingularInstance make_singular_instance(uint64_t seed) {
  pbelab::Rng rng(seed, /*stream=*/19);
  const int n = 6 + static_cast<int>(rng.uniform_int(5));
  const int plateau = std::max(2, n / 3);
  Matrix row(1, n);
  for (int j = 0; j < n; ++j) {
    row(0, j) = j < plateau ? 1.0 : rng.uniform(0.0, 0.8);
  }
  row(0, n - 1) = 0.0;  // pin the min so the direction is never constant

  SingularInstance inst;
  inst.phi = FeatureSet(row);
  inst.mu = Measure(Vector::Constant(n, 1.0 / n));
  inst.psi = ProjectionBasis(Matrix::Ones(1, n));
  inst.mdp_template = random_mdp(seed, n, /*gamma=*/0.95, /*lambda=*/0.0);
  inst.direction = Vector::Ones(1);

  const Vector phi_dir = inst.phi.combination(inst.direction);
  inst.construction = pbelab::construct_target(phi_dir, inst.psi, inst.mu,
                                               inst.mdp_template.gamma);
  inst.mdp = pbelab::environment_from_target(inst.construction.f, phi_dir,
                                             inst.mdp_template);
  return inst;
}

// Tent over n equal cells of [0,1]: rises linearly to 1 at an irrational
// peak (1/sqrt 2, so no cell midpoint ever ties with it), back to 0 at 1.
inline FeatureSet tent_features(int n) {
  const double peak = 1.0 / std::sqrt(2.0);
  Matrix row(1, n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    row(0, i) = x <= peak ? x / peak : (1.0 - x) / (1.0 - peak);
  }
  return FeatureSet(row);
}

// Lazy reflecting random walk over n grid cells; doubly stochastic, so its
// stationary weights are exactly uniform.
inline FiniteMdp grid_walk(int n, double gamma, const Vector& reward) {
  Matrix t = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    t(i, i) += 0.5;
    t(i, std::max(i - 1, 0)) += 0.25;
    t(i, std::min(i + 1, n - 1)) += 0.25;
  }
  return FiniteMdp(t, reward, gamma, 0.0, Vector::Constant(n, 1.0 / n));
}

// Complementary trapezoids over n cells: phi1 = 1 on the left plateau
// [0, 0.3], ramps to 0 across [0.3, 0.7]; phi2 = 1 - phi1. The companion
// test functions are the normalized plateau indicators.
struct TrapezoidSetup {
  FeatureSet phi;
  Matrix psi_raw;  // un-normalized plateau indicators
};

inline TrapezoidSetup trapezoid_setup(int n) {
  Matrix table(2, n);
  Matrix psi = Matrix::Zero(2, n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    double left;
    if (x <= 0.3) {
      left = 1.0;
      psi(0, i) = 1.0;
    } else if (x >= 0.7) {
      left = 0.0;
      psi(1, i) = 1.0;
    } else {
      left = (0.7 - x) / 0.4;
    }
    table(0, i) = left;
    table(1, i) = 1.0 - left;
  }
  return TrapezoidSetup{FeatureSet(table), psi};
}

// The smallest singular system: a 2-state chain whose single test function
// is mu-orthogonal to (I - gamma T) phi, with exact rational entries.
struct SingularToy {
  FiniteMdp mdp;
  FeatureSet phi;
  ProjectionBasis psi;
  Measure mu;
};

inline SingularToy singular_toy(const Vector& reward) {
  Matrix t(2, 2);
  t << 0.0, 1.0,
       0.5, 0.5;
  SingularToy toy;
  toy.mdp = FiniteMdp(t, reward, 0.9, 0.0);
  Matrix phi(1, 2);
  phi << 1.0, 0.0;
  toy.phi = FeatureSet(phi);
  Vector mu(2);
  mu << 1.0 / 3.0, 2.0 / 3.0;
  toy.mu = Measure(mu);
  Matrix psi(1, 2);
  psi << 27.0 / 29.0, 30.0 / 29.0;
  toy.psi = ProjectionBasis(psi);
  return toy;
}

}  // namespace testlab
