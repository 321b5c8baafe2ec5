#pragma once

#include "pbelab/common.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <string>
#include <vector>

namespace pbelab {

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

// Rank and null space share one thresholding rule: singular values at or
// below rank_rel * scale are zero. `scale` defaults to the largest singular
// value of the matrix itself; pass the natural magnitude of the assembly when
// the matrix may be an exact cancellation (e.g. A - gamma*B near zero).
struct SvdAnalysis {
  int rank = 0;
  Vector singular_values;
  Matrix nullspace;  // columns span ker(m); k x (k - rank)
  double threshold = 0.0;
};

inline SvdAnalysis svd_analyze(const Matrix& m, double scale = 0.0) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  SvdAnalysis out;
  out.singular_values = sv;
  out.threshold = tol::rank_rel * std::max(smax, scale);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > out.threshold) ++rank;
  }
  out.rank = rank;
  const Eigen::Index k = m.cols();
  out.nullspace = svd.matrixV().rightCols(k - rank);
  return out;
}

inline int numerical_rank(const Matrix& m, double scale = 0.0) {
  return svd_analyze(m, scale).rank;
}

// Solve m*x = rhs for square nonsingular m; the residual check catches
// silently bad factorizations.
inline Vector solve_dense(const Matrix& m, const Vector& rhs,
                          const std::string& context) {
  if (m.rows() != m.cols() || m.rows() != rhs.size()) {
    throw DimensionMismatch(context + ": solve shape " +
                            std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + " vs rhs " +
                            std::to_string(rhs.size()));
  }
  Eigen::PartialPivLU<Matrix> lu(m);
  const Vector x = lu.solve(rhs);
  const double scale = m.cwiseAbs().maxCoeff() * x.cwiseAbs().maxCoeff() +
                       rhs.cwiseAbs().maxCoeff() + 1.0;
  const double resid = (m * x - rhs).cwiseAbs().maxCoeff();
  if (!x.allFinite() || resid > 1e-8 * scale) {
    throw SingularSystem(context + ": solve residual " + format_real(resid));
  }
  return x;
}

// Minimum-norm least-squares point; defined for any shape and rank. Uses the
// same thresholding rule as svd_analyze so a matrix that cancelled to noise
// (tiny against `scale`) contributes nothing instead of being inverted.
inline Vector lsq_min_norm(const Matrix& m, const Vector& rhs,
                           double scale = 0.0) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double cut = tol::rank_rel * std::max(smax, scale);
  Vector coef = svd.matrixU().transpose() * rhs;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    coef(i) = sv(i) > cut ? coef(i) / sv(i) : 0.0;
  }
  return svd.matrixV() * coef;
}

inline double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Lawson-Hanson non-negative least squares: argmin_{x >= 0} ||a x - b||.
// Finite active-set method; fine for the small systems used here.
inline Vector nnls(const Matrix& a, const Vector& b, int max_passes = 200) {
  const Eigen::Index n = a.cols();
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<size_t>(n), false);
  const double eps = 1e-12 * (spectral_norm(a) + 1.0) * (b.norm() + 1.0);

  auto solve_passive = [&](const std::vector<bool>& mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (mask[static_cast<size_t>(j)]) idx.push_back(j);
    }
    Vector z = Vector::Zero(n);
    if (idx.empty()) return z;
    Matrix sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(idx[c]);
    const Vector zs = lsq_min_norm(sub, b);
    for (size_t c = 0; c < idx.size(); ++c) z(idx[c]) = zs(static_cast<Eigen::Index>(c));
    return z;
  };

  for (int pass = 0; pass < max_passes; ++pass) {
    const Vector grad = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_val = eps;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<size_t>(j)] && grad(j) > best_val) {
        best_val = grad(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<size_t>(best)] = true;

    Vector z = solve_passive(passive);
    int inner = 0;
    while (true) {
      bool ok = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<size_t>(j)] && z(j) <= 0.0) ok = false;
      }
      if (ok || ++inner > static_cast<int>(n) + 1) break;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<size_t>(j)] && z(j) <= 0.0 && x(j) != z(j)) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<size_t>(j)] && x(j) <= 1e-14) {
          passive[static_cast<size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
      z = solve_passive(passive);
    }
    x = z;
  }
  return x.cwiseMax(0.0);
}

}  // namespace pbelab
