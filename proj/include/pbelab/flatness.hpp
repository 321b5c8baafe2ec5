#pragma once

#include "pbelab/common.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/projection.hpp"
#include "pbelab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pbelab {

// How level-set masses are judged "positive measure". Finite chains treat
// every surviving atom as genuine mass; grid-discretized chains treat an
// extremum concentrated on a single cell as the discretization of a point
// (mass <= cell_factor * largest participating cell does not count).
struct FlatnessPolicy {
  bool grid_cells = false;
  double support_eps = tol::support_eps;
  double cell_factor = 1.5;
  double tie_rel = 1e-12;  // tie slack when locating exact extrema
};

// Level sets of one span direction phi = c^T features:
//   upper set at alpha: {s : phi(s) >= alpha * phi_max}
//   lower set at alpha: {s : phi(s) <= alpha * phi_min}
// Extrema and masses are computed over the mu-support only. The flat flags
// always refer to alpha = 1 (with tie slack), regardless of the requested
// alpha for the mass columns.
struct ExtremaReport {
  Vector direction;
  double phi_max = 0.0;
  double phi_min = 0.0;
  double alpha = 1.0;
  double mass_upper = 0.0;
  double mass_lower = 0.0;
  bool flat_max = false;
  bool flat_min = false;
  double threshold_upper = 0.0;
  double threshold_lower = 0.0;
};

namespace detail {

inline double flat_threshold(double largest_cell, const FlatnessPolicy& pol) {
  return pol.grid_cells
             ? std::max(pol.support_eps, pol.cell_factor * largest_cell)
             : pol.support_eps;
}

}  // namespace detail

inline ExtremaReport extrema_report(const FeatureSet& phi, const Vector& c,
                                    const Measure& mu, double alpha = 1.0,
                                    const FlatnessPolicy& pol = {}) {
  if (c.cwiseAbs().maxCoeff() == 0.0) {
    throw ZeroDirection("extrema_report: zero direction");
  }
  require(alpha >= 0.0 && alpha <= 1.0,
          "extrema_report: alpha " + format_real(alpha) + " outside [0,1]");
  require(mu.n_states() == phi.n_states(), "extrema_report: state count");
  const Vector v = phi.combination(c);
  const auto support = mu.support(pol.support_eps);
  require(!support.empty(), "extrema_report: measure has empty support");

  ExtremaReport rep;
  rep.direction = c;
  rep.alpha = alpha;
  rep.phi_max = v(support.front());
  rep.phi_min = v(support.front());
  double value_scale = 0.0;
  for (int s : support) {
    rep.phi_max = std::max(rep.phi_max, v(s));
    rep.phi_min = std::min(rep.phi_min, v(s));
    value_scale = std::max(value_scale, std::abs(v(s)));
  }
  const double tie = pol.tie_rel * std::max(value_scale, 1e-300);

  double flag_up = 0.0, flag_lo = 0.0;   // alpha = 1 masses with tie slack
  double cell_up = 0.0, cell_lo = 0.0;   // largest single cell in each set
  for (int s : support) {
    if (v(s) >= alpha * rep.phi_max) rep.mass_upper += mu.weights(s);
    if (v(s) <= alpha * rep.phi_min) rep.mass_lower += mu.weights(s);
    if (v(s) >= rep.phi_max - tie) {
      flag_up += mu.weights(s);
      cell_up = std::max(cell_up, mu.weights(s));
    }
    if (v(s) <= rep.phi_min + tie) {
      flag_lo += mu.weights(s);
      cell_lo = std::max(cell_lo, mu.weights(s));
    }
  }
  rep.threshold_upper = detail::flat_threshold(cell_up, pol);
  rep.threshold_lower = detail::flat_threshold(cell_lo, pol);
  rep.flat_max = flag_up > rep.threshold_upper;
  rep.flat_min = flag_lo > rep.threshold_lower;
  return rep;
}

// Mass of the upper level set {phi >= G * phi_max} for each requested G.
// As G -> 1 the mass approaches the argmax mass; directions whose mass
// vanishes in that limit have a sharp (non-flat) maximum.
inline std::vector<std::pair<double, double>> limit_mass_curve(
    const FeatureSet& phi, const Vector& c, const Measure& mu,
    const std::vector<double>& g_values, const FlatnessPolicy& pol = {}) {
  const Vector v = phi.combination(c);
  const auto support = mu.support(pol.support_eps);
  require(!support.empty(), "limit_mass_curve: measure has empty support");
  double vmax = v(support.front());
  for (int s : support) vmax = std::max(vmax, v(s));
  std::vector<std::pair<double, double>> curve;
  curve.reserve(g_values.size());
  for (double g : g_values) {
    require(g >= 0.0 && g < 1.0,
            "limit_mass_curve: G " + format_real(g) + " outside [0,1)");
    double mass = 0.0;
    for (int s : support) {
      if (v(s) >= g * vmax) mass += mu.weights(s);
    }
    curve.emplace_back(g, mass);
  }
  return curve;
}

// Deterministic direction source: the coordinate axes (with negations unless
// restricted to the half sphere), pairwise axis differences, then seeded
// random unit vectors. Negating a direction swaps max and min roles, so
// symmetric audits need only half the sphere.
struct DirectionSampler {
  int k = 1;
  int random_count = 512;
  uint64_t seed = 0;
  bool include_basis = true;
  bool include_differences = true;
  bool half_sphere = false;

  std::vector<Vector> generate() const {
    require(k >= 1, "sampler: k must be >= 1");
    require(random_count >= 0, "sampler: negative count");
    std::vector<Vector> dirs;
    if (include_basis) {
      for (int i = 0; i < k; ++i) dirs.push_back(Vector::Unit(k, i));
      if (!half_sphere) {
        for (int i = 0; i < k; ++i) dirs.push_back(-Vector::Unit(k, i));
      }
    }
    if (include_differences) {
      const double inv = 1.0 / std::sqrt(2.0);
      for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
          dirs.push_back(inv * (Vector::Unit(k, i) - Vector::Unit(k, j)));
        }
      }
    }
    Rng rng(seed, /*stream=*/0);
    for (int r = 0; r < random_count; ++r) {
      Vector v = rng.unit_vector(k);
      if (half_sphere) {
        for (int i = 0; i < k; ++i) {
          if (v(i) != 0.0) {
            if (v(i) < 0.0) v = -v;
            break;
          }
        }
      }
      dirs.push_back(v);
    }
    return dirs;
  }
};

// Whole-span audit. When the feature table is exactly piecewise constant on a
// partition whose classes all carry positive measure, every span element is
// piecewise constant on the same partition, so flat extrema hold for all
// directions at once: the audit short-circuits with an exact certificate.
// Otherwise it samples directions (verdict is evidence, not proof).
struct FlatnessVerdict {
  bool all_flat = false;
  std::string certificate;  // "aggregation-exact" or "sampled"
  std::vector<ExtremaReport> reports;
  std::vector<double> class_masses;  // populated for the exact certificate
};

namespace detail {

struct PartitionScan {
  bool is_partition_certified = false;
  std::vector<double> class_masses;
};

inline PartitionScan scan_partition_classes(const FeatureSet& phi,
                                            const Measure& mu,
                                            const FlatnessPolicy& pol) {
  // Exact column grouping: indicator-style tables repeat columns bitwise.
  std::map<std::vector<double>, std::pair<double, double>> classes;
  for (int s : mu.support(pol.support_eps)) {
    std::vector<double> key(phi.k);
    for (int i = 0; i < phi.k; ++i) key[static_cast<size_t>(i)] = phi.table(i, s);
    auto& entry = classes[key];
    entry.first += mu.weights(s);
    entry.second = std::max(entry.second, mu.weights(s));
  }
  PartitionScan scan;
  scan.is_partition_certified = true;
  for (const auto& [key, mass_cell] : classes) {
    scan.class_masses.push_back(mass_cell.first);
    if (mass_cell.first <= flat_threshold(mass_cell.second, pol)) {
      scan.is_partition_certified = false;
    }
  }
  std::sort(scan.class_masses.begin(), scan.class_masses.end());
  return scan;
}

}  // namespace detail

inline FlatnessVerdict flatness_audit(const FeatureSet& phi, const Measure& mu,
                                      const DirectionSampler& sampler,
                                      double alpha = 1.0,
                                      const FlatnessPolicy& pol = {},
                                      int max_threads = thread_cap()) {
  require(sampler.k == phi.k, "flatness_audit: sampler dimension");
  FlatnessVerdict verdict;

  const auto scan = detail::scan_partition_classes(phi, mu, pol);
  if (scan.is_partition_certified) {
    verdict.all_flat = true;
    verdict.certificate = "aggregation-exact";
    verdict.class_masses = scan.class_masses;
    return verdict;
  }

  const auto dirs = sampler.generate();
  verdict.certificate = "sampled";
  verdict.reports.resize(dirs.size());
  parallel_for(
      static_cast<int>(dirs.size()),
      [&](int i) {
        verdict.reports[static_cast<size_t>(i)] =
            extrema_report(phi, dirs[static_cast<size_t>(i)], mu, alpha, pol);
      },
      max_threads);
  verdict.all_flat = true;
  for (const auto& rep : verdict.reports) {
    if (!rep.flat_max || !rep.flat_min) verdict.all_flat = false;
  }
  return verdict;
}

// Escape condition for the contraction band: a direction phi is covered when
// some test function pairs outside (G*phi_min, G*phi_max), i.e.
// <psi_i, phi>_mu >= G*phi_max or <psi_i, phi>_mu <= G*phi_min. Negating phi
// swaps the two inequalities for the same i, so half-sphere sampling covers
// the full span. All sampled directions covered = the projected system
// cannot be made singular by any admissible environment at this G.
struct BandEscapeResult {
  bool holds = false;
  double g = 0.0;
  std::vector<Vector> directions;
  std::vector<int> witness;        // index per direction, -1 when none
  std::vector<double> pairing;     // <psi_w, phi>_mu of the witness (or worst)
  std::vector<double> phi_max;
  std::vector<double> phi_min;
  int violating_index = -1;
};

inline BandEscapeResult band_escape_check(const FeatureSet& phi,
                                          const ProjectionBasis& psi,
                                          const Measure& mu, double g,
                                          const DirectionSampler& sampler,
                                          const FlatnessPolicy& pol = {}) {
  require(g >= 0.0 && g < 1.0,
          "band_escape_check: G " + format_real(g) + " outside [0,1)");
  require(psi.n_states() == phi.n_states() &&
              mu.n_states() == phi.n_states(),
          "band_escape_check: state count");
  if (!psi.normalized(mu)) {
    throw ValidationError("band_escape_check: psi is not mu-normalized");
  }
  const auto support = mu.support(pol.support_eps);
  require(!support.empty(), "band_escape_check: measure has empty support");

  BandEscapeResult res;
  res.g = g;
  res.directions = sampler.generate();
  const size_t m = res.directions.size();
  res.witness.assign(m, -1);
  res.pairing.assign(m, 0.0);
  res.phi_max.assign(m, 0.0);
  res.phi_min.assign(m, 0.0);
  res.holds = true;

  for (size_t d = 0; d < m; ++d) {
    const Vector v = phi.combination(res.directions[d]);
    double vmax = v(support.front());
    double vmin = v(support.front());
    for (int s : support) {
      vmax = std::max(vmax, v(s));
      vmin = std::min(vmin, v(s));
    }
    res.phi_max[d] = vmax;
    res.phi_min[d] = vmin;
    const double slack =
        1e-12 * std::max({std::abs(vmax), std::abs(vmin), 1e-300});
    double worst = 0.0;
    for (int i = 0; i < psi.n; ++i) {
      const double p = mu_inner(psi.row(i), v, mu);
      if (i == 0) worst = p;
      if (p >= g * vmax - slack || p <= g * vmin + slack) {
        res.witness[d] = i;
        res.pairing[d] = p;
        break;
      }
    }
    if (res.witness[d] < 0) {
      res.pairing[d] = worst;
      res.holds = false;
      if (res.violating_index < 0) res.violating_index = static_cast<int>(d);
    }
  }
  return res;
}

}  // namespace pbelab
