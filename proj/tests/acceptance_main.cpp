// Acceptance gate: one line per criterion, [PASS] or [FAIL], tolerances
// pinned below. Exit code is the number of failed criteria.

#include "helpers.hpp"

#include <pbelab/algorithms.hpp>
#include <pbelab/ambiguity.hpp>
#include <pbelab/flatness.hpp>
#include <pbelab/scenario.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace pbelab;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kTolPairIdentity = 1e-12;  // criterion 1: exact identities
constexpr double kTolSeries = 1e-9;         // criterion 2: closed form vs series
constexpr double kTolMoment = 1e-8;         // criterion 3: residual + null action
constexpr double kSigmaRatio = 1e-6;        // criterion 4: regularity margin
constexpr double kTolShared = 1e-9;         // criterion 5: shared data + constraint
constexpr double kTolGap = 1e-10;           // criterion 5: gap identity
constexpr double kTolConverge = 1e-8;       // criterion 6: iterate vs solve
constexpr double kTolGradient = 1e-6;       // criterion 7: relative FD agreement
constexpr double kGradientFloor = 1e-2;     // criterion 7: relative-error floor

// Time budgets (seconds); 0 = untimed.
constexpr double kBudget[9] = {0, 1.0, 10.0, 5.0, 30.0, 0, 0, 0, 0};

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

double run_criterion(int index, const char* title,
                     const std::function<void(Outcome&)>& body, int& failures) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.fail(std::string("exception: ") + e.what());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (kBudget[index] > 0.0 && seconds > kBudget[index]) {
    out.fail("over time budget of " + format_real(kBudget[index]) + "s");
  }
  std::printf("[%s] criterion %d: %s (%.2fs%s%s)\n", out.ok ? "PASS" : "FAIL",
              index, title, seconds, out.detail.empty() ? "" : " — ",
              out.detail.c_str());
  std::fflush(stdout);
  if (!out.ok) ++failures;
  return seconds;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// --- criterion bodies -------------------------------------------------------

void criterion1(Outcome& out) {
  const auto pair = aliasing_pair(0.9, 0.0);
  const Measure mu1 = stationary_distribution(pair.mdp1);
  const Measure mu2 = stationary_distribution(pair.mdp2);
  if ((mu1.weights - pair.mu1.weights).cwiseAbs().maxCoeff() > kTolPairIdentity ||
      (mu2.weights - pair.mu2.weights).cwiseAbs().maxCoeff() > kTolPairIdentity) {
    out.fail("stationary weights drift");
  }
  const double err1 = bellman_error(pair.mdp1, pair.phi1, Vector::Zero(2), pair.mu1);
  const double err2 = bellman_error(pair.mdp2, pair.phi2, Vector::Zero(2), pair.mu2);
  if (std::abs(err1) > kTolPairIdentity) out.fail("small chain error not 0");
  if (std::abs(err2 - 2.0 / 3.0) > kTolPairIdentity) {
    out.fail("large chain error not 2/3");
  }
  for (double lambda : {0.0, 0.5}) {
    const auto p = aliasing_pair(0.9, lambda);
    const ProjectedSystem s1 = assemble_system(p.mdp1, p.phi1, p.psi1, p.mu1);
    const ProjectedSystem s2 = assemble_system(p.mdp2, p.phi2, p.psi2, p.mu2);
    const double gap = std::max({(s1.A - s2.A).cwiseAbs().maxCoeff(),
                                 (s1.B - s2.B).cwiseAbs().maxCoeff(),
                                 (s1.b - s2.b).cwiseAbs().maxCoeff()});
    if (gap > kTolPairIdentity) {
      out.fail("projected data differ at lambda " + format_real(lambda));
    }
  }
  if (out.ok) out.detail = "both chains project to one system at lambda 0 and 0.5";
}

void criterion2(Outcome& out) {
  Rng rng(2024, 0);
  int pairs_checked = 0;
  for (uint64_t seed = 1; seed <= 50 && out.ok; ++seed) {
    const int n = 2 + static_cast<int>(seed % 9);
    for (double lambda : {0.0, 0.3, 0.7, 0.9}) {
      const FiniteMdp mdp = testlab::random_mdp(seed, n, 0.9, lambda);
      Vector v(n);
      for (int i = 0; i < n; ++i) v(i) = rng.uniform(-3.0, 3.0);
      if ((apply_p_lambda(mdp, v) - testlab::p_lambda_series(mdp, v))
              .cwiseAbs()
              .maxCoeff() > kTolSeries) {
        out.fail("kernel closed form drifts from series at seed " +
                 std::to_string(seed));
      }
      if ((r_lambda(mdp) - testlab::r_lambda_series(mdp)).cwiseAbs().maxCoeff() >
          kTolSeries) {
        out.fail("reward closed form drifts from series");
      }
      const Vector value = exact_value(mdp);
      if ((value - (r_lambda(mdp) + mdp.gamma * apply_p_lambda(mdp, value)))
              .cwiseAbs()
              .maxCoeff() > kTolSeries) {
        out.fail("true value is not a fixed point at lambda " +
                 format_real(lambda));
      }
    }
    // non-expansion, two fresh vectors per chain: 100 (chain, v) pairs
    const FiniteMdp mdp = testlab::random_mdp(seed, n, 0.9, 0.6);
    for (int rep = 0; rep < 2; ++rep) {
      Vector v(n);
      for (int i = 0; i < n; ++i) v(i) = rng.uniform(-5.0, 5.0);
      if (apply_p_lambda(mdp, v).cwiseAbs().maxCoeff() >
          v.cwiseAbs().maxCoeff() + 1e-12) {
        out.fail("averaged kernel expanded the sup norm");
      }
      ++pairs_checked;
    }
  }
  if (out.ok) {
    out.detail = "50 chains, 4 trace decays, " + std::to_string(pairs_checked) +
                 " non-expansion pairs";
  }
}

void criterion3(Outcome& out) {
  const int n = 2001;
  const double g = 0.99;
  const FeatureSet phi = testlab::tent_features(n);
  const Measure mu(Vector::Constant(n, 1.0 / n));
  const ProjectionBasis psi(Matrix::Ones(1, n));
  const FiniteMdp walk = testlab::grid_walk(n, g, Vector::Zero(n));

  const Vector dir = phi.combination(Vector::Ones(1));
  const auto tc = construct_target(dir, psi, mu, g, walk.widths_or_unit());
  if (!tc.feasible) out.fail("target construction infeasible");
  if (tc.residual.cwiseAbs().maxCoeff() > kTolMoment) {
    out.fail("moment residual " + format_real(tc.residual.cwiseAbs().maxCoeff()));
  }

  const FiniteMdp synthesized = environment_from_target(tc.f, dir, walk);
  const ProjectedSystem sys = assemble_system(synthesized, phi, psi, mu);
  if (!detect_ambiguity(sys).has_value()) out.fail("system is not singular");
  const double null_action =
      (sys.system_matrix() * Vector::Ones(1)).cwiseAbs().maxCoeff();
  if (null_action > kTolMoment) {
    out.fail("tent coefficient escapes the null space: " +
             format_real(null_action));
  }
  if (out.ok) {
    out.detail = "2001-cell tent at G = 0.99, null action " +
                 format_real(null_action);
  }
}

void criterion4(Outcome& out) {
  int infeasible_checked = 0;
  for (uint64_t seed = 1; seed <= 20 && out.ok; ++seed) {
    const int k = 2 + static_cast<int>(seed % 3);
    const int n = 6 + static_cast<int>(seed % 7);
    const FeatureSet phi = testlab::partition_features(seed, k, n);
    const FiniteMdp mdp = testlab::random_mdp(seed + 900, n, 0.9, 0.0);
    const Measure mu = stationary_distribution(mdp);
    const ProjectionBasis psi = normalize_basis(phi.table, mu);

    const ProjectedSystem sys = assemble_system(mdp, phi, psi, mu);
    const auto svd = svd_analyze(sys.system_matrix(), sys.scale());
    const double smax = svd.singular_values(0);
    const double smin = svd.singular_values(svd.singular_values.size() - 1);
    if (smin <= kSigmaRatio * smax) {
      out.fail("regularity margin violated at seed " + std::to_string(seed));
    }

    DirectionSampler sampler;
    sampler.k = k;
    sampler.random_count = 256;
    sampler.seed = seed;
    for (double g : {0.9, 0.99}) {
      for (const Vector& c : sampler.generate()) {
        const auto tc = construct_target(phi.combination(c), psi, mu, g);
        if (tc.feasible) {
          out.fail("feasible target against a positive-mass partition, seed " +
                   std::to_string(seed) + ", G " + format_real(g));
          break;
        }
        ++infeasible_checked;
      }
      if (!out.ok) break;
    }
  }
  if (out.ok) {
    out.detail = std::to_string(infeasible_checked) +
                 " directions all infeasible; singular values well separated";
  }
}

void criterion5(Outcome& out) {
  struct Instance {
    std::string name;
    FiniteMdp mdp;
    FeatureSet phi;
    ProjectionBasis psi;
    Measure mu;
  };
  std::vector<Instance> instances;

  {  // exact-rational 2-state toy
    const auto toy = testlab::singular_toy(Vector::Zero(2));
    instances.push_back({"toy", toy.mdp, toy.phi, toy.psi, toy.mu});
  }
  {  // 2001-cell tent synthesis
    const int n = 2001;
    const FeatureSet phi = testlab::tent_features(n);
    const Measure mu(Vector::Constant(n, 1.0 / n));
    const ProjectionBasis psi(Matrix::Ones(1, n));
    const FiniteMdp walk = testlab::grid_walk(n, 0.99, Vector::Zero(n));
    const Vector dir = phi.combination(Vector::Ones(1));
    const auto tc = construct_target(dir, psi, mu, 0.99, walk.widths_or_unit());
    instances.push_back(
        {"tent", environment_from_target(tc.f, dir, walk), phi, psi, mu});
  }
  for (uint64_t seed = 1; seed <= 10; ++seed) {  // synthesized plateau family
    const auto inst = testlab::make_singular_instance(seed);
    instances.push_back({"plateau-" + std::to_string(seed), inst.mdp, inst.phi,
                         inst.psi, inst.mu});
  }

  int witnessed = 0;
  for (const auto& inst : instances) {
    const ProjectedSystem sys =
        assemble_system(inst.mdp, inst.phi, inst.psi, inst.mu);
    const auto nullspace = detect_ambiguity(sys);
    if (!nullspace) {
      out.fail(inst.name + ": no ambiguity detected");
      continue;
    }
    const Vector v = nullspace->col(0);
    const double xi = 1.0;
    const auto wit =
        witness_from_nullspace(inst.mdp, inst.phi, inst.psi, inst.mu, v, xi);
    if (wit.base_residual > kTolShared || wit.alternate_residual > kTolShared) {
      out.fail(inst.name + ": template constraint violated");
    }
    if (wit.max_abc_discrepancy > kTolShared) {
      out.fail(inst.name + ": projected data differ");
    }
    if (std::abs(wit.w_gap - xi * v.norm()) > kTolGap) {
      out.fail(inst.name + ": weight gap is not xi * |v|");
    }
    ++witnessed;
  }
  if (out.ok) {
    out.detail = std::to_string(witnessed) +
                 " singular instances witnessed with shared projected data";
  }
}

void criterion6(Outcome& out) {
  const int n = 200;
  const double gamma = 0.95;
  const auto setup = testlab::trapezoid_setup(n);
  const Measure mu(Vector::Constant(n, 1.0 / n));
  const ProjectionBasis psi = normalize_basis(setup.psi_raw, mu);

  DirectionSampler sampler;
  sampler.k = 2;
  sampler.random_count = 256;
  sampler.seed = 6;
  const auto escape = band_escape_check(setup.phi, psi, mu, gamma, sampler);
  if (!escape.holds) {
    out.fail("band escape fails at direction " +
             std::to_string(escape.violating_index));
  }
  for (size_t d = 0; d < escape.witness.size() && out.ok; ++d) {
    if (escape.witness[d] < 0) out.fail("direction without witness");
  }

  Vector reward(n);
  for (int i = 0; i < n; ++i) reward(i) = (i + 0.5) / n;
  const FiniteMdp walk = testlab::grid_walk(n, gamma, reward);
  const SolveReport solved =
      solve_system(assemble_system(walk, setup.phi, psi, mu));
  if (!solved.unique) out.fail("projected system unexpectedly singular");
  const auto trace = expected_td_lambda(walk, setup.phi, psi, mu, 0.0, 200000,
                                        1e-12, 100);
  if (trace.verdict != RunTrace::Verdict::converged) {
    out.fail(std::string("iteration verdict: ") + verdict_name(trace.verdict));
  } else if ((trace.final_w - solved.w).norm() > kTolConverge) {
    out.fail("iterate misses the solved weights by " +
             format_real((trace.final_w - solved.w).norm()));
  }
  if (out.ok) {
    out.detail = "escape witnessed on every direction; iterate within " +
                 format_real((trace.final_w - solved.w).norm());
  }
}

void criterion7(Outcome& out) {
  Rng rng(7, 0);
  int comparisons = 0;
  for (uint64_t seed = 1; seed <= 10 && out.ok; ++seed) {
    const int n = 5 + static_cast<int>(seed % 4);
    const FiniteMdp mdp = testlab::random_mdp(seed + 70, n, 0.9, 0.0);
    const Measure mu = stationary_distribution(mdp);
    const FeatureSet phi = testlab::random_features(seed + 80, 2, n);
    for (int pt = 0; pt < 10; ++pt) {
      Vector w(2);
      w << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
      const Vector grad = bellman_error_gradient(mdp, phi, w, mu);
      for (int i = 0; i < 2; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(w(i)));
        Vector hi = w, lo = w;
        hi(i) += h;
        lo(i) -= h;
        const double fd =
            (bellman_error(mdp, phi, hi, mu) - bellman_error(mdp, phi, lo, mu)) /
            (2.0 * h);
        const double scale =
            std::max({std::abs(fd), std::abs(grad(i)), kGradientFloor});
        if (std::abs(grad(i) - fd) / scale > kTolGradient) {
          out.fail("gradient component drifts from finite differences at seed " +
                   std::to_string(seed));
        }
        ++comparisons;
      }
    }
  }
  if (out.ok) {
    out.detail = std::to_string(comparisons) + " components within " +
                 format_real(kTolGradient) + " relative";
  }
}

void criterion8(Outcome& out) {
  const fs::path corpus(PBELAB_SCENARIO_DIR);
  const fs::path base = fs::temp_directory_path() / "pbelab_acceptance";
  std::error_code ec;
  fs::remove_all(base, ec);
  const std::vector<std::string> names{"aliasing_pair.json", "aggregation_audit.json",
                                       "singular_witness.json",
                                       "tent_synthesis.json"};
  int files_compared = 0;
  for (const auto& name : names) {
    const Scenario sc = load_scenario(corpus / name);
    const fs::path out1 = base / (sc.name + "_1");
    const fs::path out2 = base / (sc.name + "_2");
    std::vector<std::string> files1, files2;
    if (run_scenario(sc, out1, &files1) != 0 ||
        run_scenario(sc, out2, &files2) != 0) {
      out.fail(sc.name + ": task failed");
      continue;
    }
    if (files1 != files2 || files1.empty()) {
      out.fail(sc.name + ": file lists differ");
      continue;
    }
    for (const auto& f : files1) {
      if (slurp(out1 / f) != slurp(out2 / f)) {
        out.fail(sc.name + "/" + f + ": bytes differ between runs");
      }
      ++files_compared;
    }
  }
  if (out.ok) {
    out.detail = std::to_string(files_compared) +
                 " report files byte-identical across repeated runs";
  }
}

}  // namespace

int main() {
  int failures = 0;
  run_criterion(1, "aliasing pair shares one projected system", criterion1,
                failures);
  run_criterion(2, "averaged operator: series, non-expansion, fixed point",
                criterion2, failures);
  run_criterion(3, "tent target synthesizes a singular system", criterion3,
                failures);
  run_criterion(4, "positive-mass partitions resist singular targets",
                criterion4, failures);
  run_criterion(5, "every singular instance yields a sound witness", criterion5,
                failures);
  run_criterion(6, "plateau test functions: escape holds and iteration lands",
                criterion6, failures);
  run_criterion(7, "error gradient matches finite differences", criterion7,
                failures);
  run_criterion(8, "scenario corpus reproduces byte for byte", criterion8,
                failures);
  if (failures != 0) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
