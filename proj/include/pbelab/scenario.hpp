#pragma once

#include "pbelab/algorithms.hpp"
#include "pbelab/ambiguity.hpp"
#include "pbelab/common.hpp"
#include "pbelab/flatness.hpp"
#include "pbelab/io.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/projection.hpp"
#include "pbelab/report.hpp"
#include "pbelab/rng.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pbelab {

// One entry of a scenario's task list; `params` keeps the raw task object so
// each task type reads its own options.
struct ScenarioTask {
  std::string type;
  nlohmann::json params;
};

// A scenario bundles inputs (chain, features, optional test functions and
// weighting) with a task list. Reports never embed resolved paths, only the
// strings as written, so repeated runs are byte-identical.
struct Scenario {
  std::string name;
  uint64_t seed = 0;
  std::optional<FiniteMdp> mdp;
  std::optional<FeatureSet> features;
  std::optional<Matrix> psi_table;  // used exactly as given
  std::optional<Measure> mu_override;
  std::string mdp_path, features_path, psi_path;
  std::vector<ScenarioTask> tasks;
};

inline Scenario load_scenario(const std::filesystem::path& path) {
  const nlohmann::json j = load_json(path);
  const std::string context = path.string();
  detail::check_schema(j, "pbelab-scenario/1", context);
  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");

  Scenario sc;
  sc.name = detail::field(j, "name", context).get<std::string>();
  if (j.contains("seed")) {
    sc.seed = detail::field(j, "seed", context).get<uint64_t>();
  }
  if (j.contains("mdp")) {
    sc.mdp_path = j.at("mdp").get<std::string>();
    sc.mdp = load_mdp(base / sc.mdp_path);
  }
  if (j.contains("features")) {
    sc.features_path = j.at("features").get<std::string>();
    sc.features = load_features(base / sc.features_path);
  }
  if (j.contains("psi")) {
    sc.psi_path = j.at("psi").get<std::string>();
    sc.psi_table = load_basis_table(base / sc.psi_path);
  }
  if (sc.mdp) {
    if (j.contains("gamma")) sc.mdp->gamma = detail::number(j, "gamma", context);
    if (j.contains("lambda")) sc.mdp->lambda = detail::number(j, "lambda", context);
    sc.mdp->validate();
    if (j.contains("mu")) {
      sc.mu_override = Measure(detail::number_array(
          j.at("mu"), sc.mdp->n_states, context + ": mu"));
    }
  }
  const auto& tasks = detail::field(j, "tasks", context);
  if (!tasks.is_array() || tasks.empty()) {
    throw ValidationError(context + ": tasks must be a non-empty array");
  }
  for (size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    const std::string tctx = context + ": tasks[" + std::to_string(i) + "]";
    if (!t.is_object() || !t.contains("type") || !t.at("type").is_string()) {
      throw ValidationError(tctx + ": missing \"type\" string");
    }
    sc.tasks.push_back({t.at("type").get<std::string>(), t});
  }
  return sc;
}

namespace detail {

inline double param_number(const nlohmann::json& params, const char* name,
                           double fallback) {
  if (!params.contains(name)) return fallback;
  if (!params.at(name).is_number()) {
    throw ValidationError(std::string("task parameter \"") + name +
                          "\" must be a number");
  }
  return params.at(name).get<double>();
}

inline long param_integer(const nlohmann::json& params, const char* name,
                          long fallback) {
  if (!params.contains(name)) return fallback;
  if (!params.at(name).is_number_integer()) {
    throw ValidationError(std::string("task parameter \"") + name +
                          "\" must be an integer");
  }
  return params.at(name).get<long>();
}

inline std::string param_string(const nlohmann::json& params, const char* name,
                                const std::string& fallback) {
  if (!params.contains(name)) return fallback;
  if (!params.at(name).is_string()) {
    throw ValidationError(std::string("task parameter \"") + name +
                          "\" must be a string");
  }
  return params.at(name).get<std::string>();
}

constexpr int kElideStates = 64;

inline void state_vector_field(StructuredWriter& w, const std::string& name,
                               const Vector& v) {
  if (v.size() <= kElideStates) {
    w.field(name, v);
  } else {
    w.key(name + "_summary").begin_object();
    w.field("n", v.size());
    w.field("min", double(v.minCoeff()));
    w.field("max", double(v.maxCoeff()));
    w.field("norm", double(v.norm()));
    w.end_object();
  }
}

inline const FiniteMdp& need_mdp(const Scenario& sc, const char* task) {
  if (!sc.mdp) throw ValidationError(std::string(task) + ": scenario has no mdp");
  return *sc.mdp;
}

inline const FeatureSet& need_features(const Scenario& sc, const char* task) {
  if (!sc.features) {
    throw ValidationError(std::string(task) + ": scenario has no features");
  }
  return *sc.features;
}

struct ProjectionSetup {
  Measure mu;
  ProjectionBasis psi;
  std::string psi_source;  // "file" | "normalized-features" | "raw-features"
};

inline ProjectionSetup projection_setup(const Scenario& sc, const char* task) {
  const FiniteMdp& mdp = need_mdp(sc, task);
  const FeatureSet& phi = need_features(sc, task);
  ProjectionSetup setup;
  setup.mu = sc.mu_override ? *sc.mu_override : stationary_distribution(mdp);
  if (sc.psi_table) {
    setup.psi = ProjectionBasis(*sc.psi_table);
    setup.psi_source = "file";
  } else {
    try {
      setup.psi = normalize_basis(phi.table, setup.mu);
      setup.psi_source = "normalized-features";
    } catch (const ZeroMass&) {
      setup.psi = ProjectionBasis(phi.table);
      setup.psi_source = "raw-features";
    }
  }
  return setup;
}

inline void write_header(StructuredWriter& w, const Scenario& sc,
                         const std::string& task, uint64_t task_seed) {
  w.field("schema", "pbelab-report/1");
  w.field("scenario", sc.name);
  w.field("task", task);
  w.field("seed", static_cast<long>(task_seed));
  w.field("seed_scheme", "splitmix64(seed, stream)");
}

}  // namespace detail

// Artifacts of one executed task: report file names (relative to the output
// directory) paired with their contents.
struct TaskArtifacts {
  std::vector<std::pair<std::string, std::string>> files;
};

inline TaskArtifacts task_analyze(const Scenario& sc, const ScenarioTask& task,
                                  uint64_t task_seed, const std::string& stem) {
  const FiniteMdp& mdp = detail::need_mdp(sc, "analyze");
  const FeatureSet& phi = detail::need_features(sc, "analyze");
  const auto setup = detail::projection_setup(sc, "analyze");
  const ProjectedSystem sys = assemble_system(mdp, phi, setup.psi, setup.mu);
  const SolveReport solved = solve_system(sys);
  const auto adjoint = adjoint_image_dim_check(phi, setup.psi);

  StructuredWriter w;
  w.begin_object();
  detail::write_header(w, sc, "analyze", task_seed);
  w.field("n_states", mdp.n_states);
  w.field("k", phi.k);
  w.field("gamma", mdp.gamma);
  w.field("lambda", mdp.lambda);
  w.field("g_factor", g_factor(mdp.gamma, mdp.lambda));
  w.field("psi_source", setup.psi_source);
  detail::state_vector_field(w, "mu", setup.mu.weights);
  w.key("adjoint_image").begin_object();
  w.field("dim_features", adjoint.dim_phi);
  w.field("dim_test_functions", adjoint.dim_psi);
  w.field("classification", adjoint.classification);
  w.end_object();
  w.key("system").begin_object();
  w.field("A", sys.A);
  w.field("B", sys.B);
  w.field("b", sys.b);
  w.field("scale", sys.scale());
  w.field("psi_normalized", sys.psi_normalized);
  w.end_object();
  w.key("solve").begin_object();
  w.field("unique", solved.unique);
  w.field("generalized", solved.generalized);
  w.field("rank", solved.rank);
  w.field("w", solved.w);
  w.field("residual", solved.residual);
  if (solved.nullspace.cols() > 0) w.field("nullspace", solved.nullspace);
  w.end_object();
  w.field("bellman_error", bellman_error(mdp, phi, solved.w, setup.mu));
  if (solved.unique) {
    const Vector gap = phi.combination(solved.w) - exact_value(mdp);
    w.field("value_fit_error", mu_norm(gap, setup.mu));
  }
  w.end_object();

  TaskArtifacts out;
  out.files.emplace_back(stem + ".json", w.str());
  return out;
}

inline TaskArtifacts task_audit_features(const Scenario& sc,
                                         const ScenarioTask& task,
                                         uint64_t task_seed,
                                         const std::string& stem) {
  const FiniteMdp& mdp = detail::need_mdp(sc, "audit-features");
  const FeatureSet& phi = detail::need_features(sc, "audit-features");
  const Measure mu =
      sc.mu_override ? *sc.mu_override : stationary_distribution(mdp);

  FlatnessPolicy pol;
  pol.grid_cells = mdp.has_grid();
  DirectionSampler sampler;
  sampler.k = phi.k;
  sampler.random_count =
      static_cast<int>(detail::param_integer(task.params, "random_count", 256));
  sampler.seed = task_seed;
  const double alpha = detail::param_number(task.params, "alpha", 1.0);

  const FlatnessVerdict verdict = flatness_audit(phi, mu, sampler, alpha, pol);

  StructuredWriter w;
  w.begin_object();
  detail::write_header(w, sc, "audit-features", task_seed);
  w.field("n_states", mdp.n_states);
  w.field("k", phi.k);
  w.field("alpha", alpha);
  w.field("grid_cells", pol.grid_cells);
  w.field("all_flat", verdict.all_flat);
  w.field("certificate", verdict.certificate);
  if (!verdict.class_masses.empty()) {
    w.key("class_masses").begin_array();
    for (double m : verdict.class_masses) w.value(m);
    w.end_array();
  }
  w.field("directions_checked", verdict.reports.size());
  int first_violation = -1;
  for (size_t i = 0; i < verdict.reports.size(); ++i) {
    if (!verdict.reports[i].flat_max || !verdict.reports[i].flat_min) {
      first_violation = static_cast<int>(i);
      break;
    }
  }
  w.field("first_violation", first_violation);
  if (first_violation >= 0) {
    const auto& rep = verdict.reports[static_cast<size_t>(first_violation)];
    w.key("violating_direction").begin_object();
    w.field("direction", rep.direction);
    w.field("phi_max", rep.phi_max);
    w.field("phi_min", rep.phi_min);
    w.field("flat_max", rep.flat_max);
    w.field("flat_min", rep.flat_min);
    w.end_object();
  }
  w.end_object();

  TaskArtifacts out;
  out.files.emplace_back(stem + ".json", w.str());
  if (!verdict.reports.empty()) {
    CsvWriter csv({"direction", "phi_max", "phi_min", "mass_upper",
                   "mass_lower", "flat_max", "flat_min"});
    for (size_t i = 0; i < verdict.reports.size(); ++i) {
      const auto& rep = verdict.reports[i];
      csv.row(std::vector<std::string>{
          std::to_string(i), format_real(rep.phi_max), format_real(rep.phi_min),
          format_real(rep.mass_upper), format_real(rep.mass_lower),
          rep.flat_max ? "1" : "0", rep.flat_min ? "1" : "0"});
    }
    out.files.emplace_back(stem + ".csv", csv.str());
  }
  return out;
}

namespace detail {

inline void write_target_construction(StructuredWriter& w,
                                      const TargetConstruction& tc) {
  w.field("feasible", tc.feasible);
  w.field("range_upper_ok", tc.range_upper_ok);
  w.field("range_lower_ok", tc.range_lower_ok);
  w.field("upper_cut_active", tc.upper_cut_active);
  w.field("lower_cut_active", tc.lower_cut_active);
  w.field("phi_max", tc.phi_max);
  w.field("phi_min", tc.phi_min);
  w.field("f_max", tc.f_max);
  w.field("f_min", tc.f_min);
  w.field("mass_upper", tc.mass_upper);
  w.field("mass_lower", tc.mass_lower);
  w.field("mass_bound", tc.mass_bound);
  w.field("c_constant", tc.c_constant);
  w.field("moment_residual_max", double(tc.residual.cwiseAbs().maxCoeff()));
}

}  // namespace detail

// Ambiguity workflow: detect a null direction of the assembled system and
// instantiate two indistinguishable solutions along it. With
// {"synthesize": true, "direction": [...], "g": 0.99} the task instead
// builds the averaged target for that span direction, realizes it as a
// kernel (lambda = 0), and witnesses the ambiguity of the synthesized chain.
inline TaskArtifacts task_witness(const Scenario& sc, const ScenarioTask& task,
                                  uint64_t task_seed, const std::string& stem) {
  const FiniteMdp& base = detail::need_mdp(sc, "witness");
  const FeatureSet& phi = detail::need_features(sc, "witness");
  auto setup = detail::projection_setup(sc, "witness");
  const double xi = detail::param_number(task.params, "xi", 1.0);
  const bool synthesize = task.params.contains("synthesize") &&
                          task.params.at("synthesize").is_boolean() &&
                          task.params.at("synthesize").get<bool>();

  StructuredWriter w;
  w.begin_object();
  detail::write_header(w, sc, "witness", task_seed);
  w.field("xi", xi);
  w.field("psi_source", setup.psi_source);

  FiniteMdp subject = base;
  if (synthesize) {
    const double g = detail::param_number(task.params, "g",
                                          g_factor(base.gamma, base.lambda));
    Vector coeffs;
    if (task.params.contains("direction")) {
      coeffs = detail::number_array(task.params.at("direction"), phi.k,
                                    "witness: direction");
    } else {
      coeffs = Vector::Unit(phi.k, 0);
    }
    const Vector phi_dir = phi.combination(coeffs);
    const TargetConstruction tc = construct_target(
        phi_dir, setup.psi, setup.mu, g, base.widths_or_unit());
    w.field("g", g);
    w.field("direction", coeffs);
    w.key("construction").begin_object();
    detail::write_target_construction(w, tc);
    w.end_object();
    if (!tc.feasible) {
      w.field("ambiguous", false);
      w.field("note", "target construction infeasible for this direction");
      w.end_object();
      TaskArtifacts out;
      out.files.emplace_back(stem + ".json", w.str());
      return out;
    }
    subject = environment_from_target(tc.f, phi_dir, base);
  }

  const ProjectedSystem sys = assemble_system(subject, phi, setup.psi, setup.mu);
  const auto nullspace = detect_ambiguity(sys);
  w.field("ambiguous", nullspace.has_value());
  w.field("system_scale", sys.scale());
  if (!nullspace) {
    const SolveReport solved = solve_system(sys);
    w.field("rank", solved.rank);
    w.field("w", solved.w);
    w.end_object();
    TaskArtifacts out;
    out.files.emplace_back(stem + ".json", w.str());
    return out;
  }

  w.field("nullspace", *nullspace);
  const Vector v = nullspace->col(0);
  const AmbiguityWitness wit =
      witness_from_nullspace(subject, phi, setup.psi, setup.mu, v, xi);
  w.key("witness").begin_object();
  w.field("w_base", wit.base.w);
  w.field("w_alternate", wit.alternate.w);
  w.field("w_gap", wit.w_gap);
  w.field("max_abc_discrepancy", wit.max_abc_discrepancy);
  w.field("base_residual", wit.base_residual);
  w.field("alternate_residual", wit.alternate_residual);
  detail::state_vector_field(w, "base_reward", wit.base.reward);
  detail::state_vector_field(w, "alternate_reward", wit.alternate.reward);
  w.end_object();
  w.end_object();

  TaskArtifacts out;
  out.files.emplace_back(stem + ".json", w.str());
  return out;
}

inline TaskArtifacts task_simulate(const Scenario& sc, const ScenarioTask& task,
                                   uint64_t task_seed, const std::string& stem) {
  const FiniteMdp& mdp = detail::need_mdp(sc, "simulate");
  const FeatureSet& phi = detail::need_features(sc, "simulate");
  const std::string algorithm =
      detail::param_string(task.params, "algorithm", "expected-td");

  RunTrace trace;
  if (algorithm == "expected-td") {
    const auto setup = detail::projection_setup(sc, "simulate");
    trace = expected_td_lambda(
        mdp, phi, setup.psi, setup.mu,
        detail::param_number(task.params, "step", 0.0),
        detail::param_integer(task.params, "iters", 20000),
        detail::param_number(task.params, "tolerance", tol::run_converged),
        static_cast<int>(detail::param_integer(task.params, "stride", 10)));
  } else if (algorithm == "sampled-td") {
    StepSchedule schedule;
    schedule.base = detail::param_number(task.params, "step", 0.05);
    schedule.decay_horizon =
        detail::param_number(task.params, "decay_horizon", 0.0);
    trace = sampled_td_lambda(
        mdp, phi, detail::param_integer(task.params, "steps", 200000), schedule,
        static_cast<uint64_t>(
            detail::param_integer(task.params, "seed",
                                  static_cast<long>(task_seed))),
        detail::param_number(task.params, "tolerance", 1e-2));
  } else if (algorithm == "residual-gradient") {
    const Measure mu =
        sc.mu_override ? *sc.mu_override : stationary_distribution(mdp);
    trace = residual_gradient(
        mdp, phi, mu, detail::param_number(task.params, "step", 0.0),
        detail::param_integer(task.params, "iters", 50000),
        detail::param_number(task.params, "tolerance", tol::run_converged),
        static_cast<int>(detail::param_integer(task.params, "stride", 10)));
  } else if (algorithm == "representative-vi") {
    if (!task.params.contains("representatives")) {
      throw ValidationError("simulate: representative-vi needs \"representatives\"");
    }
    const Vector reps_raw =
        detail::number_array(task.params.at("representatives"), phi.k,
                             "simulate: representatives");
    std::vector<int> reps(static_cast<size_t>(phi.k));
    for (int i = 0; i < phi.k; ++i) reps[static_cast<size_t>(i)] = static_cast<int>(reps_raw(i));
    trace = representative_value_iteration(
        mdp, phi, reps, detail::param_integer(task.params, "iters", 10000),
        detail::param_number(task.params, "tolerance", tol::run_converged),
        static_cast<int>(detail::param_integer(task.params, "stride", 10)));
  } else {
    throw ValidationError("simulate: unknown algorithm \"" + algorithm + "\"");
  }

  StructuredWriter w;
  w.begin_object();
  detail::write_header(w, sc, "simulate", task_seed);
  w.field("algorithm", algorithm);
  w.field("gamma", mdp.gamma);
  w.field("lambda", mdp.lambda);
  w.field("verdict", verdict_name(trace.verdict));
  w.field("steps_taken", trace.steps_taken);
  w.field("step", trace.step);
  w.field("final_w", trace.final_w);
  if (trace.averaged_w.size() > 0) w.field("averaged_w", trace.averaged_w);
  if (trace.target) w.field("target", *trace.target);
  if (!trace.residuals.empty()) {
    w.field("final_residual", trace.residuals.back());
  }
  if (!trace.warnings.empty()) {
    w.key("warnings").begin_array();
    for (const auto& msg : trace.warnings) w.value(msg);
    w.end_array();
  }
  w.end_object();

  TaskArtifacts out;
  out.files.emplace_back(stem + ".json", w.str());

  std::vector<std::string> header{"iteration", "residual"};
  for (int i = 0; i < phi.k; ++i) header.push_back("w" + std::to_string(i));
  CsvWriter csv(header);
  for (size_t i = 0; i < trace.iterates.size(); ++i) {
    std::vector<std::string> cells{std::to_string(trace.recorded_at[i]),
                                   format_real(trace.residuals[i])};
    for (int c = 0; c < phi.k; ++c) {
      cells.push_back(format_real(trace.iterates[i](c)));
    }
    csv.row(cells);
  }
  out.files.emplace_back(stem + ".csv", csv.str());
  return out;
}

inline TaskArtifacts task_counterexample(const Scenario& sc,
                                         const ScenarioTask& task,
                                         uint64_t task_seed,
                                         const std::string& stem) {
  const double gamma = detail::param_number(
      task.params, "gamma", sc.mdp ? sc.mdp->gamma : 0.9);
  std::vector<double> lambdas{0.0, 0.5};
  if (task.params.contains("lambdas")) {
    const Vector lv = detail::number_array(task.params.at("lambdas"), -1,
                                           "counterexample: lambdas");
    lambdas.assign(lv.data(), lv.data() + lv.size());
  }

  StructuredWriter w;
  w.begin_object();
  detail::write_header(w, sc, "counterexample", task_seed);
  w.field("gamma", gamma);

  const CounterexamplePair pair = aliasing_pair(gamma, 0.0);
  w.field("mu_small", pair.mu1.weights);
  w.field("mu_large", pair.mu2.weights);
  const Vector w0_small = Vector::Zero(2);
  w.field("bellman_error_small", bellman_error(pair.mdp1, pair.phi1, w0_small, pair.mu1));
  w.field("bellman_error_large", bellman_error(pair.mdp2, pair.phi2, w0_small, pair.mu2));

  w.key("systems").begin_array();
  for (double lambda : lambdas) {
    const CounterexamplePair p = aliasing_pair(gamma, lambda);
    const ProjectedSystem s1 = assemble_system(p.mdp1, p.phi1, p.psi1, p.mu1);
    const ProjectedSystem s2 = assemble_system(p.mdp2, p.phi2, p.psi2, p.mu2);
    const double gap = std::max({(s1.A - s2.A).cwiseAbs().maxCoeff(),
                                 (s1.B - s2.B).cwiseAbs().maxCoeff(),
                                 (s1.b - s2.b).cwiseAbs().maxCoeff()});
    w.begin_object();
    w.field("lambda", lambda);
    w.field("A", s1.A);
    w.field("B", s1.B);
    w.field("b", s1.b);
    w.field("max_discrepancy", gap);
    w.end_object();
  }
  w.end_array();
  w.end_object();

  TaskArtifacts out;
  out.files.emplace_back(stem + ".json", w.str());
  return out;
}

inline TaskArtifacts run_task(const Scenario& sc, const ScenarioTask& task,
                              uint64_t task_seed, const std::string& stem) {
  if (task.type == "analyze") return task_analyze(sc, task, task_seed, stem);
  if (task.type == "audit-features") {
    return task_audit_features(sc, task, task_seed, stem);
  }
  if (task.type == "witness") return task_witness(sc, task, task_seed, stem);
  if (task.type == "simulate") return task_simulate(sc, task, task_seed, stem);
  if (task.type == "counterexample") {
    return task_counterexample(sc, task, task_seed, stem);
  }
  throw ValidationError("unknown task type \"" + task.type + "\"");
}

// 0 = all tasks completed; 2 = an input was rejected; 3 = a computation
// failed (singular where uniqueness was required, non-convergence, ...).
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const DimensionMismatch*>(&e) ||
      dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const UnsupportedLambda*>(&e) ||
      dynamic_cast<const InvalidSplit*>(&e) ||
      dynamic_cast<const IoError*>(&e)) {
    return 2;
  }
  return 3;
}

// Executes every task, writing NN_type.{json,csv} plus summary.json under
// out_dir. Task i draws its randomness from stream i of the scenario seed.
// A failing task records its error and the run continues.
inline int run_scenario(const Scenario& sc, const std::filesystem::path& out_dir,
                        std::vector<std::string>* written = nullptr) {
  int exit_code = 0;
  StructuredWriter summary;
  summary.begin_object();
  summary.field("schema", "pbelab-summary/1");
  summary.field("scenario", sc.name);
  summary.field("seed", static_cast<long>(sc.seed));
  summary.field("seed_scheme", "splitmix64(seed, stream)");
  if (!sc.mdp_path.empty()) summary.field("mdp", sc.mdp_path);
  if (!sc.features_path.empty()) summary.field("features", sc.features_path);
  if (!sc.psi_path.empty()) summary.field("psi", sc.psi_path);
  summary.key("tasks").begin_array();

  for (size_t i = 0; i < sc.tasks.size(); ++i) {
    const auto& task = sc.tasks[i];
    const uint64_t task_seed = derive_stream(sc.seed, i);
    char stem_buf[32];
    std::snprintf(stem_buf, sizeof stem_buf, "%02zu_%s", i, task.type.c_str());
    const std::string stem = stem_buf;

    summary.begin_object();
    summary.field("index", i);
    summary.field("type", task.type);
    try {
      const TaskArtifacts artifacts = run_task(sc, task, task_seed, stem);
      summary.key("files").begin_array();
      for (const auto& [name, content] : artifacts.files) {
        write_text_file(out_dir / name, content);
        if (written) written->push_back(name);
        summary.value(name);
      }
      summary.end_array();
      summary.field("status", "ok");
    } catch (const std::exception& e) {
      summary.field("status", "error");
      summary.field("error", std::string(e.what()));
      exit_code = std::max(exit_code, exit_code_for(e));
    }
    summary.end_object();
  }
  summary.end_array();
  summary.end_object();
  write_text_file(out_dir / "summary.json", summary.str());
  if (written) written->push_back("summary.json");
  return exit_code;
}

}  // namespace pbelab
