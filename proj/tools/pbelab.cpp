// Command-line front end: one-shot analyses of a chain + feature bundle, or
// full scenario execution with structured reports on disk.

#include <pbelab/scenario.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

struct CommonInputs {
  std::string mdp_path;
  std::string features_path;
  std::string psi_path;
  double gamma = -1.0;   // < 0 = keep the file's value
  double lambda = -1.0;
  uint64_t seed = 0;
  std::string out;
  std::string format = "structured";
};

void add_common(CLI::App* cmd, CommonInputs& in, bool needs_mdp) {
  auto* mdp = cmd->add_option("--mdp", in.mdp_path, "chain file (pbelab-mdp/1)");
  auto* feat = cmd->add_option("--features", in.features_path,
                               "feature file (pbelab-features/1)");
  if (needs_mdp) {
    mdp->required();
    feat->required();
  }
  cmd->add_option("--psi", in.psi_path,
                  "test-function file (default: mu-normalized features)");
  cmd->add_option("--gamma", in.gamma, "override discount");
  cmd->add_option("--lambda", in.lambda, "override trace decay");
  cmd->add_option("--seed", in.seed, "base seed (streams derive from it)");
  cmd->add_option("--out", in.out, "write reports into this directory");
  cmd->add_option("--format", in.format, "stdout format: structured | csv")
      ->check(CLI::IsMember({"structured", "csv"}));
}

pbelab::Scenario make_scenario(const CommonInputs& in, const char* name) {
  pbelab::Scenario sc;
  sc.name = name;
  sc.seed = in.seed;
  if (!in.mdp_path.empty()) {
    sc.mdp_path = in.mdp_path;
    sc.mdp = pbelab::load_mdp(in.mdp_path);
    if (in.gamma >= 0.0) sc.mdp->gamma = in.gamma;
    if (in.lambda >= 0.0) sc.mdp->lambda = in.lambda;
    sc.mdp->validate();
  }
  if (!in.features_path.empty()) {
    sc.features_path = in.features_path;
    sc.features = pbelab::load_features(in.features_path);
  }
  if (!in.psi_path.empty()) {
    sc.psi_path = in.psi_path;
    sc.psi_table = pbelab::load_basis_table(in.psi_path);
  }
  return sc;
}

int emit(const pbelab::TaskArtifacts& artifacts, const CommonInputs& in) {
  if (!in.out.empty()) {
    for (const auto& [name, content] : artifacts.files) {
      pbelab::write_text_file(std::filesystem::path(in.out) / name, content);
      std::cout << (std::filesystem::path(in.out) / name).string() << "\n";
    }
    return 0;
  }
  const std::string want = in.format == "csv" ? ".csv" : ".json";
  for (const auto& [name, content] : artifacts.files) {
    if (name.size() >= want.size() &&
        name.compare(name.size() - want.size(), want.size(), want) == 0) {
      std::cout << content;
      return 0;
    }
  }
  std::cerr << "no " << in.format << " artifact produced by this task\n";
  return 2;
}

int run_one(const CommonInputs& in, const std::string& type,
            nlohmann::json params) {
  const pbelab::Scenario sc = make_scenario(in, type.c_str());
  params["type"] = type;
  const pbelab::ScenarioTask task{type, params};
  const auto artifacts =
      pbelab::run_task(sc, task, pbelab::derive_stream(in.seed, 0), "00_" + type);
  return emit(artifacts, in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pbelab: projected fixed-point laboratory for linearly parameterized "
      "value functions"};
  app.require_subcommand(1);

  // run
  std::string scenario_path, run_out;
  auto* cmd_run = app.add_subcommand("run", "execute a scenario's task list");
  cmd_run->add_option("--scenario", scenario_path, "scenario file")->required();
  cmd_run->add_option("--out", run_out, "output directory")->required();

  // analyze
  CommonInputs in_analyze;
  auto* cmd_analyze =
      app.add_subcommand("analyze", "assemble and solve the projected system");
  add_common(cmd_analyze, in_analyze, true);

  // audit-features
  CommonInputs in_audit;
  long audit_count = 256;
  double audit_alpha = 1.0;
  auto* cmd_audit = app.add_subcommand(
      "audit-features", "check flat extrema across the feature span");
  add_common(cmd_audit, in_audit, true);
  cmd_audit->add_option("--random-count", audit_count,
                        "random directions on top of the deterministic ones");
  cmd_audit->add_option("--alpha", audit_alpha, "level-set threshold in [0,1]");

  // witness
  CommonInputs in_witness;
  double witness_xi = 1.0;
  double witness_g = -1.0;
  bool witness_synthesize = false;
  std::vector<double> witness_direction;
  auto* cmd_witness = app.add_subcommand(
      "witness", "detect ambiguity and build indistinguishable solutions");
  add_common(cmd_witness, in_witness, true);
  cmd_witness->add_option("--xi", witness_xi, "gap size along the null direction");
  cmd_witness->add_flag("--synthesize", witness_synthesize,
                        "build a singular chain from an averaged target first");
  cmd_witness->add_option("--g", witness_g,
                          "contraction factor for --synthesize");
  cmd_witness->add_option("--direction", witness_direction,
                          "span coefficients for --synthesize");

  // simulate
  CommonInputs in_sim;
  std::string sim_algorithm = "expected-td";
  long sim_iters = -1;
  double sim_step = 0.0;
  double sim_tol = -1.0;
  std::vector<long> sim_reps;
  auto* cmd_sim =
      app.add_subcommand("simulate", "iterate a solver and trace the weights");
  add_common(cmd_sim, in_sim, true);
  cmd_sim
      ->add_option("--algorithm", sim_algorithm,
                   "expected-td | sampled-td | residual-gradient | "
                   "representative-vi")
      ->check(CLI::IsMember({"expected-td", "sampled-td", "residual-gradient",
                             "representative-vi"}));
  double sim_decay = 0.0;
  cmd_sim->add_option("--iters", sim_iters, "iteration / step budget");
  cmd_sim->add_option("--step", sim_step, "step size (0 = auto)");
  cmd_sim->add_option("--decay-horizon", sim_decay,
                      "sampled-td step decays as base/(1 + t/horizon); 0 = "
                      "constant");
  cmd_sim->add_option("--tol", sim_tol, "convergence tolerance");
  cmd_sim->add_option("--representatives", sim_reps,
                      "representative states (representative-vi)");

  // counterexample (--gamma arrives via the common options; the task falls
  // back to 0.9 when it is left unset)
  CommonInputs in_pair;
  std::vector<double> pair_lambdas;
  auto* cmd_pair = app.add_subcommand(
      "counterexample",
      "two chains, one projected system: the classic aliasing pair");
  add_common(cmd_pair, in_pair, false);
  cmd_pair->add_option("--lambdas", pair_lambdas, "trace decays to compare");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      const pbelab::Scenario sc = pbelab::load_scenario(scenario_path);
      std::vector<std::string> written;
      const int code = pbelab::run_scenario(sc, run_out, &written);
      for (const auto& name : written) {
        std::cout << (std::filesystem::path(run_out) / name).string() << "\n";
      }
      return code;
    }
    if (cmd_analyze->parsed()) {
      return run_one(in_analyze, "analyze", nlohmann::json::object());
    }
    if (cmd_audit->parsed()) {
      nlohmann::json params;
      params["random_count"] = audit_count;
      params["alpha"] = audit_alpha;
      return run_one(in_audit, "audit-features", params);
    }
    if (cmd_witness->parsed()) {
      nlohmann::json params;
      params["xi"] = witness_xi;
      if (witness_synthesize) params["synthesize"] = true;
      if (witness_g >= 0.0) params["g"] = witness_g;
      if (!witness_direction.empty()) params["direction"] = witness_direction;
      return run_one(in_witness, "witness", params);
    }
    if (cmd_sim->parsed()) {
      nlohmann::json params;
      params["algorithm"] = sim_algorithm;
      if (sim_iters >= 0) {
        params["iters"] = sim_iters;
        params["steps"] = sim_iters;
      }
      if (sim_step > 0.0) params["step"] = sim_step;
      if (sim_decay > 0.0) params["decay_horizon"] = sim_decay;
      if (sim_tol >= 0.0) params["tolerance"] = sim_tol;
      if (!sim_reps.empty()) params["representatives"] = sim_reps;
      if (in_sim.seed != 0) params["seed"] = in_sim.seed;
      return run_one(in_sim, "simulate", params);
    }
    if (cmd_pair->parsed()) {
      nlohmann::json params;
      if (in_pair.gamma >= 0.0) params["gamma"] = in_pair.gamma;
      if (!pair_lambdas.empty()) params["lambdas"] = pair_lambdas;
      return run_one(in_pair, "counterexample", params);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pbelab::exit_code_for(e);
  }
  return 0;
}
