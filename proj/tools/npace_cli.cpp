#include "npace/harness.hpp"
#include "npace/ilq_game.hpp"
#include "npace/npace.hpp"
#include "npace/run_game.hpp"
#include "npace/scenarios.hpp"

#include "CLI11.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace npace;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

ExperimentConfig load_or_default(const std::string& scenario, const std::string& config) {
  if (config.empty()) return ExperimentConfig::defaults(scenario_from_string(scenario));
  ExperimentConfig c = load_experiment(config);
  if (!scenario.empty() && c.scenario.id != scenario_from_string(scenario))
    throw ContractError("config file is for scenario " + to_string(c.scenario.id));
  return c;
}

void print_metrics(const RunLog& log) {
  const RunMetrics& m = log.metrics;
  std::printf("method %s  steps %zu  %s\n", to_string(log.method).c_str(), log.steps.size(),
              log.failed ? ("FAILED: " + log.error).c_str() : "ok");
  std::printf("collision %d  min_distance %.4f  control_effort %.4f\n", m.collision ? 1 : 0,
              m.min_distance, m.control_effort);
  std::printf("crossing_time %.3f %.3f  landing_error %.4f\n", m.crossing_time[0],
              m.crossing_time[1], m.landing_error);
  std::printf("final_error %.6g %.6g  log_mse %.6g\n", m.final_error[0], m.final_error[1],
              m.log_mse);
}

int simulate(const std::string& scenario, const std::string& method, double eta,
             unsigned long long seed, const std::string& config, const std::string& out) {
  ExperimentConfig c = load_or_default(scenario, config);
  if (!method.empty()) c.options.method = method_from_string(method);
  if (eta >= 0.0) c.options.npace.teaching.eta = eta;
  c.options.seed = seed;
  const RunLog log = run_game(c.scenario, c.options);
  if (!out.empty()) {
    std::string stem = to_string(log.method);
    if (log.method == Method::kNpaceComm) {
      char eta_text[32];
      std::snprintf(eta_text, sizeof eta_text, "_eta%g", c.options.npace.teaching.eta);
      stem += eta_text;
    }
    save_run(log, out, stem);
    std::printf("wrote %s\n", (fs::path(out) / (stem + ".csv")).c_str());
  }
  print_metrics(log);
  return log.failed ? 1 : 0;
}

int montecarlo(const std::string& scenario, const std::string& config, int runs,
               const std::string& methods, const std::string& etas, unsigned long long seed,
               const std::string& out, int threads) {
  MonteCarloSpec spec;
  spec.base = load_or_default(scenario, config);
  spec.runs = runs;
  spec.seed = seed;
  spec.out_dir = out;
  spec.threads = threads;
  std::vector<double> eta_list;
  for (const std::string& e : split(etas)) eta_list.push_back(std::stod(e));
  if (eta_list.empty()) eta_list.push_back(spec.base.options.npace.teaching.eta);
  for (const std::string& name : split(methods)) {
    const Method m = method_from_string(name);
    if (m == Method::kNpaceComm)
      for (double eta : eta_list) spec.methods.push_back({m, eta});
    else
      spec.methods.push_back({m, 0.0});
  }
  const MonteCarloResult result = run_montecarlo(spec);
  std::printf("%-18s %8s %6s %6s %10s %16s %12s\n", "method", "samples", "coll", "fail",
              "effort", "crossing", "final_err");
  for (const MethodSummary& s : result.summary.methods)
    std::printf("%-18s %4d/%-3d %6d %6d %10.4f %8.3f+-%-6.3f %12.5g\n", s.variant.label().c_str(),
                s.samples, s.requested, s.collisions, s.hard_failures, s.control_effort_mean,
                s.crossing_mean, s.crossing_std, s.final_error_mean);
  if (!out.empty()) std::printf("wrote %s\n", (fs::path(out) / "summary.json").c_str());
  return 0;
}

int benchmark(const std::string& scenario, const std::string& config, const std::string& method,
              int runs, unsigned long long seed) {
  ExperimentConfig c = load_or_default(scenario, config);
  c.options.method = method_from_string(method);
  const TimingTable t = benchmark_timing(c, runs, seed);
  std::printf("%-12s %10s %10s %8s\n", "phase", "median_ms", "p95_ms", "steps");
  const auto row = [](const char* name, const TimingStats& s) {
    std::printf("%-12s %10.3f %10.3f %8d\n", name, s.median, s.p95, s.count);
  };
  row("control", t.control);
  row("estimation", t.estimation);
  row("total", t.total);
  return 0;
}

// Invariants on the nominal case-study games: the solver converges to a
// trajectory that its own policies reproduce, npace keeps one shared ledger
// whose covariance never grows, and sampled configs are reproducible.
int check() {
  int failures = 0;
  const auto report = [&](bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", what.c_str());
    failures += !ok;
  };
  IlqOptions cold;
  cold.max_iterations = 200;
  for (ScenarioId id : {ScenarioId::kLunarLander, ScenarioId::kLaneMerge,
                        ScenarioId::kIntersection, ScenarioId::kLinearLander}) {
    const std::string name = to_string(id);
    try {
      const ScenarioConfig cfg = ScenarioConfig::defaults(id);
      const GameSpec spec = make_scenario(cfg);
      const IlqSolution sol = solve_ilq(spec, cfg.initial_state, cfg.true_intents, cold);
      report(sol.converged, name + ": nominal game converges");
      const Trajectory again = rollout(spec, cfg.initial_state, sol.policies);
      report(max_state_change(again, sol.trajectory) <= 1e-9,
             name + ": policies reproduce the equilibrium trajectory");

      NpaceOptions options;
      options.intent_bounds = cfg.intent_bounds;
      EstimatorState est =
          EstimatorState::shared(cfg.initial_estimates, cfg.prior_variance, cfg.action_noise_std);
      WarmStarts warm;
      Vector s = cfg.initial_state;
      bool shared = true, shrinking = true;
      for (int t = 0; t < 5; ++t) {
        const StepResult r = npace_step(spec, s, t, cfg.true_intents, est, options, &warm);
        shared = shared && r.next.tracked_pair(0) == r.next.tracked_pair(1);
        for (int k = 0; k < kNumAgents; ++k) {
          const Eigen::SelfAdjointEigenSolver<Matrix> eig(
              est.agents[k].peer.covariance - r.next.agents[k].peer.covariance);
          shrinking = shrinking && eig.eigenvalues().minCoeff() >= -1e-12;
        }
        s = spec.step(s, r.actions[0], r.actions[1]);
        est = r.next;
      }
      report(shared, name + ": npace ledgers identical over 5 steps");
      report(shrinking, name + ": belief covariance non-increasing over 5 steps");

      const auto a = draw_samples(cfg, 5, 1), b = draw_samples(cfg, 5, 1);
      bool same = true;
      for (std::size_t i = 0; i < a.size(); ++i)
        same = same && a[i].seed == b[i].seed &&
               a[i].config.true_intents == b[i].config.true_intents &&
               a[i].config.initial_estimates == b[i].config.initial_estimates;
      report(same, name + ": samples reproducible from the seed");
    } catch (const std::exception& e) {
      report(false, name + ": " + e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"N-PACE game-theoretic intent estimation toolkit"};
  app.require_subcommand(1);

  std::string scenario, method, config, out, methods = "npace", etas;
  double eta = -1.0;
  unsigned long long seed = 0;
  int runs = 10, threads = 0;

  CLI::App* sim = app.add_subcommand("simulate", "run one scenario instance");
  sim->add_option("scenario", scenario, "lunar_lander | lane_merge | intersection | linear_lander")
      ->required();
  sim->add_option("--method", method,
                 "complete | expert | npace | npace-comm | minmax | mpc (default: config's)");
  sim->add_option("--eta", eta, "teaching weight for npace-comm");
  sim->add_option("--seed", seed);
  sim->add_option("--config", config, "JSON experiment config");
  sim->add_option("--out", out, "directory for the run CSV and JSON");

  CLI::App* mc = app.add_subcommand("montecarlo", "paired Monte Carlo sweep");
  mc->add_option("scenario", scenario)->required();
  mc->add_option("--runs", runs)->required();
  mc->add_option("--methods", methods, "comma-separated method list")->required();
  mc->add_option("--eta-list", etas, "comma-separated eta values for npace-comm");
  mc->add_option("--seed", seed)->required();
  mc->add_option("--out", out)->required();
  mc->add_option("--config", config);
  mc->add_option("--threads", threads, "worker threads (0: all cores)");

  CLI::App* bench = app.add_subcommand("benchmark", "per-step timing statistics");
  bench->add_option("scenario", scenario)->required();
  bench->add_option("--method", method)->required();
  bench->add_option("--runs", runs)->required();
  bench->add_option("--seed", seed);
  bench->add_option("--config", config);

  CLI::App* chk = app.add_subcommand("check", "solver and estimator invariants");

  CLI::App* defaults = app.add_subcommand("defaults", "write a scenario's full default config");
  defaults->add_option("scenario", scenario)->required();
  defaults->add_option("--out", out, "JSON file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return simulate(scenario, method, eta, seed, config, out);
    if (*mc) return montecarlo(scenario, config, runs, methods, etas, seed, out, threads);
    if (*bench) return benchmark(scenario, config, method, runs, seed);
    if (*chk) return check();
    if (*defaults) {
      const ExperimentConfig c = ExperimentConfig::defaults(scenario_from_string(scenario));
      if (out.empty())
        std::cout << to_json(c).dump(2) << "\n";
      else
        save_experiment(c, out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
