#pragma once

// Experiment plumbing: config files, per-run CSV logs, Monte Carlo sweeps
// with paired samples, summaries, and timing benchmarks.

#include "npace/run_game.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace npace {

// A scenario config plus every solver/learner/baseline option. The file
// format is JSON with two optional objects, "scenario" and "options";
// missing keys keep the scenario's defaults.
struct ExperimentConfig {
  ScenarioConfig scenario;
  RunOptions options;

  static ExperimentConfig defaults(ScenarioId id);
};

nlohmann::json to_json(const ExperimentConfig& config);
// Throws ContractError on unknown scenario/method names, wrong vector sizes,
// or values rejected by validate().
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
void save_experiment(const ExperimentConfig& config, const std::filesystem::path& path);

// Per-run files: <stem>.csv holds one row per step, <stem>.json the config
// snapshot, method, seed, final state and failure status.
std::vector<std::string> csv_header(const ScenarioConfig& config);
void write_run_csv(const RunLog& log, std::ostream& out);
void save_run(const RunLog& log, const std::filesystem::path& dir, const std::string& stem);
// Rebuilds the log (metrics recomputed from the rows).
RunLog load_run(const std::filesystem::path& dir, const std::string& stem);

// One column of a Monte Carlo table: a method, and eta for npace_comm.
struct MethodVariant {
  Method method = Method::kNpace;
  double eta = 0.0;

  std::string label() const;
  bool operator==(const MethodVariant&) const = default;
};

struct MethodSummary {
  MethodVariant variant;
  int requested = 0;
  // Runs that completed; failure statistics below are over these.
  int samples = 0;
  int hard_failures = 0;
  int collisions = 0;
  double failure_rate = 0.0;
  double control_effort_mean = 0.0;
  // Over agents that crossed, pooled across runs.
  double crossing_mean = 0.0;
  double crossing_std = 0.0;
  int crossings = 0;
  // Mean over runs of the per-run mean final ||theta_hat - theta||.
  double final_error_mean = 0.0;
  double final_error_median = 0.0;
  double log_mse_mean = 0.0;
  double landing_error_mean = 0.0;
};

struct McSummary {
  ScenarioId scenario = ScenarioId::kIntersection;
  int runs = 0;
  unsigned long long seed = 0;
  std::vector<MethodSummary> methods;

  const MethodSummary& at(const MethodVariant& variant) const;
};

nlohmann::json to_json(const McSummary& summary);
McSummary summary_from_json(const nlohmann::json& j);

// NaN statistics when no run contributes.
MethodSummary summarize(const MethodVariant& variant, int requested,
                        const std::vector<RunLog>& logs);

// Shared ledgers from `config`, except that agent k's model of the peer's
// belief about it starts at (self_means[k], self_variances[k] I). The peer's
// actual beliefs keep the config's initial estimates and variances.
EstimatorState misspecified_estimator(const ScenarioConfig& config, const IntentPair& self_means,
                                      const std::array<double, kNumAgents>& self_variances);

// Per-run variations of the base config. Intersection: true aggressiveness
// pairs uniform over the intent box. Lane merge: each agent's model of the
// peer's initial estimate of it uniform within +-70% of 100, the actual
// estimates unchanged. Landers: no variation. Every sample also carries a
// run seed for injected noise.
struct RunSample {
  ScenarioConfig config;
  unsigned long long seed = 0;
  std::optional<EstimatorState> initial_estimator;
};
std::vector<RunSample> draw_samples(const ScenarioConfig& base, int runs,
                                    unsigned long long seed);

struct MonteCarloSpec {
  ExperimentConfig base;
  std::vector<MethodVariant> methods;
  int runs = 1;
  unsigned long long seed = 0;
  // Where run files and summary.json go; empty writes nothing.
  std::filesystem::path out_dir;
  // 0 picks std::thread::hardware_concurrency().
  int threads = 0;
};

struct MonteCarloResult {
  McSummary summary;
  // logs[method][run], in the order of spec.methods and the sample list.
  std::vector<std::vector<RunLog>> logs;
};

MonteCarloResult run_montecarlo(const MonteCarloSpec& spec);

// Rebuilds the summary from the run files a sweep wrote into `dir`.
McSummary summarize_directory(const std::filesystem::path& dir);

struct TimingStats {
  double median = 0.0;
  double p95 = 0.0;
  int count = 0;
};
// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);
TimingStats timing_stats(const std::vector<double>& values);

struct TimingTable {
  TimingStats control;
  TimingStats estimation;
  TimingStats total;
};

// Runs `runs` sampled instances and collects per-step timings.
TimingTable benchmark_timing(const ExperimentConfig& config, int runs,
                             unsigned long long seed);

}  // namespace npace
