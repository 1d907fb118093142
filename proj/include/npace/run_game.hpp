#pragma once

// Receding-horizon simulation of one scenario instance under one method.

#include "npace/baselines.hpp"
#include "npace/npace.hpp"
#include "npace/scenarios.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace npace {

struct RunOptions {
  Method method = Method::kNpace;
  // ilq, jacobian, learner, teaching (eta). Intent bounds come from the
  // scenario config.
  NpaceOptions npace;
  MinMaxConfig minmax;
  EkfConfig ekf;
  // Standard deviation of Gaussian noise injected into applied actions;
  // 0 keeps actions noiseless.
  double injected_noise_std = 0.0;
  unsigned long long seed = 0;
  // Replaces the shared initial ledgers (misspecified-peer experiments).
  std::optional<EstimatorState> initial_estimator;
};

struct RunMetrics {
  bool collision = false;
  double min_distance = std::numeric_limits<double>::quiet_NaN();
  // NaN when the agent never crosses.
  std::array<double, kNumAgents> crossing_time{
      std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  std::array<double, kNumAgents> total_cost{};
  double control_effort = 0.0;
  Vector final_state;
  // Lander variants: distance of the final position to the goal.
  double landing_error = std::numeric_limits<double>::quiet_NaN();
  // e_t = ||theta_hat - theta||^2 per agent (agent k's estimate of the
  // peer) after each step; empty for estimation-free methods.
  std::array<std::vector<double>, kNumAgents> estimation_error;
  // log(1 + mean over steps and agents of e_t); NaN without estimates.
  double log_mse = std::numeric_limits<double>::quiet_NaN();
  // Final ||theta_hat - theta|| per agent.
  std::array<double, kNumAgents> final_error{
      std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};

  bool operator==(const RunMetrics& rhs) const;
};

struct RunLog {
  ScenarioConfig config;
  Method method = Method::kNpace;
  double eta = 0.0;
  unsigned long long seed = 0;
  // Set when the run started from replaced ledgers.
  std::optional<EstimatorState> initial_estimator;
  std::vector<StepRecord> steps;
  Vector final_state;
  bool failed = false;
  std::string error;
  RunMetrics metrics;
};

RunLog run_game(const ScenarioConfig& config, const RunOptions& options);

// Metrics recomputed from the step records. Throws ContractError for a log
// whose steps are missing or inconsistent with its scenario.
RunMetrics compute_metrics(const RunLog& log);

}  // namespace npace
