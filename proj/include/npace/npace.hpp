#pragma once

// Per-step mutual intent estimation. Every agent solves its own game at
// (own true intent, estimate of the peer), acts, then predicts both agents'
// actions with a centralized solve at the pair of estimates it tracks and
// updates both: its belief about the peer and its model of the peer's belief
// about itself. The expert-peer baseline differs only in putting its own
// true intent into that predictive solve.

#include "npace/game_core.hpp"
#include "npace/ilq_game.hpp"
#include "npace/intent_comm.hpp"
#include "npace/intent_learning.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace npace {

enum class Method { kComplete, kExpert, kNpace, kNpaceComm, kMinmax, kMpc };

std::string to_string(Method method);
// Accepts "npace-comm" and "npace_comm".
Method method_from_string(const std::string& name);

// What agent k knows: its belief about the peer's intent and its model of
// the peer's belief about its own intent.
struct AgentLedger {
  GaussianBelief peer;
  GaussianBelief self_model;
};

struct EstimatorState {
  std::array<AgentLedger, kNumAgents> agents;

  // Both ledgers start from the same (estimate, variance) pairs; agent k's
  // belief about the peer is initial_estimates[other(k)] with variance
  // prior_variance[other(k)].
  static EstimatorState shared(const IntentPair& initial_estimates,
                               const std::array<double, kNumAgents>& prior_variance,
                               double action_noise_std);

  // The (theta^0, theta^1) estimate pair as tracked by `agent`.
  IntentPair tracked_pair(int agent) const;
};

struct StepRecord {
  int t = 0;
  Vector state;
  std::array<Vector, kNumAgents> actions;
  // Agent k's estimate of the peer's intent after this step's update (empty
  // for estimation-free methods) and the diagonal of its covariance.
  std::array<Vector, kNumAgents> estimates;
  std::array<Vector, kNumAgents> variances;
  // Stage cost of each agent at (state, actions) under the true intents.
  std::array<double, kNumAgents> stage_costs{};
  // Agent index 1's policy solve, and the whole estimation phase.
  double control_ms = 0.0;
  double estimation_ms = 0.0;
  // Teaching optimizer fell back to the nominal action for some agent.
  bool teaching_fallback = false;
  // MPC baseline: some agent's solve failed and it replayed its previous plan.
  bool plan_fallback = false;
};

struct NpaceOptions {
  Method method = Method::kNpace;
  IlqOptions ilq;
  JacobianOptions jacobian;
  LearnerConfig learner;
  TeachingConfig teaching;
  std::array<std::optional<IntentBox>, kNumAgents> intent_bounds;
};

// Previous-step policies per solve role, already shifted by one step.
struct WarmStarts {
  std::array<std::optional<PolicyPair>, kNumAgents> ego;
  std::array<std::optional<PolicyPair>, kNumAgents> predictive;
};

struct StepResult {
  std::array<Vector, kNumAgents> actions;
  EstimatorState next;
  StepRecord record;
};

// One receding-horizon step at wall-clock index t of `spec` (solved over the
// remaining T - t steps). Handles complete, expert, npace and npace_comm.
// `noise`, when given, is added to the applied actions before anyone
// observes them. Solver failures are rethrown as SolverError naming the
// agent and role.
StepResult npace_step(const GameSpec& spec, const Vector& state, int t,
                      const IntentPair& truth, const EstimatorState& est,
                      const NpaceOptions& options, WarmStarts* warm = nullptr,
                      const std::array<Vector, kNumAgents>* noise = nullptr);

// npace_step with method = expert.
StepResult expert_step(const GameSpec& spec, const Vector& state, int t,
                       const IntentPair& truth, const EstimatorState& est,
                       NpaceOptions options, WarmStarts* warm = nullptr);

}  // namespace npace
