#pragma once

// Intent communication: the ego picks its current action to trade its own
// one-step cost-to-go against how close the peer's next estimate of the ego's
// intent lands to the truth, with the peer's update simulated one step ahead.

#include "npace/game_core.hpp"
#include "npace/ilq_game.hpp"
#include "npace/intent_learning.hpp"

#include <optional>

namespace npace {

struct TeachingConfig {
  double eta = 0.0;
  int max_steps = 25;
  // Central finite-difference step in action space.
  double fd_step = 1e-4;
  // Box half-width around the nominal action.
  double trust_region = 2.0;
  // Projected-gradient norm below which the search counts as stationary.
  double stationarity_tolerance = 1e-7;

  void validate() const;
};

// Everything the one-step teaching problem of agent `ego` depends on.
struct TeachingProblem {
  int ego = 0;
  Vector nominal;
  // Curvature of the ego's one-step quadratic cost-to-go in its own action,
  // R^{kk} + B^k' Z_{t+1} B^k, from the local game around its solution.
  Matrix cost_hessian;
  // The peer's belief about the ego's intent and how the peer updates it.
  GaussianBelief peer_belief_of_self;
  LearnerConfig peer_learner;
  std::optional<IntentBox> clamp;
  // Peer's prediction of the ego action and its sensitivity to the ego intent.
  Vector predicted;
  PolicyJacobian jacobian;
  Vector true_intent;
};

// Nominal action and cost curvature come from the ego's own solution; the
// prediction and Jacobian from the peer's predictive solve.
TeachingProblem make_teaching_problem(int ego, const IlqSolution& ego_solution,
                                      const GaussianBelief& peer_belief_of_self,
                                      const LearnerConfig& peer_learner,
                                      const std::optional<IntentBox>& clamp,
                                      const Vector& predicted,
                                      const PolicyJacobian& jacobian,
                                      const Vector& true_intent);

// ||theta_hat'(a) - theta||^2 after the peer's simulated update with the
// ego action a.
double teaching_error(const TeachingProblem& problem, const Vector& action);

// 1/2 (a - a_nom)' H (a - a_nom) + eta * teaching_error(a)
double teaching_objective(const TeachingProblem& problem, double eta,
                          const Vector& action);

struct TeachingResult {
  Vector action;
  double objective = 0.0;
  double error = 0.0;
  int iterations = 0;
  bool stationary = false;
  // Non-finite objective; `action` is the nominal one.
  bool fallback = false;
};

// Projected gradient descent over the trust-region box with central
// finite-difference gradients. eta = 0 returns the nominal action exactly.
TeachingResult teaching_action(const TeachingProblem& problem,
                               const TeachingConfig& config);

}  // namespace npace
