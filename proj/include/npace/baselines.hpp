#pragma once

// Comparison controllers: a robust agent that plays against the worst-case
// peer intent in a box, and a non-game-theoretic MPC agent that fits an
// affine goal-seeking model of its peer with an extended Kalman filter.
// The expert-peer baseline lives with npace_step (see npace.hpp).

#include "npace/game_core.hpp"
#include "npace/ilq_game.hpp"

#include <functional>
#include <optional>

namespace npace {

struct MinMaxConfig {
  // Opponent intent box per agent; unset entries fall back to the game's
  // intent bounds.
  std::array<std::optional<IntentBox>, kNumAgents> boxes;
  // Golden-section bracket width at which the search stops.
  double tolerance = 0.05;
  int max_evaluations = 40;
  // Coordinate sweeps when the opponent intent has several components.
  int sweeps = 2;
  // Seed each step's candidate solves with the previous step's worst-case
  // policies. Off by default: on the intersection the seeded solves keep
  // both vehicles in the mutual-yield equilibrium until the horizon ends.
  bool warm_start = false;

  void validate() const;
};

struct MinMaxResult {
  Vector action;
  Vector worst_case;
  // Ego cost of the complete-information game at the worst case.
  double worst_value = 0.0;
  int evaluations = 0;
  // Candidates whose solve failed; they are excluded from the maximization.
  int failures = 0;
  IlqSolution solution;
};

// Ego cost over the remaining horizon of the complete-information game
// solved at (own_intent, peer_intent).
double minmax_value(const GameSpec& spec, const Vector& state, int t, int agent,
                    const Vector& own_intent, const Vector& peer_intent,
                    const IlqOptions& ilq = {}, const PolicyPair* warm = nullptr,
                    IlqSolution* solution = nullptr);

// Maximizes the ego cost over the opponent box by golden-section search
// (box endpoints included) and returns the ego's first action of the game
// solved at the maximizer.
MinMaxResult minmax_action(const GameSpec& spec, const Vector& state, int t,
                           int agent, const Vector& own_intent,
                           const MinMaxConfig& config, const IlqOptions& ilq = {},
                           const PolicyPair* warm = nullptr);

// Goal state s_goal(theta_hat) an observer attributes to its peer, with its
// Jacobian w.r.t. theta_hat (n x p).
struct PeerGoal {
  Vector state;
  Matrix jacobian;
};
using PeerGoalFn = std::function<PeerGoal(const Vector& theta_hat)>;

struct EkfConfig {
  // Random-walk process noise added to the parameter covariance each step.
  double process_noise = 1e-4;
  // Observation noise variance on each peer action component.
  double observation_noise = 0.25;
  double prior_variance = 10.0;
  // Prior variance of the gain and bias entries.
  double policy_prior_variance = 0.01;
  // Covariance reset scale used when positive definiteness is lost.
  double reinflation = 1.0;

  void validate() const;
};

// Peer policy a = K (s - s_goal(theta_hat)) + b with the EKF estimate of the
// stacked parameters (theta_hat, vec(K) column-major, b).
struct PeerPolicyModel {
  int peer = 1;
  int state_dim = 0;
  int action_dim = 0;
  int intent_dim = 0;
  Vector mean;
  Matrix covariance;

  // Zero gain and bias unless given.
  static PeerPolicyModel initial(int peer, int state_dim, int action_dim,
                                 const Vector& theta_hat, const EkfConfig& config,
                                 const Matrix& gain = {}, const Vector& bias = {});

  Vector theta_hat() const { return mean.head(intent_dim); }
  Matrix gain() const;
  Vector bias() const { return mean.tail(action_dim); }
  Vector action(const Vector& s, const PeerGoalFn& goal) const;
  // d action / d parameters at s (action_dim x parameter count).
  Matrix observation_jacobian(const Vector& s, const PeerGoalFn& goal) const;
};

struct EkfResult {
  PeerPolicyModel model;
  Vector innovation;
  bool reinflated = false;
};

// Model seeded with the first-step linearization of the peer's policy in
// the game `agent` solves at (own_intent, theta_hat) from `state`.
PeerPolicyModel seeded_peer_model(const GameSpec& spec, const Vector& state, int agent,
                                  const Vector& own_intent, const Vector& theta_hat,
                                  const PeerGoalFn& goal, const EkfConfig& config,
                                  const IlqOptions& ilq = {});

// Process-noise injection followed by the measurement update with the
// observed peer action at state s.
EkfResult ekf_update(const PeerPolicyModel& model, const PeerGoalFn& goal,
                     const Vector& s, const Vector& observed,
                     const EkfConfig& config);

// Best response of `agent` to the frozen peer model over the remaining
// horizon (single-agent iterative LQ). The ego's cost is evaluated at
// (own intent, model theta_hat).
IlqSolution mpc_solve(const GameSpec& spec, const Vector& state, int t, int agent,
                      const Vector& own_intent, const PeerPolicyModel& model,
                      const PeerGoalFn& goal, const IlqOptions& ilq = {},
                      const PolicyPair* warm = nullptr);

}  // namespace npace
