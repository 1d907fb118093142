#pragma once

// Iterative linear-quadratic approximation of a nonlinear general-sum game.
// Each iteration linearizes the dynamics and quadratizes both agents' costs
// around the current trajectory, solves the LQ game, and applies the
// resulting feedback update with a damped feedforward term.

#include "npace/game_core.hpp"
#include "npace/lq_game.hpp"

namespace npace {

struct IlqOptions {
  int max_iterations = 50;
  // Max over t of ||s_t^new - s_t^old||_inf below which the trajectory is
  // considered stationary.
  double trajectory_tolerance = 1e-4;
  double initial_step_scale = 1.0;
  double step_backoff = 0.5;
  double min_step_scale = 1.0 / 64.0;
  LqOptions lq;

  void validate() const;
};

struct IlqSolution {
  // Feedback policies centered on `trajectory`: a_t = -alpha_t - P_t (s - s*_t).
  PolicyPair policies;
  Trajectory trajectory;
  IntentPair intents;
  // Local game around `trajectory` and its LQ solution; the gains in
  // `policies` come from here.
  LqApprox approximation;
  LqSolution lq_solution;
  // Policy updates that moved the trajectory by at least the tolerance. The
  // confirming LQ solve that finds the trajectory stationary is not counted.
  int iterations = 0;
  bool converged = false;

  const Vector& first_action(int agent) const {
    return trajectory.actions[agent].front();
  }
};

// A_t = I + dt df/ds, B_t^k = dt df/da^k; cost blocks are gradients and
// Hessians at the trajectory point. State-cost Hessians are projected onto
// the PSD cone; state/action cross terms are dropped.
LqApprox linearize_quadratize(const GameSpec& spec, const Trajectory& traj,
                              const IntentPair& intents);

// Solves over spec.horizon_steps starting at s0. `warm_start`, when given,
// must span the horizon; a warm start whose rollout diverges is replaced by
// the zero policy.
IlqSolution solve_ilq(const GameSpec& spec, const Vector& s0,
                      const IntentPair& intents, const IlqOptions& options = {},
                      const PolicyPair* warm_start = nullptr);

// Max over t of the infinity-norm state difference.
double max_state_change(const Trajectory& a, const Trajectory& b);

}  // namespace npace
