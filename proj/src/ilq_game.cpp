#include "npace/ilq_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace npace {

void IlqOptions::validate() const {
  if (max_iterations < 1) throw ContractError("IlqOptions: max_iterations < 1");
  if (!(trajectory_tolerance > 0.0))
    throw ContractError("IlqOptions: tolerance must be positive");
  const auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(initial_step_scale) || !in_unit(step_backoff) ||
      !in_unit(min_step_scale) || min_step_scale > initial_step_scale)
    throw ContractError("IlqOptions: step scales must lie in (0, 1]");
}

LqApprox linearize_quadratize(const GameSpec& spec, const Trajectory& traj,
                              const IntentPair& intents) {
  const int horizon = traj.horizon();
  if (static_cast<int>(traj.states.size()) != horizon + 1 || horizon < 1)
    throw ContractError("linearize_quadratize: inconsistent trajectory");
  const int n = spec.state_dim;
  const StackLayout layout = spec.layout();
  const Matrix identity = Matrix::Identity(n, n);

  LqApprox lq;
  lq.stages.resize(horizon);
  for (int t = 0; t < horizon; ++t) {
    const Vector& s = traj.states[t];
    const Vector& a1 = traj.actions[0][t];
    const Vector& a2 = traj.actions[1][t];
    if (s.size() != n) throw ContractError("linearize_quadratize: bad state size");

    LqStage& stage = lq.stages[t];
    const DynamicsJacobians jac = spec.dynamics->jacobians(s, a1, a2);
    stage.dynamics = identity + spec.dt * jac.state;
    for (int k = 0; k < kNumAgents; ++k)
      stage.input[k] = spec.dt * jac.action[k];

    for (int k = 0; k < kNumAgents; ++k) {
      const CostExpansion ex = spec.costs[k]->expand(s, a1, a2, intents);
      if (!ex.gradient.allFinite() || !ex.hessian.allFinite() ||
          !stage.dynamics.allFinite() || !stage.input[k].allFinite()) {
        throw ContractError(
            "linearize_quadratize: non-finite derivative at step " +
            std::to_string(t));
      }
      stage.state_cost[k] = project_psd(ex.hessian.topLeftCorner(n, n));
      stage.state_linear[k] = ex.gradient.head(n);
      for (int j = 0; j < kNumAgents; ++j) {
        const int off = layout.action_offset(j);
        const int mj = spec.action_dims[j];
        stage.action_cost[k][j] = ex.hessian.block(off, off, mj, mj);
        stage.action_linear[k][j] = ex.gradient.segment(off, mj);
      }
    }
  }
  return lq;
}

double max_state_change(const Trajectory& a, const Trajectory& b) {
  double change = 0.0;
  const std::size_t count = std::min(a.states.size(), b.states.size());
  for (std::size_t t = 0; t < count; ++t)
    change = std::max(change, (a.states[t] - b.states[t]).lpNorm<Eigen::Infinity>());
  return change;
}

namespace {

// Policies that track `traj` with the LQ feedback and a step-scaled
// feedforward correction.
PolicyPair updated_policies(const Trajectory& traj, const LqSolution& sol,
                            double step_scale) {
  PolicyPair out;
  const int horizon = traj.horizon();
  for (int k = 0; k < kNumAgents; ++k) {
    AffinePolicy& p = out[k];
    p.feedforward.resize(horizon);
    p.gain = sol.gain[k];
    p.reference.assign(traj.states.begin(), traj.states.begin() + horizon);
    for (int t = 0; t < horizon; ++t)
      p.feedforward[t] = step_scale * sol.feedforward[k][t] - traj.actions[k][t];
  }
  return out;
}

std::array<double, kNumAgents> costs_of(const GameSpec& spec,
                                        const Trajectory& traj,
                                        const IntentPair& intents) {
  return {eval_cost(spec, traj, 0, intents), eval_cost(spec, traj, 1, intents)};
}

struct Candidate {
  double scale = 0.0;
  PolicyPair policies;
  Trajectory trajectory;
  std::array<double, kNumAgents> costs{};
};

PolicyPair truncated(const PolicyPair& policies, int horizon) {
  PolicyPair out = policies;
  for (AffinePolicy& p : out) {
    p.feedforward.resize(horizon);
    p.gain.resize(horizon);
    p.reference.resize(horizon);
  }
  return out;
}

// Whether one more full update would leave `traj` in place, i.e. it is
// already an equilibrium trajectory of its own local game.
bool is_stationary(const GameSpec& spec, const Vector& s0, const Trajectory& traj,
                   const IntentPair& intents, const IlqOptions& options) {
  const LqSolution sol = solve_lq_nash(linearize_quadratize(spec, traj, intents), options.lq);
  try {
    return max_state_change(rollout(spec, s0, updated_policies(traj, sol, 1.0)), traj) <
           options.trajectory_tolerance;
  } catch (const DivergedRollout&) {
    return false;
  }
}

}  // namespace

IlqSolution solve_ilq(const GameSpec& spec, const Vector& s0,
                      const IntentPair& intents, const IlqOptions& options,
                      const PolicyPair* warm_start) {
  options.validate();
  const int horizon = spec.horizon_steps;
  if (s0.size() != spec.state_dim)
    throw ContractError("solve_ilq: initial state has wrong dimension");
  for (int k = 0; k < kNumAgents; ++k) {
    if (intents[k].size() != spec.intent_dims[k])
      throw ContractError("solve_ilq: intent dimension mismatch");
  }

  PolicyPair policies;
  Trajectory traj;
  bool have_start = false;
  if (warm_start != nullptr) {
    if ((*warm_start)[0].horizon() < horizon || (*warm_start)[1].horizon() < horizon)
      throw ContractError("solve_ilq: warm start shorter than the horizon");
    policies = truncated(*warm_start, horizon);
    try {
      traj = rollout(spec, s0, policies);
      have_start = true;
    } catch (const DivergedRollout&) {
    }
  }
  if (!have_start) {
    for (int k = 0; k < kNumAgents; ++k)
      policies[k] = AffinePolicy::zero(horizon, spec.state_dim, spec.action_dims[k]);
    traj = rollout(spec, s0, policies);
  }
  std::array<double, kNumAgents> costs = costs_of(spec, traj, intents);

  IlqSolution out;
  out.intents = intents;

  for (int iteration = 0; iteration < options.max_iterations; ++iteration) {
    LqApprox lq = linearize_quadratize(spec, traj, intents);
    LqSolution lq_sol = solve_lq_nash(lq, options.lq);

    // Step scale halves on divergence or when both agents' costs rise,
    // unless the full step already lands on a stationary trajectory. If
    // both still rise at the minimum scale the increase comes from the
    // direction, not the length, and the largest finite step is taken.
    double scale = options.initial_step_scale;
    PolicyPair candidate;
    Trajectory next;
    std::array<double, kNumAgents> next_costs{};
    std::optional<Candidate> largest_finite;
    while (true) {
      candidate = updated_policies(traj, lq_sol, scale);
      bool finite = true;
      try {
        next = rollout(spec, s0, candidate);
        next_costs = costs_of(spec, next, intents);
        finite = std::isfinite(next_costs[0]) && std::isfinite(next_costs[1]);
      } catch (const DivergedRollout&) {
        finite = false;
      }
      if (finite && scale == options.initial_step_scale &&
          max_state_change(next, traj) < options.trajectory_tolerance)
        break;
      if (finite && !largest_finite)
        largest_finite = Candidate{scale, candidate, next, next_costs};
      const bool both_worse = finite && next_costs[0] > costs[0] &&
                              next_costs[1] > costs[1];
      if (finite && !both_worse) break;
      if (finite && scale == options.initial_step_scale && is_stationary(spec, s0, next, intents, options))
        break;
      if (scale * options.step_backoff < options.min_step_scale) {
        if (!largest_finite)
          throw SolverError("solve_ilq: no finite update at the minimum step scale",
                            iteration);
        scale = largest_finite->scale;
        candidate = std::move(largest_finite->policies);
        next = std::move(largest_finite->trajectory);
        next_costs = largest_finite->costs;
        break;
      }
      scale *= options.step_backoff;
    }

    const double change = max_state_change(next, traj);
    if (change < options.trajectory_tolerance &&
        scale == options.initial_step_scale) {
      // `traj` is stationary: keep it and report the LQ game around it.
      out.policies = updated_policies(traj, lq_sol, 0.0);
      out.trajectory = std::move(traj);
      out.approximation = std::move(lq);
      out.lq_solution = std::move(lq_sol);
      out.converged = true;
      return out;
    }
    policies = std::move(candidate);
    traj = std::move(next);
    costs = next_costs;
    ++out.iterations;
  }

  out.approximation = linearize_quadratize(spec, traj, intents);
  out.lq_solution = solve_lq_nash(out.approximation, options.lq);
  out.policies = updated_policies(traj, out.lq_solution, 0.0);
  out.trajectory = std::move(traj);
  out.converged = false;
  return out;
}

}  // namespace npace
