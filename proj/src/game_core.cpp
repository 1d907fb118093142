#include "npace/game_core.hpp"

#include <cmath>
#include <cstring>

namespace npace {

IntentPair IntentPair::scalar(double first, double second) {
  return IntentPair(Vector::Constant(1, first), Vector::Constant(1, second));
}

bool IntentPair::operator==(const IntentPair& rhs) const {
  for (int k = 0; k < kNumAgents; ++k) {
    if (theta[k].size() != rhs.theta[k].size()) return false;
    if (theta[k].size() > 0 &&
        std::memcmp(theta[k].data(), rhs.theta[k].data(),
                    sizeof(double) * theta[k].size()) != 0) {
      return false;
    }
  }
  return true;
}

Vector IntentBox::clamp(const Vector& theta) const {
  return theta.cwiseMax(lower).cwiseMin(upper);
}

bool IntentBox::contains(const Vector& theta) const {
  return (theta.array() >= lower.array()).all() &&
         (theta.array() <= upper.array()).all();
}

Vector StackLayout::stack(const Vector& s, const Vector& a1,
                          const Vector& a2) const {
  Vector z(size());
  z << s, a1, a2;
  return z;
}

void GameSpec::validate() const {
  if (state_dim < 1) throw ContractError("GameSpec: state_dim must be >= 1");
  for (int k = 0; k < kNumAgents; ++k) {
    if (action_dims[k] < 1)
      throw ContractError("GameSpec: action dims must be >= 1");
    if (intent_dims[k] < 0)
      throw ContractError("GameSpec: intent dims must be >= 0");
    if (!costs[k]) throw ContractError("GameSpec: missing cost model");
    if (intent_bounds[k]) {
      const IntentBox& box = *intent_bounds[k];
      if (box.lower.size() != intent_dims[k] ||
          box.upper.size() != intent_dims[k] ||
          !(box.lower.array() < box.upper.array()).all()) {
        throw ContractError("GameSpec: intent box must satisfy lower < upper");
      }
    }
  }
  if (horizon_steps < 1) throw ContractError("GameSpec: horizon must be >= 1");
  if (!(dt > 0.0)) throw ContractError("GameSpec: dt must be positive");
  if (!dynamics) throw ContractError("GameSpec: missing dynamics");
  if (dynamics->state_dim() != state_dim ||
      dynamics->action_dim(0) != action_dims[0] ||
      dynamics->action_dim(1) != action_dims[1]) {
    throw ContractError("GameSpec: dynamics dimensions disagree with spec");
  }
}

GameSpec GameSpec::with_horizon(int steps) const {
  GameSpec copy = *this;
  copy.horizon_steps = steps;
  return copy;
}

Vector GameSpec::step(const Vector& s, const Vector& a1,
                      const Vector& a2) const {
  return s + dt * dynamics->vector_field(s, a1, a2);
}

AffinePolicy AffinePolicy::zero(int horizon, int state_dim, int action_dim) {
  AffinePolicy policy;
  policy.feedforward.assign(horizon, Vector::Zero(action_dim));
  policy.gain.assign(horizon, Matrix::Zero(action_dim, state_dim));
  policy.reference.assign(horizon, Vector::Zero(state_dim));
  return policy;
}

AffinePolicy AffinePolicy::shifted(int steps) const {
  AffinePolicy out;
  if (steps >= horizon()) return out;
  out.feedforward.assign(feedforward.begin() + steps, feedforward.end());
  out.gain.assign(gain.begin() + steps, gain.end());
  out.reference.assign(reference.begin() + steps, reference.end());
  return out;
}

namespace {

bool state_ok(const Vector& s) {
  return s.allFinite() && s.norm() <= kDivergenceNorm;
}

}  // namespace

Trajectory rollout(const GameSpec& spec, const Vector& s0,
                   const PolicyPair& policies) {
  const int horizon = spec.horizon_steps;
  if (s0.size() != spec.state_dim)
    throw ContractError("rollout: initial state has wrong dimension");
  for (const AffinePolicy& policy : policies) {
    if (policy.horizon() < horizon)
      throw ContractError("rollout: policy shorter than the horizon");
  }
  if (!state_ok(s0)) throw DivergedRollout("rollout: invalid initial state", 0);

  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.states.push_back(s0);
  for (auto& seq : traj.actions) seq.reserve(horizon);

  for (int t = 0; t < horizon; ++t) {
    const Vector& s = traj.states.back();
    Vector a1 = policies[0].action(t, s);
    Vector a2 = policies[1].action(t, s);
    Vector next = spec.step(s, a1, a2);
    if (!a1.allFinite() || !a2.allFinite() || !state_ok(next)) {
      throw DivergedRollout(
          "rollout diverged at step " + std::to_string(t + 1), t + 1);
    }
    traj.actions[0].push_back(std::move(a1));
    traj.actions[1].push_back(std::move(a2));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double eval_cost(const GameSpec& spec, const Trajectory& traj, int agent,
                 const IntentPair& intents, int begin, int end) {
  if (agent < 0 || agent >= kNumAgents)
    throw ContractError("eval_cost: bad agent index");
  const int horizon = traj.horizon();
  if (end < 0) end = horizon;
  if (static_cast<int>(traj.states.size()) != horizon + 1 ||
      static_cast<int>(traj.actions[1].size()) != horizon)
    throw ContractError("eval_cost: inconsistent trajectory lengths");
  if (begin < 0 || end > horizon || begin > end)
    throw ContractError("eval_cost: bad step range");
  if (traj.states.front().size() != spec.state_dim)
    throw ContractError("eval_cost: state dimension mismatch");

  double total = 0.0;
  for (int t = begin; t < end; ++t) {
    total += spec.costs[agent]->evaluate(traj.states[t], traj.actions[0][t],
                                         traj.actions[1][t], intents);
  }
  return total;
}

}  // namespace npace
