#include "npace/npace.hpp"

#include <chrono>
#include <memory>
#include <utility>

namespace npace {

std::string to_string(Method method) {
  switch (method) {
    case Method::kComplete: return "complete";
    case Method::kExpert: return "expert";
    case Method::kNpace: return "npace";
    case Method::kNpaceComm: return "npace_comm";
    case Method::kMinmax: return "minmax";
    case Method::kMpc: return "mpc";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "complete") return Method::kComplete;
  if (name == "expert") return Method::kExpert;
  if (name == "npace") return Method::kNpace;
  if (name == "npace_comm" || name == "npace-comm") return Method::kNpaceComm;
  if (name == "minmax") return Method::kMinmax;
  if (name == "mpc") return Method::kMpc;
  throw ContractError("unknown method '" + name + "'");
}

EstimatorState EstimatorState::shared(
    const IntentPair& initial_estimates,
    const std::array<double, kNumAgents>& prior_variance, double action_noise_std) {
  const auto belief = [&](int agent) {
    const Vector& mean = initial_estimates[agent];
    const int p = static_cast<int>(mean.size());
    return GaussianBelief{mean, prior_variance[agent] * Matrix::Identity(p, p),
                          action_noise_std};
  };
  EstimatorState est;
  for (int k = 0; k < kNumAgents; ++k) {
    est.agents[k].peer = belief(other(k));
    est.agents[k].self_model = belief(k);
  }
  return est;
}

IntentPair EstimatorState::tracked_pair(int agent) const {
  IntentPair pair;
  pair[agent] = agents[agent].self_model.mean;
  pair[other(agent)] = agents[agent].peer.mean;
  return pair;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Per-step memo of ILQ solves keyed by the exact intent pair, so roles that
// ask for the same game share one solve.
class SolveCache {
 public:
  SolveCache(const GameSpec& spec, const Vector& state, const IlqOptions& options, int t)
      : spec_(spec), state_(state), options_(options), t_(t) {}

  const IlqSolution& get(const IntentPair& intents,
                         const std::optional<PolicyPair>& warm,
                         const std::string& role, int agent) {
    for (const auto& [key, sol] : entries_)
      if (key == intents) return *sol;
    try {
      auto sol = std::make_shared<IlqSolution>(
          solve_ilq(spec_, state_, intents, options_, warm ? &*warm : nullptr));
      entries_.emplace_back(intents, sol);
      return *sol;
    } catch (const SolverError& e) {
      throw SolverError("agent " + std::to_string(agent) + " " + role +
                            " solve failed: " + e.what(),
                        t_);
    }
  }

 private:
  const GameSpec& spec_;
  const Vector& state_;
  const IlqOptions& options_;
  int t_;
  std::vector<std::pair<IntentPair, std::shared_ptr<IlqSolution>>> entries_;
};

std::optional<PolicyPair> shifted(const IlqSolution& sol) {
  if (sol.trajectory.horizon() < 2) return std::nullopt;
  return PolicyPair{sol.policies[0].shifted(1), sol.policies[1].shifted(1)};
}

Vector covariance_diagonal(const GaussianBelief& belief) {
  return belief.covariance.diagonal();
}

}  // namespace

StepResult npace_step(const GameSpec& spec, const Vector& state, int t,
                      const IntentPair& truth, const EstimatorState& est,
                      const NpaceOptions& options, WarmStarts* warm,
                      const std::array<Vector, kNumAgents>* noise) {
  const Method method = options.method;
  if (method == Method::kMinmax || method == Method::kMpc)
    throw ContractError("npace_step: method has its own step routine");
  const int remaining = spec.horizon_steps - t;
  if (t < 0 || remaining < 1) throw ContractError("npace_step: step outside the horizon");
  if (state.size() != spec.state_dim)
    throw ContractError("npace_step: state has wrong dimension");

  const GameSpec local = spec.with_horizon(remaining);
  SolveCache cache(local, state, options.ilq, t);
  const auto warm_of = [&](const std::array<std::optional<PolicyPair>, kNumAgents>* slot,
                           int k) -> std::optional<PolicyPair> {
    if (warm == nullptr) return std::nullopt;
    return (*slot)[k];
  };

  StepResult out;
  StepRecord& record = out.record;
  record.t = t;
  record.state = state;

  // Policy generation. Agent 1 goes first so its solve is never a cache hit.
  std::array<const IlqSolution*, kNumAgents> ego{};
  std::array<Vector, kNumAgents> nominal;
  for (int k : {1, 0}) {
    IntentPair key = truth;
    if (method != Method::kComplete) key[other(k)] = est.agents[k].peer.mean;
    const auto start = Clock::now();
    ego[k] = &cache.get(key, warm_of(warm ? &warm->ego : nullptr, k), "ego", k);
    nominal[k] = ego[k]->policies[k].action(0, state);
    if (k == 1) record.control_ms = ms_since(start);
  }

  std::array<Vector, kNumAgents> actions = nominal;
  EstimatorState next = est;

  if (method != Method::kComplete) {
    const bool peer_aware = method != Method::kExpert;
    const auto estimation_start = Clock::now();
    double teaching_ms = 0.0;

    // Prediction: the expert baseline puts its own true intent where N-PACE
    // puts the tracked estimate of it; nothing else differs.
    std::array<const IlqSolution*, kNumAgents> predictive{};
    std::array<Vector, kNumAgents> predicted_peer, predicted_self;
    std::array<PolicyJacobian, kNumAgents> jac_peer, jac_self;
    for (int k = 0; k < kNumAgents; ++k) {
      const int o = other(k);
      IntentPair key = est.tracked_pair(k);
      if (!peer_aware) key[k] = truth[k];
      predictive[k] =
          &cache.get(key, warm_of(warm ? &warm->predictive : nullptr, k), "predictive", k);
      try {
        predicted_peer[k] = predictive[k]->policies[o].action(0, state);
        jac_peer[k] = policy_jacobian(local, *predictive[k], state, 0, o, options.jacobian);
        if (peer_aware) {
          predicted_self[k] = predictive[k]->policies[k].action(0, state);
          jac_self[k] = policy_jacobian(local, *predictive[k], state, 0, k, options.jacobian);
        }
      } catch (const SolverError& e) {
        throw SolverError("agent " + std::to_string(k) + " jacobian failed: " + e.what(), t);
      }
    }

    if (method == Method::kNpaceComm) {
      for (int k = 0; k < kNumAgents; ++k) {
        const auto start = Clock::now();
        const TeachingProblem problem = make_teaching_problem(
            k, *ego[k], est.agents[k].self_model, options.learner,
            options.intent_bounds[k], predicted_self[k], jac_self[k], truth[k]);
        const TeachingResult taught = teaching_action(problem, options.teaching);
        actions[k] = taught.action;
        record.teaching_fallback = record.teaching_fallback || taught.fallback;
        if (k == 1) teaching_ms = ms_since(start);
      }
    }

    std::array<Vector, kNumAgents> observed = actions;
    if (noise != nullptr)
      for (int k = 0; k < kNumAgents; ++k) observed[k] += (*noise)[k];

    // Learning.
    for (int k = 0; k < kNumAgents; ++k) {
      const int o = other(k);
      next.agents[k].peer =
          learner_update(options.learner, est.agents[k].peer, predicted_peer[k],
                         observed[o], jac_peer[k], options.intent_bounds[o]);
      if (peer_aware) {
        next.agents[k].self_model =
            learner_update(options.learner, est.agents[k].self_model, predicted_self[k],
                           observed[k], jac_self[k], options.intent_bounds[k]);
      }
    }
    record.estimation_ms = ms_since(estimation_start) - teaching_ms;
    record.control_ms += teaching_ms;
    actions = observed;

    for (int k = 0; k < kNumAgents; ++k) {
      record.estimates[k] = next.agents[k].peer.mean;
      record.variances[k] = covariance_diagonal(next.agents[k].peer);
    }
    if (warm != nullptr)
      for (int k = 0; k < kNumAgents; ++k) warm->predictive[k] = shifted(*predictive[k]);
  } else if (noise != nullptr) {
    for (int k = 0; k < kNumAgents; ++k) actions[k] += (*noise)[k];
  }

  if (warm != nullptr)
    for (int k = 0; k < kNumAgents; ++k) warm->ego[k] = shifted(*ego[k]);

  for (int k = 0; k < kNumAgents; ++k)
    record.stage_costs[k] = spec.costs[k]->evaluate(state, actions[0], actions[1], truth);
  record.actions = actions;
  out.actions = actions;
  out.next = std::move(next);
  return out;
}

StepResult expert_step(const GameSpec& spec, const Vector& state, int t,
                       const IntentPair& truth, const EstimatorState& est,
                       NpaceOptions options, WarmStarts* warm) {
  options.method = Method::kExpert;
  return npace_step(spec, state, t, truth, est, options, warm);
}

}  // namespace npace
