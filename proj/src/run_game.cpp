#include "npace/run_game.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace npace {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool same_vector(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (!same_double(a(i), b(i))) return false;
  return true;
}

std::array<Vector, kNumAgents> draw_noise(const GameSpec& spec, double std_dev,
                                          std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<Vector, kNumAgents> noise;
  for (int k = 0; k < kNumAgents; ++k) {
    noise[k] = Vector(spec.action_dims[k]);
    for (int i = 0; i < noise[k].size(); ++i) noise[k](i) = std_dev * normal(rng);
  }
  return noise;
}

}  // namespace

bool RunMetrics::operator==(const RunMetrics& rhs) const {
  if (collision != rhs.collision || !same_double(min_distance, rhs.min_distance) ||
      !same_double(control_effort, rhs.control_effort) ||
      !same_double(landing_error, rhs.landing_error) ||
      !same_double(log_mse, rhs.log_mse) || !same_vector(final_state, rhs.final_state))
    return false;
  for (int k = 0; k < kNumAgents; ++k) {
    if (!same_double(crossing_time[k], rhs.crossing_time[k]) ||
        !same_double(total_cost[k], rhs.total_cost[k]) ||
        !same_double(final_error[k], rhs.final_error[k]) ||
        estimation_error[k].size() != rhs.estimation_error[k].size())
      return false;
    for (std::size_t i = 0; i < estimation_error[k].size(); ++i)
      if (!same_double(estimation_error[k][i], rhs.estimation_error[k][i])) return false;
  }
  return true;
}

RunLog run_game(const ScenarioConfig& config, const RunOptions& options) {
  const GameSpec spec = make_scenario(config);
  const int horizon = spec.horizon_steps;
  const IntentPair& truth = config.true_intents;

  RunLog log;
  log.config = config;
  log.method = options.method;
  log.eta = options.method == Method::kNpaceComm ? options.npace.teaching.eta : 0.0;
  log.seed = options.seed;
  log.initial_estimator = options.initial_estimator;

  NpaceOptions npace_options = options.npace;
  npace_options.method = options.method;
  npace_options.intent_bounds = config.intent_bounds;

  EstimatorState est = options.initial_estimator
                           ? *options.initial_estimator
                           : EstimatorState::shared(config.initial_estimates,
                                                    config.prior_variance,
                                                    config.action_noise_std);
  std::mt19937_64 rng(options.seed);
  WarmStarts warm;
  std::array<std::optional<PolicyPair>, kNumAgents> baseline_warm;
  std::array<PeerPolicyModel, kNumAgents> peer_models;
  std::array<PeerGoalFn, kNumAgents> peer_goals;
  if (options.method == Method::kMpc) {
    for (int k = 0; k < kNumAgents; ++k) {
      const int o = other(k);
      peer_goals[k] = make_peer_goal(config, k, truth[k]);
      try {
        peer_models[k] = seeded_peer_model(spec, config.initial_state, k, truth[k],
                                           config.initial_estimates[o], peer_goals[k],
                                           options.ekf, npace_options.ilq);
      } catch (const SolverError&) {
        peer_models[k] = PeerPolicyModel::initial(o, spec.state_dim, spec.action_dims[o],
                                                  config.initial_estimates[o], options.ekf);
      }
    }
  }

  Vector state = config.initial_state;
  for (int t = 0; t < horizon; ++t) {
    try {
      std::optional<std::array<Vector, kNumAgents>> noise;
      if (options.injected_noise_std > 0.0)
        noise = draw_noise(spec, options.injected_noise_std, rng);

      StepRecord record;
      std::array<Vector, kNumAgents> actions;
      switch (options.method) {
        case Method::kComplete:
        case Method::kExpert:
        case Method::kNpace:
        case Method::kNpaceComm: {
          StepResult r = npace_step(spec, state, t, truth, est, npace_options, &warm,
                                    noise ? &*noise : nullptr);
          est = std::move(r.next);
          record = std::move(r.record);
          actions = r.actions;
          break;
        }
        case Method::kMinmax: {
          for (int k : {1, 0}) {
            const auto start = Clock::now();
            MinMaxResult res = minmax_action(
                spec, state, t, k, truth[k], options.minmax, npace_options.ilq,
                options.minmax.warm_start && baseline_warm[k] ? &*baseline_warm[k] : nullptr);
            actions[k] = res.action;
            if (res.solution.trajectory.horizon() > 1)
              baseline_warm[k] = PolicyPair{res.solution.policies[0].shifted(1),
                                            res.solution.policies[1].shifted(1)};
            else
              baseline_warm[k].reset();
            if (k == 1) record.control_ms = ms_since(start);
          }
          if (noise)
            for (int k = 0; k < kNumAgents; ++k) actions[k] += (*noise)[k];
          break;
        }
        case Method::kMpc: {
          for (int k : {1, 0}) {
            const auto start = Clock::now();
            try {
              IlqSolution sol = mpc_solve(spec, state, t, k, truth[k], peer_models[k],
                                          peer_goals[k], npace_options.ilq,
                                          baseline_warm[k] ? &*baseline_warm[k] : nullptr);
              actions[k] = sol.policies[k].action(0, state);
              if (sol.trajectory.horizon() > 1)
                baseline_warm[k] = PolicyPair{sol.policies[0].shifted(1),
                                              sol.policies[1].shifted(1)};
              else
                baseline_warm[k].reset();
            } catch (const SolverError&) {
              // A peer model that destabilizes the closed loop leaves no
              // finite plan; the agent keeps following its previous one.
              record.plan_fallback = true;
              if (baseline_warm[k]) {
                actions[k] = (*baseline_warm[k])[k].action(0, state);
                if ((*baseline_warm[k])[k].horizon() > 1)
                  baseline_warm[k] = PolicyPair{(*baseline_warm[k])[0].shifted(1),
                                                (*baseline_warm[k])[1].shifted(1)};
                else
                  baseline_warm[k].reset();
              } else {
                actions[k] = Vector::Zero(spec.action_dims[k]);
              }
            }
            if (k == 1) record.control_ms = ms_since(start);
          }
          if (noise)
            for (int k = 0; k < kNumAgents; ++k) actions[k] += (*noise)[k];
          for (int k = 0; k < kNumAgents; ++k) {
            const auto start = Clock::now();
            EkfResult upd = ekf_update(peer_models[k], peer_goals[k], state,
                                       actions[other(k)], options.ekf);
            peer_models[k] = std::move(upd.model);
            const int p = peer_models[k].intent_dim;
            record.estimates[k] = peer_models[k].theta_hat();
            record.variances[k] = peer_models[k].covariance.diagonal().head(p);
            if (k == 1) record.estimation_ms = ms_since(start);
          }
          break;
        }
      }

      if (options.method == Method::kMinmax || options.method == Method::kMpc) {
        record.t = t;
        record.state = state;
        record.actions = actions;
        for (int k = 0; k < kNumAgents; ++k)
          record.stage_costs[k] = spec.costs[k]->evaluate(state, actions[0], actions[1], truth);
      }
      log.steps.push_back(std::move(record));

      const Vector next = spec.step(state, actions[0], actions[1]);
      if (!next.allFinite() || next.norm() > kDivergenceNorm)
        throw DivergedRollout("run_game: simulated state diverged", t);
      state = next;
    } catch (const std::exception& e) {
      log.failed = true;
      log.error = "step " + std::to_string(t) + ": " + e.what();
      break;
    }
  }
  log.final_state = state;
  log.metrics = compute_metrics(log);
  return log;
}

RunMetrics compute_metrics(const RunLog& log) {
  const ScenarioConfig& cfg = log.config;
  const ScenarioInfo info = scenario_info(cfg.id);
  const int horizon = cfg.steps();
  if (log.steps.empty()) {
    if (!log.failed) throw ContractError("compute_metrics: log has no steps");
  } else if (!log.failed && static_cast<int>(log.steps.size()) != horizon) {
    throw ContractError("compute_metrics: incomplete log");
  }
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const StepRecord& r = log.steps[i];
    if (r.t != static_cast<int>(i) || r.state.size() != cfg.initial_state.size())
      throw ContractError("compute_metrics: inconsistent step records");
  }
  if (log.final_state.size() != cfg.initial_state.size())
    throw ContractError("compute_metrics: final state missing");

  RunMetrics m;
  m.final_state = log.final_state;
  std::vector<const Vector*> states;
  for (const StepRecord& r : log.steps) states.push_back(&r.state);
  states.push_back(&log.final_state);

  if (info.has_collision_predicate) {
    const int ix = info.crossing_coordinate[0];
    const int iy = info.crossing_coordinate[1];
    double min_d = std::numeric_limits<double>::infinity();
    for (const Vector* s : states)
      min_d = std::min(min_d, std::hypot((*s)(ix), (*s)(iy)));
    m.min_distance = min_d;
    m.collision = min_d < cfg.collision_radius;
  }
  for (int k = 0; k < kNumAgents; ++k) {
    const int index = info.crossing_coordinate[k];
    if (index < 0) continue;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if ((*states[i])(index) > cfg.crossing_threshold) {
        m.crossing_time[k] = static_cast<double>(i) * cfg.dt;
        break;
      }
    }
  }
  if (info.x_index >= 0) {
    m.landing_error = std::hypot(log.final_state(info.x_index) - cfg.true_intents[1](0),
                                 log.final_state(info.y_index) - cfg.true_intents[0](0));
  }

  double effort = 0.0;
  int effort_count = 0;
  for (const StepRecord& r : log.steps) {
    for (int k = 0; k < kNumAgents; ++k) {
      m.total_cost[k] += r.stage_costs[k];
      for (int channel : info.effort_channels[k]) {
        effort += std::abs(r.actions[k](channel));
        ++effort_count;
      }
    }
  }
  m.control_effort = effort_count > 0 ? effort / effort_count : 0.0;

  double mse_sum = 0.0;
  int mse_count = 0;
  for (int k = 0; k < kNumAgents; ++k) {
    const Vector& target = cfg.true_intents[other(k)];
    for (const StepRecord& r : log.steps) {
      if (r.estimates[k].size() == 0) continue;
      const double e = (r.estimates[k] - target).squaredNorm();
      m.estimation_error[k].push_back(e);
      mse_sum += e;
      ++mse_count;
    }
    if (!m.estimation_error[k].empty())
      m.final_error[k] = std::sqrt(m.estimation_error[k].back());
  }
  if (mse_count > 0) m.log_mse = std::log1p(mse_sum / mse_count);
  return m;
}

}  // namespace npace
