#include "npace/scenarios.hpp"

#include "npace/costs.hpp"
#include "npace/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace npace {

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::kLunarLander: return "lunar_lander";
    case ScenarioId::kLaneMerge: return "lane_merge";
    case ScenarioId::kIntersection: return "intersection";
    case ScenarioId::kLinearLander: return "linear_lander";
  }
  return "unknown";
}

ScenarioId scenario_from_string(const std::string& name) {
  if (name == "lunar_lander" || name == "cs1") return ScenarioId::kLunarLander;
  if (name == "lane_merge" || name == "cs2") return ScenarioId::kLaneMerge;
  if (name == "intersection" || name == "cs3") return ScenarioId::kIntersection;
  if (name == "linear_lander") return ScenarioId::kLinearLander;
  throw ContractError("unknown scenario '" + name + "'");
}

int ScenarioConfig::steps() const {
  if (!(dt > 0.0) || !(horizon_seconds > 0.0))
    throw ContractError("ScenarioConfig: dt and horizon must be positive");
  const double ratio = horizon_seconds / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 1.0)
    throw ContractError("ScenarioConfig: horizon is not a whole number of steps");
  return static_cast<int>(rounded);
}

void ScenarioConfig::validate() const {
  steps();
  if (!(d_safe > 0.0) || !(collision_radius > 0.0) || !(action_noise_std > 0.0))
    throw ContractError("ScenarioConfig: dimensional constants must be positive");
  for (int k = 0; k < kNumAgents; ++k) {
    if (!(prior_variance[k] > 0.0))
      throw ContractError("ScenarioConfig: prior variance must be positive");
    if (true_intents[k].size() != initial_estimates[k].size())
      throw ContractError("ScenarioConfig: intent and estimate sizes differ");
  }
}

ScenarioConfig ScenarioConfig::defaults(ScenarioId id) {
  ScenarioConfig cfg;
  cfg.id = id;
  const auto box = [](double lo, double hi) {
    return IntentBox{Vector::Constant(1, lo), Vector::Constant(1, hi)};
  };
  switch (id) {
    case ScenarioId::kLunarLander:
      // intent 0: y_f (known to the thrust agent); intent 1: x_f.
      cfg.true_intents = IntentPair::scalar(-5.0, 5.0);
      cfg.initial_estimates = IntentPair::scalar(0.0, 0.0);
      cfg.prior_variance = {10.0, 10.0};
      cfg.initial_state = (Vector(6) << -5.0, 8.0, 0.0, 0.0, 0.0, 0.0).finished();
      break;
    case ScenarioId::kLinearLander:
      cfg.true_intents = IntentPair::scalar(-5.0, 5.0);
      cfg.initial_estimates = IntentPair::scalar(0.0, 0.0);
      cfg.prior_variance = {10.0, 10.0};
      cfg.initial_state = (Vector(4) << -5.0, 8.0, 0.0, 0.0).finished();
      break;
    case ScenarioId::kLaneMerge:
      cfg.true_intents = IntentPair::scalar(5.0, 80.0);
      cfg.initial_estimates = IntentPair::scalar(100.0, 100.0);
      cfg.prior_variance = {1.0e5, 1.0e5};
      cfg.d_safe = 4.0;
      cfg.initial_state =
          (Vector(6) << 0.0, 8.0, 0.0, 3.5, 0.0, 8.0).finished();
      cfg.intent_bounds = {box(0.0, 100.0), box(0.0, 100.0)};
      break;
    case ScenarioId::kIntersection:
      cfg.true_intents = IntentPair::scalar(25.0, 40.0);
      cfg.initial_estimates = IntentPair::scalar(35.0, 35.0);
      cfg.prior_variance = {25.0, 25.0};
      cfg.d_safe = 4.9;
      cfg.initial_state = (Vector(4) << -8.0, 6.0, -8.0, 6.0).finished();
      cfg.intent_bounds = {box(20.0, 50.0), box(20.0, 50.0)};
      break;
  }
  return cfg;
}

ScenarioInfo scenario_info(ScenarioId id) {
  ScenarioInfo info;
  switch (id) {
    case ScenarioId::kLunarLander:
      info.state_names = {"x", "y", "phi", "vx", "vy", "omega"};
      info.action_names = {{{"F"}, {"T"}}};
      info.effort_channels = {{{0}, {0}}};
      info.x_index = 0;
      info.y_index = 1;
      break;
    case ScenarioId::kLinearLander:
      info.state_names = {"x", "y", "vx", "vy"};
      info.action_names = {{{"u1"}, {"u2"}}};
      info.effort_channels = {{{0}, {0}}};
      info.x_index = 0;
      info.y_index = 1;
      break;
    case ScenarioId::kLaneMerge:
      info.state_names = {"x1", "v1", "x2", "y2", "phi2", "v2"};
      info.action_names = {{{"a1"}, {"a2", "delta2"}}};
      info.effort_channels = {{{0}, {0}}};
      break;
    case ScenarioId::kIntersection:
      info.state_names = {"x1", "v1", "y2", "v2"};
      info.action_names = {{{"a1"}, {"a2"}}};
      info.effort_channels = {{{0}, {0}}};
      info.crossing_coordinate = {0, 2};
      info.has_collision_predicate = true;
      break;
  }
  return info;
}

namespace {

GameSpec base_spec(const ScenarioConfig& cfg,
                   std::shared_ptr<const DynamicsModel> dynamics) {
  cfg.validate();
  GameSpec spec;
  spec.state_dim = dynamics->state_dim();
  spec.action_dims = {dynamics->action_dim(0), dynamics->action_dim(1)};
  spec.horizon_steps = cfg.steps();
  spec.dt = cfg.dt;
  spec.dynamics = std::move(dynamics);
  spec.intent_dims = {static_cast<int>(cfg.true_intents[0].size()),
                      static_cast<int>(cfg.true_intents[1].size())};
  spec.intent_bounds = cfg.intent_bounds;
  return spec;
}

// Shared-goal lander cost: both agents penalize distance to (x_f, y_f) where
// x_f is agent 1's intent and y_f agent 0's; only the action term differs.
std::shared_ptr<CompositeCost> lander_cost(const StackLayout& layout,
                                           int owner, bool with_attitude) {
  auto cost = std::make_shared<CompositeCost>(layout);
  cost->emplace<QuadraticTerm>(0, 10.0, Target::intent(1));
  cost->emplace<QuadraticTerm>(1, 10.0, Target::intent(0));
  if (with_attitude) {
    cost->emplace<QuadraticTerm>(2, 10.0, Target::constant(std::numbers::pi / 2.0));
    for (int i : {3, 4, 5}) cost->emplace<QuadraticTerm>(i, 10.0);
  } else {
    for (int i : {2, 3}) cost->emplace<QuadraticTerm>(i, 10.0);
  }
  cost->emplace<QuadraticTerm>(layout.action_offset(owner), 1.0);
  return cost;
}

}  // namespace

GameSpec make_lunar_lander(const ScenarioConfig& cfg) {
  GameSpec spec = base_spec(cfg, std::make_shared<LunarLanderDynamics>());
  const StackLayout layout = spec.layout();
  spec.costs = {lander_cost(layout, 0, true), lander_cost(layout, 1, true)};
  spec.validate();
  return spec;
}

GameSpec make_linear_lander(const ScenarioConfig& cfg) {
  Matrix a = Matrix::Zero(4, 4);
  a(0, 2) = 1.0;
  a(1, 3) = 1.0;
  Matrix b1 = Matrix::Zero(4, 1);
  b1(2, 0) = 1.0;
  b1(3, 0) = 1.0;
  Matrix b2 = Matrix::Zero(4, 1);
  b2(2, 0) = 1.0;
  b2(3, 0) = -1.0;
  GameSpec spec = base_spec(cfg, std::make_shared<LinearDynamics>(a, b1, b2));
  const StackLayout layout = spec.layout();
  spec.costs = {lander_cost(layout, 0, false), lander_cost(layout, 1, false)};
  spec.validate();
  return spec;
}

GameSpec make_lane_merge(const ScenarioConfig& cfg) {
  GameSpec spec = base_spec(cfg, std::make_shared<LaneMergeDynamics>());
  const StackLayout layout = spec.layout();
  // d = (x1 - x2)^2 + y2^2
  const std::vector<ProximityTerm::Pair> pairs{{0, 2}, {3, -1}};

  auto blue = std::make_shared<CompositeCost>(layout);
  blue->emplace<QuadraticTerm>(0, 0.1, Target::constant(25.0));
  blue->emplace<QuadraticTerm>(1, 0.1);
  blue->emplace<ProximityTerm>(pairs, cfg.d_safe, 1.0, Target::intent(0), true);
  blue->emplace<QuadraticTerm>(layout.action_offset(0), 1.0);

  auto red = std::make_shared<CompositeCost>(layout);
  red->emplace<QuadraticTerm>(3, 1.0);
  red->emplace<QuadraticTerm>(4, 10.0);
  red->emplace<QuadraticTerm>(5, 0.1);
  red->emplace<QuadraticTerm>(2, 0.1, Target::constant(25.0));
  red->emplace<ProximityTerm>(pairs, cfg.d_safe, 1.0, Target::intent(1), true);
  red->emplace<QuadraticTerm>(layout.action_offset(1), 1.0);
  red->emplace<QuadraticTerm>(layout.action_offset(1) + 1, 1.0);

  spec.costs = {blue, red};
  spec.validate();
  return spec;
}

GameSpec make_intersection(const ScenarioConfig& cfg) {
  Matrix a = Matrix::Zero(4, 4);
  a(0, 1) = 1.0;
  a(2, 3) = 1.0;
  Matrix b1 = Matrix::Zero(4, 1);
  b1(1, 0) = 1.0;
  Matrix b2 = Matrix::Zero(4, 1);
  b2(3, 0) = 1.0;
  GameSpec spec = base_spec(cfg, std::make_shared<LinearDynamics>(a, b1, b2));
  const StackLayout layout = spec.layout();
  // d = x1^2 + y2^2, proximity exponent not squared.
  const std::vector<ProximityTerm::Pair> pairs{{0, -1}, {2, -1}};

  for (int k = 0; k < kNumAgents; ++k) {
    const int position = k == 0 ? 0 : 2;
    auto cost = std::make_shared<CompositeCost>(layout);
    cost->emplace<QuadraticTerm>(position, 1.0, Target::constant(8.0));
    cost->emplace<QuadraticTerm>(position + 1, 1.0);
    cost->emplace<ProximityTerm>(pairs, cfg.d_safe, 10.0, Target::intent(k), false);
    cost->emplace<QuadraticTerm>(layout.action_offset(k), 1.0);
    spec.costs[k] = cost;
  }
  spec.validate();
  return spec;
}

GameSpec make_scenario(const ScenarioConfig& cfg) {
  switch (cfg.id) {
    case ScenarioId::kLunarLander: return make_lunar_lander(cfg);
    case ScenarioId::kLaneMerge: return make_lane_merge(cfg);
    case ScenarioId::kIntersection: return make_intersection(cfg);
    case ScenarioId::kLinearLander: return make_linear_lander(cfg);
  }
  throw ContractError("make_scenario: unknown scenario");
}

PeerGoalFn make_peer_goal(const ScenarioConfig& cfg, int observer,
                          const Vector& own_intent) {
  const int peer = other(observer);
  const int p = static_cast<int>(cfg.true_intents[peer].size());
  Vector goal;
  switch (cfg.id) {
    case ScenarioId::kLunarLander:
      goal = (Vector(6) << 0.0, 0.0, std::numbers::pi / 2.0, 0.0, 0.0, 0.0).finished();
      break;
    case ScenarioId::kLinearLander:
      goal = Vector::Zero(4);
      break;
    case ScenarioId::kLaneMerge:
      goal = (Vector(6) << 25.0, 0.0, 25.0, 0.0, 0.0, 0.0).finished();
      break;
    case ScenarioId::kIntersection:
      goal = (Vector(4) << 8.0, 0.0, 8.0, 0.0).finished();
      break;
  }
  const bool lander =
      cfg.id == ScenarioId::kLunarLander || cfg.id == ScenarioId::kLinearLander;
  if (!lander) {
    return [goal, n = goal.size(), p](const Vector&) {
      return PeerGoal{goal, Matrix::Zero(n, p)};
    };
  }
  // Intent 1 is the x goal and intent 0 the y goal.
  const int peer_index = peer == 1 ? 0 : 1;
  goal(observer == 1 ? 0 : 1) = own_intent(0);
  return [goal, peer_index](const Vector& theta_hat) {
    PeerGoal out{goal, Matrix::Zero(goal.size(), 1)};
    out.state(peer_index) = theta_hat(0);
    out.jacobian(peer_index, 0) = 1.0;
    return out;
  };
}

std::vector<IntentSample> sample_intersection_intents(int count, double lower,
                                                      double upper,
                                                      unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lower, upper);
  std::vector<IntentSample> out(count);
  for (IntentSample& sample : out) {
    sample.first = dist(rng);
    sample.second = dist(rng);
  }
  return out;
}

std::vector<IntentSample> sample_relative(int count, double nominal,
                                          double fraction,
                                          unsigned long long seed) {
  return sample_intersection_intents(count, nominal * (1.0 - fraction),
                                     nominal * (1.0 + fraction), seed);
}

}  // namespace npace
