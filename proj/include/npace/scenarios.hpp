#pragma once

// Case-study game constructors: assistive lunar lander, lane merging, and an
// intersection crossing, plus a linear goal-reaching variant of the lander
// whose policies are exactly affine in the intents.

#include "npace/baselines.hpp"
#include "npace/game_core.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace npace {

enum class ScenarioId { kLunarLander, kLaneMerge, kIntersection, kLinearLander };

std::string to_string(ScenarioId id);
ScenarioId scenario_from_string(const std::string& name);

struct ScenarioConfig {
  ScenarioId id = ScenarioId::kIntersection;
  IntentPair true_intents;
  // initial_estimates[k]: the peer's initial estimate of agent k's intent.
  IntentPair initial_estimates;
  // Prior variance of the Gaussian belief over agent k's intent.
  std::array<double, kNumAgents> prior_variance{25.0, 25.0};
  // Learner's assumed action-noise standard deviation.
  double action_noise_std = 0.5;
  Vector initial_state;
  double dt = 0.1;
  double horizon_seconds = 5.0;
  double d_safe = 2.0;
  // Intersection: collision when min_t sqrt(x1^2 + y2^2) < collision_radius.
  double collision_radius = 1.0;
  // Intersection: an agent has crossed once its coordinate exceeds this.
  double crossing_threshold = 1.0;
  std::array<std::optional<IntentBox>, kNumAgents> intent_bounds;

  // horizon_seconds / dt; throws ContractError unless it is an integer >= 1.
  int steps() const;
  void validate() const;

  static ScenarioConfig defaults(ScenarioId id);
};

// Names and channel roles the harness needs to log and score a scenario.
struct ScenarioInfo {
  std::vector<std::string> state_names;
  std::array<std::vector<std::string>, kNumAgents> action_names;
  // Action components counted in the control-effort metric.
  std::array<std::vector<int>, kNumAgents> effort_channels;
  // Intersection only: state index of each agent's travel coordinate.
  std::array<int, kNumAgents> crossing_coordinate{-1, -1};
  bool has_collision_predicate = false;
  // Lander variants: state indices of (x, y); goal is (intent 1, intent 0).
  int x_index = -1;
  int y_index = -1;
};

ScenarioInfo scenario_info(ScenarioId id);

GameSpec make_lunar_lander(const ScenarioConfig& cfg);
GameSpec make_lane_merge(const ScenarioConfig& cfg);
GameSpec make_intersection(const ScenarioConfig& cfg);
GameSpec make_linear_lander(const ScenarioConfig& cfg);
GameSpec make_scenario(const ScenarioConfig& cfg);

// Goal state `observer` attributes to its peer in the affine peer model of
// the MPC baseline: the peer's goal coordinate from theta_hat, the observer's
// own known coordinate, upright attitude and zero velocities for the landers;
// the travel targets for the driving scenarios (no intent dependence).
PeerGoalFn make_peer_goal(const ScenarioConfig& cfg, int observer,
                          const Vector& own_intent);

// Case-study samplers. All draws come from a std::mt19937_64 seeded with
// `seed`, so a seed pins the sample matrix exactly.
struct IntentSample {
  double first = 0.0;
  double second = 0.0;
};
// Uniform aggressiveness pairs over the intersection box.
std::vector<IntentSample> sample_intersection_intents(int count, double lower,
                                                      double upper,
                                                      unsigned long long seed);
// Uniform draws in [nominal(1-frac), nominal(1+frac)] for both agents.
std::vector<IntentSample> sample_relative(int count, double nominal,
                                          double fraction,
                                          unsigned long long seed);

}  // namespace npace
