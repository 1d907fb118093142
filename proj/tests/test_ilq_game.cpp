#include "doctest.h"
#include "test_support.hpp"

#include "npace/ilq_game.hpp"
#include "npace/scenarios.hpp"

using namespace npace;
using namespace npace::testing;

namespace {

Vector mirror(const Vector& s) {
  Vector m(4);
  m << s(2), s(3), s(0), s(1);
  return m;
}

}  // namespace

TEST_CASE("ilq on a linear-quadratic game converges in one update to the LQ Nash policy") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 5;
    const auto setup = random_lq_spec(rng, n, 1 + trial % 2, 1, 5 + trial);
    const IntentPair intents = IntentPair::scalar(0.7, -1.3);
    const IlqSolution sol = solve_ilq(setup.spec, setup.s0, intents);
    CHECK(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK(ilq_lq_policy_gap(setup.spec, setup.s0, intents, sol) <= 1e-10);
  }
}

TEST_CASE("converged trajectory is the rollout of the returned policies") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const GameSpec spec = make_scenario(cfg);
  const IlqSolution sol = solve_ilq(spec, cfg.initial_state, cfg.true_intents);
  REQUIRE(sol.converged);
  const Trajectory again = rollout(spec, cfg.initial_state, sol.policies);
  CHECK(max_state_change(again, sol.trajectory) <= 1e-12);
  for (int k = 0; k < kNumAgents; ++k)
    CHECK((sol.policies[k].action(0, cfg.initial_state) - sol.first_action(k)).norm() <= 1e-12);
}

TEST_CASE("intersection game is symmetric under swapping the agents") {
  ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  cfg.initial_state = (Vector(4) << -8.0, 6.0, -7.0, 5.5).finished();
  const GameSpec spec = make_scenario(cfg);
  const IlqOptions options;
  const IlqSolution a = solve_ilq(spec, cfg.initial_state, IntentPair::scalar(25.0, 40.0), options);
  const IlqSolution b = solve_ilq(spec, mirror(cfg.initial_state), IntentPair::scalar(40.0, 25.0), options);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  double gap = 0.0;
  for (std::size_t t = 0; t < a.trajectory.states.size(); ++t)
    gap = std::max(gap, (a.trajectory.states[t] - mirror(b.trajectory.states[t])).cwiseAbs().maxCoeff());
  CHECK(gap <= options.trajectory_tolerance);
}

TEST_CASE("complete-information intersection run keeps the vehicles apart") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const GameSpec spec = make_scenario(cfg);
  const IlqSolution sol = solve_ilq(spec, cfg.initial_state, cfg.true_intents);
  double min_d = 1e9;
  for (const Vector& s : sol.trajectory.states) min_d = std::min(min_d, std::hypot(s(0), s(2)));
  CHECK(min_d > cfg.collision_radius);
  CHECK(sol.trajectory.states.back()(0) > 1.0);
  CHECK(sol.trajectory.states.back()(2) > 1.0);
}

TEST_CASE("warm start from a solution reconverges immediately") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kLaneMerge);
  const GameSpec spec = make_scenario(cfg);
  IlqOptions options;
  options.max_iterations = 200;
  const IlqSolution sol = solve_ilq(spec, cfg.initial_state, cfg.true_intents, options);
  REQUIRE(sol.converged);
  const IlqSolution again = solve_ilq(spec, cfg.initial_state, cfg.true_intents, {}, &sol.policies);
  CHECK(again.converged);
  CHECK(again.iterations <= 2);
  CHECK(max_state_change(again.trajectory, sol.trajectory) <= 1e-3);
}

TEST_CASE("diverging warm start falls back to the zero policy") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const GameSpec spec = make_scenario(cfg);
  PolicyPair bad{AffinePolicy::zero(spec.horizon_steps, 4, 1), AffinePolicy::zero(spec.horizon_steps, 4, 1)};
  bad[0].feedforward[0] = Vector::Constant(1, -1e12);
  const IlqSolution sol = solve_ilq(spec, cfg.initial_state, cfg.true_intents, {}, &bad);
  const IlqSolution cold = solve_ilq(spec, cfg.initial_state, cfg.true_intents);
  CHECK(sol.converged);
  CHECK(max_state_change(sol.trajectory, cold.trajectory) <= 1e-12);
}

TEST_CASE("every scenario's nominal game converges from a cold start") {
  // The lander and lane-merge games need more than the default cap from the
  // zero policy; receding-horizon steps after the first are warm started.
  IlqOptions options;
  options.max_iterations = 200;
  for (ScenarioId id : {ScenarioId::kLunarLander, ScenarioId::kLaneMerge, ScenarioId::kIntersection,
                        ScenarioId::kLinearLander}) {
    const ScenarioConfig cfg = ScenarioConfig::defaults(id);
    const IlqSolution sol =
        solve_ilq(make_scenario(cfg), cfg.initial_state, cfg.true_intents, options);
    CHECK(sol.converged);
  }
}

TEST_CASE("solve_ilq rejects bad inputs") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const GameSpec spec = make_scenario(cfg);
  CHECK_THROWS_AS(solve_ilq(spec, Vector::Zero(3), cfg.true_intents), ContractError);
  CHECK_THROWS_AS(solve_ilq(spec, cfg.initial_state, IntentPair(Vector::Zero(2), Vector::Zero(1))),
                  ContractError);
  IlqOptions bad;
  bad.min_step_scale = 2.0;
  CHECK_THROWS_AS(solve_ilq(spec, cfg.initial_state, cfg.true_intents, bad), ContractError);
}

TEST_CASE("linearization uses forward Euler Jacobians and psd state costs") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kLaneMerge);
  const GameSpec spec = make_scenario(cfg);
  const IlqSolution sol = solve_ilq(spec, cfg.initial_state, cfg.true_intents);
  const LqApprox lq = linearize_quadratize(spec, sol.trajectory, cfg.true_intents);
  const int t = 5;
  const Vector& s = sol.trajectory.states[t];
  const DynamicsJacobians j =
      spec.dynamics->jacobians(s, sol.trajectory.actions[0][t], sol.trajectory.actions[1][t]);
  CHECK((lq.stages[t].dynamics - (Matrix::Identity(6, 6) + spec.dt * j.state)).norm() <= 1e-14);
  CHECK((lq.stages[t].input[1] - spec.dt * j.action[1]).norm() <= 1e-14);
  for (int k = 0; k < kNumAgents; ++k) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(lq.stages[t].state_cost[k]);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
  }
}
