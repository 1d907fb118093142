#include "doctest.h"
#include "test_support.hpp"

#include "npace/scenarios.hpp"

#include <cmath>

using namespace npace;
using namespace npace::testing;

namespace {

const ScenarioId kAll[] = {ScenarioId::kLunarLander, ScenarioId::kLaneMerge,
                           ScenarioId::kIntersection, ScenarioId::kLinearLander};

Vector stacked_point(std::mt19937_64& rng, const GameSpec& spec) {
  return random_vector(rng, spec.layout().size(), 1.5);
}

}  // namespace

TEST_CASE("cost expansions match finite differences on every scenario") {
  std::mt19937_64 rng(21);
  for (ScenarioId id : kAll) {
    const ScenarioConfig cfg = ScenarioConfig::defaults(id);
    const GameSpec spec = make_scenario(cfg);
    const StackLayout layout = spec.layout();
    const int n = layout.state_dim;
    for (int trial = 0; trial < 5; ++trial) {
      const Vector z = stacked_point(rng, spec);
      const auto split = [&](const Vector& v) {
        return std::array<Vector, 3>{v.head(n), v.segment(n, layout.action_dims[0]),
                                     v.tail(layout.action_dims[1])};
      };
      for (int k = 0; k < kNumAgents; ++k) {
        const auto p = split(z);
        const CostExpansion e = spec.costs[k]->expand(p[0], p[1], p[2], cfg.true_intents);
        CHECK(e.value == doctest::Approx(spec.costs[k]->evaluate(p[0], p[1], p[2], cfg.true_intents)));
        const double h = 1e-5;
        for (int i = 0; i < z.size(); ++i) {
          Vector zp = z, zm = z;
          zp(i) += h;
          zm(i) -= h;
          const auto pp = split(zp), pm = split(zm);
          const double fd = (spec.costs[k]->evaluate(pp[0], pp[1], pp[2], cfg.true_intents) -
                             spec.costs[k]->evaluate(pm[0], pm[1], pm[2], cfg.true_intents)) /
                            (2 * h);
          CHECK(e.gradient(i) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
          const Vector gfd =
              (spec.costs[k]->expand(pp[0], pp[1], pp[2], cfg.true_intents).gradient -
               spec.costs[k]->expand(pm[0], pm[1], pm[2], cfg.true_intents).gradient) /
              (2 * h);
          CHECK((e.hessian.col(i) - gfd).norm() <= 1e-5 * std::max(1.0, gfd.norm()));
        }
        CHECK((e.hessian - e.hessian.transpose()).norm() <= 1e-12 * std::max(1.0, e.hessian.norm()));
        for (int a = 0; a < kNumAgents; ++a) {
          const Vector g = spec.costs[k]->intent_gradient(p[0], p[1], p[2], cfg.true_intents, a);
          for (int i = 0; i < g.size(); ++i) {
            IntentPair up = cfg.true_intents, down = cfg.true_intents;
            up[a](i) += h;
            down[a](i) -= h;
            const double fd = (spec.costs[k]->evaluate(p[0], p[1], p[2], up) -
                               spec.costs[k]->evaluate(p[0], p[1], p[2], down)) /
                              (2 * h);
            CHECK(g(i) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
          }
        }
      }
    }
  }
}

TEST_CASE("dynamics jacobians match finite differences") {
  std::mt19937_64 rng(22);
  for (ScenarioId id : kAll) {
    const GameSpec spec = make_scenario(ScenarioConfig::defaults(id));
    const int n = spec.state_dim;
    const Vector s = random_vector(rng, n);
    const Vector a1 = random_vector(rng, spec.action_dims[0]);
    const Vector a2 = random_vector(rng, spec.action_dims[1]);
    const DynamicsJacobians j = spec.dynamics->jacobians(s, a1, a2);
    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
      Vector sp = s, sm = s;
      sp(i) += h;
      sm(i) -= h;
      const Vector fd = (spec.dynamics->vector_field(sp, a1, a2) -
                         spec.dynamics->vector_field(sm, a1, a2)) / (2 * h);
      CHECK((j.state.col(i) - fd).norm() <= 1e-7);
    }
    for (int i = 0; i < a1.size(); ++i) {
      Vector p = a1, m = a1;
      p(i) += h;
      m(i) -= h;
      const Vector fd =
          (spec.dynamics->vector_field(s, p, a2) - spec.dynamics->vector_field(s, m, a2)) / (2 * h);
      CHECK((j.action[0].col(i) - fd).norm() <= 1e-7);
    }
    for (int i = 0; i < a2.size(); ++i) {
      Vector p = a2, m = a2;
      p(i) += h;
      m(i) -= h;
      const Vector fd =
          (spec.dynamics->vector_field(s, a1, p) - spec.dynamics->vector_field(s, a1, m)) / (2 * h);
      CHECK((j.action[1].col(i) - fd).norm() <= 1e-7);
    }
  }
}

TEST_CASE("intersection proximity term at the safety distance") {
  ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  cfg.true_intents = IntentPair::scalar(30.0, 40.0);
  const GameSpec spec = make_scenario(cfg);
  // x1^2 + y2^2 = d_safe with x1 = 1.
  const double x1 = 1.0;
  const double y2 = -std::sqrt(cfg.d_safe - x1 * x1);
  Vector s(4);
  s << x1, 0.0, y2, 0.0;
  const Vector a = Vector::Zero(1);
  const CostExpansion e = spec.costs[0]->expand(s, a, a, cfg.true_intents);
  // Remaining terms: 2 (x1 - 8) from the target; proximity: -10 theta * 2 x1.
  CHECK(e.gradient(0) == doctest::Approx(2.0 * (x1 - 8.0) - 10.0 * 30.0 * 2.0 * x1));
  const double base = (x1 - 8.0) * (x1 - 8.0);
  CHECK(spec.costs[0]->evaluate(s, a, a, cfg.true_intents) == doctest::Approx(base + 10.0 * 30.0));
  // One unit further out the unsquared exponent gives 10 theta / e.
  Vector far(4);
  far << 0.0, 0.0, -std::sqrt(cfg.d_safe + 1.0), 0.0;
  CHECK(spec.costs[0]->evaluate(far, a, a, cfg.true_intents) ==
        doctest::Approx(64.0 + 10.0 * 30.0 * std::exp(-1.0)));
}

TEST_CASE("lane-merge proximity weight equals theta at the safety distance") {
  ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kLaneMerge);
  const GameSpec spec = make_scenario(cfg);
  Vector s = Vector::Zero(6);
  s(3) = std::sqrt(cfg.d_safe);
  const Vector z1 = Vector::Zero(1), z2 = Vector::Zero(2);
  const double with = spec.costs[0]->evaluate(s, z1, z2, cfg.true_intents);
  IntentPair zero = cfg.true_intents;
  zero[0](0) = 0.0;
  const double without = spec.costs[0]->evaluate(s, z1, z2, zero);
  CHECK(with - without == doctest::Approx(cfg.true_intents[0](0)));
}

TEST_CASE("rollout follows the policy and forward Euler") {
  std::mt19937_64 rng(23);
  const auto setup = random_lq_spec(rng, 3, 1, 2, 6);
  PolicyPair policies{AffinePolicy::zero(6, 3, 1), AffinePolicy::zero(6, 3, 2)};
  policies[0].feedforward[2] = Vector::Constant(1, 0.5);
  policies[1].gain[1] = random_matrix(rng, 2, 3);
  const Trajectory traj = rollout(setup.spec, setup.s0, policies);
  REQUIRE(traj.states.size() == 7);
  Vector s = setup.s0;
  for (int t = 0; t < 6; ++t) {
    const Vector a0 = policies[0].action(t, s);
    const Vector a1 = policies[1].action(t, s);
    CHECK((traj.actions[0][t] - a0).norm() == 0.0);
    CHECK((traj.actions[1][t] - a1).norm() == 0.0);
    const Vector next = s + setup.spec.dt * setup.spec.dynamics->vector_field(s, a0, a1);
    CHECK((traj.states[t + 1] - next).norm() <= 1e-14 * std::max(1.0, next.norm()));
    s = next;
  }
  double cost = 0.0;
  const IntentPair intents = IntentPair::scalar(0.3, -0.2);
  for (int t = 2; t < 5; ++t)
    cost += setup.spec.costs[1]->evaluate(traj.states[t], traj.actions[0][t], traj.actions[1][t], intents);
  CHECK(eval_cost(setup.spec, traj, 1, intents, 2, 5) == doctest::Approx(cost));
}

TEST_CASE("rollout divergence carries the step index") {
  GameSpec spec = make_scenario(ScenarioConfig::defaults(ScenarioId::kIntersection));
  spec.horizon_steps = 5;
  PolicyPair policies{AffinePolicy::zero(5, 4, 1), AffinePolicy::zero(5, 4, 1)};
  policies[0].feedforward[3] = Vector::Constant(1, -1e9);
  try {
    rollout(spec, ScenarioConfig::defaults(ScenarioId::kIntersection).initial_state, policies);
    FAIL("expected divergence");
  } catch (const DivergedRollout& e) {
    // Index of the first offending state.
    CHECK(e.step() == 4);
  }
}

TEST_CASE("shifted policy drops leading steps") {
  AffinePolicy p = AffinePolicy::zero(4, 2, 1);
  for (int t = 0; t < 4; ++t) p.feedforward[t] = Vector::Constant(1, t);
  const AffinePolicy q = p.shifted(1);
  REQUIRE(q.horizon() == 3);
  CHECK(q.feedforward[0](0) == 1.0);
  CHECK(q.feedforward[2](0) == 3.0);
}

TEST_CASE("intent box clamp and contains") {
  const IntentBox box{Vector::Constant(1, 20.0), Vector::Constant(1, 50.0)};
  CHECK(box.clamp(Vector::Constant(1, 10.0))(0) == 20.0);
  CHECK(box.clamp(Vector::Constant(1, 60.0))(0) == 50.0);
  CHECK(box.contains(Vector::Constant(1, 35.0)));
  CHECK_FALSE(box.contains(Vector::Constant(1, 51.0)));
}

TEST_CASE("game spec validation rejects inconsistent dimensions") {
  GameSpec spec = make_scenario(ScenarioConfig::defaults(ScenarioId::kIntersection));
  CHECK_NOTHROW(spec.validate());
  GameSpec bad = spec;
  bad.action_dims[0] = 2;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = spec;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK(spec.with_horizon(7).horizon_steps == 7);
}

TEST_CASE("intent pair equality is bitwise") {
  CHECK(IntentPair::scalar(1.0, 2.0) == IntentPair::scalar(1.0, 2.0));
  CHECK_FALSE(IntentPair::scalar(1.0, 2.0) == IntentPair::scalar(1.0, std::nextafter(2.0, 3.0)));
}

TEST_CASE("scenario configs reject bad horizons and constants") {
  ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  CHECK(cfg.steps() == 50);
  cfg.horizon_seconds = 5.05;
  CHECK_THROWS_AS(cfg.steps(), ContractError);
  cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  cfg.d_safe = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  CHECK_THROWS_AS(scenario_from_string("roundabout"), ContractError);
}

TEST_CASE("intersection sampler is deterministic and inside the box") {
  const auto a = sample_intersection_intents(50, 20.0, 50.0, 9);
  const auto b = sample_intersection_intents(50, 20.0, 50.0, 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
    CHECK(a[i].first >= 20.0);
    CHECK(a[i].second < 50.0);
  }
}
