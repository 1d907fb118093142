#include "doctest.h"
#include "test_support.hpp"

#include "npace/npace.hpp"
#include "npace/scenarios.hpp"

using namespace npace;
using namespace npace::testing;

namespace {

struct Drive {
  std::vector<EstimatorState> states;
  std::vector<StepRecord> records;
};

// Runs the first `steps` receding-horizon steps of a scenario directly
// through npace_step.
Drive drive(const ScenarioConfig& cfg, Method method, int steps, double eta = 1.0) {
  const GameSpec spec = make_scenario(cfg);
  NpaceOptions options;
  options.method = method;
  options.teaching.eta = eta;
  options.intent_bounds = cfg.intent_bounds;
  EstimatorState est =
      EstimatorState::shared(cfg.initial_estimates, cfg.prior_variance, cfg.action_noise_std);
  WarmStarts warm;
  Vector s = cfg.initial_state;
  Drive out;
  out.states.push_back(est);
  for (int t = 0; t < steps; ++t) {
    StepResult r = npace_step(spec, s, t, cfg.true_intents, est, options, &warm);
    s = spec.step(s, r.actions[0], r.actions[1]);
    est = r.next;
    out.states.push_back(est);
    out.records.push_back(r.record);
  }
  return out;
}

void check_shared(const EstimatorState& est) {
  CHECK(est.tracked_pair(0) == est.tracked_pair(1));
  for (int k = 0; k < kNumAgents; ++k)
    CHECK(est.agents[k].self_model.covariance == est.agents[other(k)].peer.covariance);
}

}  // namespace

TEST_CASE("npace agents keep identical estimate ledgers") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  for (Method m : {Method::kNpace, Method::kNpaceComm}) {
    const Drive d = drive(cfg, m, 8);
    for (const EstimatorState& est : d.states) check_shared(est);
  }
}

TEST_CASE("expert baseline ledgers drift apart from the shared ones") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  REQUIRE(!(cfg.initial_estimates == cfg.true_intents));
  const Drive npace = drive(cfg, Method::kNpace, 3);
  const Drive expert = drive(cfg, Method::kExpert, 3);
  // The expert never updates its model of the peer's belief about itself.
  for (int k = 0; k < kNumAgents; ++k)
    CHECK(expert.states.back().agents[k].self_model.mean == cfg.initial_estimates[k]);
  bool differs = false;
  for (int k = 0; k < kNumAgents; ++k)
    differs = differs || !(npace.records.back().estimates[k] == expert.records.back().estimates[k]);
  CHECK(differs);
}

TEST_CASE("complete information records no estimates") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const Drive d = drive(cfg, Method::kComplete, 2);
  for (const StepRecord& r : d.records) {
    CHECK(r.estimates[0].size() == 0);
    CHECK(r.estimation_ms == 0.0);
  }
}

TEST_CASE("bayesian ledgers only shrink along a run") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kLaneMerge);
  const Drive d = drive(cfg, Method::kNpace, 6);
  for (std::size_t i = 1; i < d.states.size(); ++i) {
    for (int k = 0; k < kNumAgents; ++k) {
      const Matrix diff = d.states[i - 1].agents[k].peer.covariance - d.states[i].agents[k].peer.covariance;
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(diff).eigenvalues().minCoeff() >= -1e-12);
    }
  }
}

TEST_CASE("eta = 0 communication reproduces plain npace") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const Drive plain = drive(cfg, Method::kNpace, 3);
  const Drive comm = drive(cfg, Method::kNpaceComm, 3, 0.0);
  for (std::size_t t = 0; t < plain.records.size(); ++t)
    for (int k = 0; k < kNumAgents; ++k)
      CHECK(plain.records[t].actions[k] == comm.records[t].actions[k]);
}

TEST_CASE("applied noise is what the learners observe") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const GameSpec spec = make_scenario(cfg);
  NpaceOptions options;
  const EstimatorState est =
      EstimatorState::shared(cfg.initial_estimates, cfg.prior_variance, cfg.action_noise_std);
  const std::array<Vector, kNumAgents> noise{Vector::Constant(1, 0.3), Vector::Constant(1, -0.2)};
  const StepResult clean = npace_step(spec, cfg.initial_state, 0, cfg.true_intents, est, options);
  const StepResult noisy =
      npace_step(spec, cfg.initial_state, 0, cfg.true_intents, est, options, nullptr, &noise);
  for (int k = 0; k < kNumAgents; ++k)
    CHECK((noisy.actions[k] - clean.actions[k] - noise[k]).norm() <= 1e-12);
  CHECK(!(noisy.next.agents[0].peer.mean == clean.next.agents[0].peer.mean));
}

TEST_CASE("npace_step contract") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(ScenarioId::kIntersection);
  const GameSpec spec = make_scenario(cfg);
  const EstimatorState est =
      EstimatorState::shared(cfg.initial_estimates, cfg.prior_variance, cfg.action_noise_std);
  NpaceOptions options;
  for (Method m : {Method::kMinmax, Method::kMpc}) {
    options.method = m;
    CHECK_THROWS_AS(npace_step(spec, cfg.initial_state, 0, cfg.true_intents, est, options),
                    ContractError);
  }
  options.method = Method::kNpace;
  CHECK_THROWS_AS(npace_step(spec, cfg.initial_state, spec.horizon_steps, cfg.true_intents, est, options),
                  ContractError);
  CHECK_THROWS_AS(npace_step(spec, Vector::Zero(2), 0, cfg.true_intents, est, options), ContractError);
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::kComplete, Method::kExpert, Method::kNpace, Method::kNpaceComm, Method::kMinmax,
                   Method::kMpc})
    CHECK(method_from_string(to_string(m)) == m);
  CHECK(method_from_string("npace-comm") == Method::kNpaceComm);
  CHECK_THROWS_AS(method_from_string("oracle"), ContractError);
}
