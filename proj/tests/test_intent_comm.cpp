#include "doctest.h"
#include "test_support.hpp"

#include "npace/intent_comm.hpp"

using namespace npace;
using namespace npace::testing;

TEST_CASE("eta = 0 returns the nominal action exactly") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const TeachingProblem problem = random_teaching_problem(rng);
    const TeachingResult r = teaching_action(problem, TeachingConfig{});
    CHECK(r.action == problem.nominal);
    CHECK(r.stationary);
    CHECK_FALSE(r.fallback);
    CHECK(r.objective == 0.0);
  }
}

TEST_CASE("teaching error is non-increasing in eta") {
  std::mt19937_64 rng(52);
  int stationary = 0, total = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const TeachingProblem problem = random_teaching_problem(rng);
    bool all_stationary = true;
    std::vector<double> errors;
    for (double eta : {0.0, 0.1, 1.0, 10.0}) {
      TeachingConfig cfg;
      cfg.eta = eta;
      const TeachingResult r = teaching_action(problem, cfg);
      all_stationary = all_stationary && r.stationary;
      errors.push_back(r.error);
    }
    ++total;
    if (!all_stationary) continue;
    ++stationary;
    for (std::size_t i = 1; i < errors.size(); ++i) CHECK(errors[i] <= errors[i - 1] + 1e-9);
  }
  CHECK(stationary >= 0.95 * total);
}

TEST_CASE("teaching action stays in the trust region and never worsens the objective") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    const TeachingProblem problem = random_teaching_problem(rng);
    TeachingConfig cfg;
    cfg.eta = 10.0;
    cfg.trust_region = 0.25;
    const TeachingResult r = teaching_action(problem, cfg);
    CHECK((r.action - problem.nominal).lpNorm<Eigen::Infinity>() <= 0.25 + 1e-15);
    CHECK(r.objective <= teaching_objective(problem, cfg.eta, problem.nominal));
    CHECK(r.objective == doctest::Approx(teaching_objective(problem, cfg.eta, r.action)));
    CHECK(r.error == doctest::Approx(teaching_error(problem, r.action)));
  }
}

TEST_CASE("scalar teaching matches the closed-form minimizer") {
  // One action, one intent: the posterior mean is affine in the action, so the
  // objective is a scalar quadratic.
  TeachingProblem problem;
  problem.nominal = Vector::Constant(1, 0.3);
  problem.cost_hessian = Matrix::Constant(1, 1, 2.0);
  problem.true_intent = Vector::Constant(1, 1.0);
  problem.peer_belief_of_self = GaussianBelief::scalar(3.0, 4.0, 0.5);
  problem.predicted = Vector::Constant(1, 0.1);
  problem.jacobian = PolicyJacobian{Matrix::Constant(1, 1, 0.8)};
  const double gain = 4.0 * 0.8 / (0.64 * 4.0 + 0.25);
  // mean(a) = 3 + gain (a - 0.1); error = (mean(a) - 1)^2
  const double eta = 1.0;
  const double a_star =
      (2.0 * 0.3 + 2.0 * eta * gain * (1.0 - 3.0 + gain * 0.1)) / (2.0 + 2.0 * eta * gain * gain);
  TeachingConfig cfg;
  cfg.eta = eta;
  cfg.trust_region = 10.0;
  const TeachingResult r = teaching_action(problem, cfg);
  CHECK(r.stationary);
  CHECK(r.action(0) == doctest::Approx(a_star).epsilon(1e-6));
}

TEST_CASE("non-finite teaching objective falls back to the nominal action") {
  TeachingProblem problem;
  problem.nominal = Vector::Constant(1, 0.0);
  problem.cost_hessian = Matrix::Constant(1, 1, 1.0);
  problem.true_intent = Vector::Constant(1, 0.0);
  problem.peer_belief_of_self = GaussianBelief::scalar(0.0, 1.0, 0.5);
  // The innovation overflows the squared estimation error.
  problem.predicted = Vector::Constant(1, 1e300);
  problem.jacobian = PolicyJacobian{Matrix::Constant(1, 1, 1.0)};
  TeachingConfig cfg;
  cfg.eta = 1.0;
  const TeachingResult r = teaching_action(problem, cfg);
  CHECK(r.fallback);
  CHECK(r.action == problem.nominal);
}

TEST_CASE("teaching config validation") {
  TeachingConfig cfg;
  cfg.eta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = {};
  cfg.trust_region = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = {};
  cfg.max_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}
