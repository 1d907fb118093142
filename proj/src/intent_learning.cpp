#include "npace/intent_learning.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace npace {
namespace {

// Policy of `agent` at (state, t) for the LQ game re-expanded around the
// frozen trajectory with different intents.
Vector frozen_policy_action(const GameSpec& spec, const IlqSolution& solution,
                            const IntentPair& intents, const IlqOptions& ilq,
                            const Vector& state, int t, int agent) {
  const LqApprox lq = linearize_quadratize(spec, solution.trajectory, intents);
  const LqSolution lq_sol = solve_lq_nash(lq, ilq.lq);
  const Trajectory& traj = solution.trajectory;
  return traj.actions[agent][t] -
         lq_sol.gain[agent][t] * (state - traj.states[t]) -
         lq_sol.feedforward[agent][t];
}

Vector unfrozen_policy_action(const GameSpec& spec, const IlqSolution& solution,
                              const IntentPair& intents, const IlqOptions& ilq,
                              const Vector& state, int t, int agent) {
  const IlqSolution resolved = solve_ilq(spec, solution.trajectory.states.front(),
                                         intents, ilq, &solution.policies);
  return resolved.policies[agent].action(t, state);
}

}  // namespace

PolicyJacobian policy_jacobian(const GameSpec& spec, const IlqSolution& solution,
                               const Vector& state, int t, int agent,
                               const JacobianOptions& options) {
  if (t < 0 || t >= solution.trajectory.horizon())
    throw ContractError("policy_jacobian: step outside the solved horizon");
  if (state.size() != spec.state_dim)
    throw ContractError("policy_jacobian: state has wrong dimension");
  const GameSpec local = spec.with_horizon(solution.trajectory.horizon());
  const Vector& theta = solution.intents[agent];
  const int p = static_cast<int>(theta.size());
  PolicyJacobian jac{Matrix::Zero(spec.action_dims[agent], p)};

  for (int i = 0; i < p; ++i) {
    const double h = options.relative_step * std::max(1.0, std::abs(theta(i)));
    IntentPair plus = solution.intents;
    IntentPair minus = solution.intents;
    plus[agent](i) += h;
    minus[agent](i) -= h;
    Vector up, down;
    if (options.mode == JacobianMode::kFrozen) {
      up = frozen_policy_action(local, solution, plus, options.ilq, state, t, agent);
      down = frozen_policy_action(local, solution, minus, options.ilq, state, t, agent);
    } else {
      up = unfrozen_policy_action(local, solution, plus, options.ilq, state, t, agent);
      down = unfrozen_policy_action(local, solution, minus, options.ilq, state, t, agent);
    }
    jac.matrix.col(i) = (up - down) / (2.0 * h);
  }
  if (!jac.matrix.allFinite())
    throw SolverError("policy_jacobian: non-finite sensitivity", t);
  return jac;
}

Vector gradient_update(const GradientLearner& learner, const Vector& estimate,
                       const Vector& predicted, const Vector& observed,
                       const PolicyJacobian& jac) {
  if (!(learner.learning_rate > 0.0))
    throw ContractError("gradient_update: learning rate must be positive");
  if (predicted.size() != observed.size() ||
      jac.matrix.rows() != predicted.size() ||
      jac.matrix.cols() != estimate.size())
    throw ContractError("gradient_update: dimension mismatch");
  if (!estimate.allFinite() || !predicted.allFinite() || !observed.allFinite() ||
      !jac.matrix.allFinite())
    throw ContractError("gradient_update: non-finite input");
  Vector next = estimate - learner.learning_rate * jac.matrix.transpose() *
                               (predicted - observed);
  if (learner.clamp) next = learner.clamp->clamp(next);
  return next;
}

GaussianBelief GaussianBelief::scalar(double mean, double variance,
                                      double noise_std) {
  return {Vector::Constant(1, mean), Matrix::Constant(1, 1, variance), noise_std};
}

void GaussianBelief::validate() const {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw ContractError("GaussianBelief: covariance has wrong shape");
  if (!(action_noise_std > 0.0))
    throw ContractError("GaussianBelief: noise std must be positive");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * (1.0 + covariance.cwiseAbs().maxCoeff()))
    throw ContractError("GaussianBelief: covariance is not symmetric");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw ContractError("GaussianBelief: covariance is not positive definite");
}

GaussianBelief bayes_update(const GaussianBelief& belief,
                            const Vector& predicted, const Vector& observed,
                            const PolicyJacobian& jac,
                            const std::optional<IntentBox>& clamp) {
  belief.validate();
  const Matrix& j = jac.matrix;
  const Matrix& sigma = belief.covariance;
  const int m = static_cast<int>(predicted.size());
  if (observed.size() != m || j.rows() != m || j.cols() != belief.mean.size())
    throw ContractError("bayes_update: dimension mismatch");
  if (!predicted.allFinite() || !observed.allFinite() || !j.allFinite())
    throw ContractError("bayes_update: non-finite input");

  const double noise = belief.action_noise_std * belief.action_noise_std;
  const Matrix innovation =
      noise * Matrix::Identity(m, m) + j * sigma * j.transpose();
  Eigen::LLT<Matrix> llt(innovation);
  if (llt.info() != Eigen::Success)
    throw SolverError("bayes_update: innovation covariance is not invertible");
  // G = Sigma J' S^-1
  const Matrix gain = llt.solve(j * sigma).transpose();

  GaussianBelief next = belief;
  next.mean = belief.mean + gain * (observed - predicted);
  const Matrix updated = sigma - gain * j * sigma;
  next.covariance = 0.5 * (updated + updated.transpose());
  if (clamp) next.mean = clamp->clamp(next.mean);
  return next;
}

GaussianBelief learner_update(const LearnerConfig& learner,
                              const GaussianBelief& belief,
                              const Vector& predicted, const Vector& observed,
                              const PolicyJacobian& jac,
                              const std::optional<IntentBox>& clamp) {
  if (learner.kind == LearnerKind::kBayes)
    return bayes_update(belief, predicted, observed, jac, clamp);
  GaussianBelief next = belief;
  next.mean = gradient_update({learner.learning_rate, clamp}, belief.mean,
                              predicted, observed, jac);
  return next;
}

}  // namespace npace
