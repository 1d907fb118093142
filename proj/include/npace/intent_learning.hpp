#pragma once

// Learning dynamics for a peer's intent: the plain gradient rule and its
// Gaussian-belief (Bayesian) counterpart, together with the policy Jacobian
// both rules need.

#include "npace/game_core.hpp"
#include "npace/ilq_game.hpp"

#include <optional>

namespace npace {

// d(pi^k_t)/d(theta^k), m_k x p_k.
struct PolicyJacobian {
  Matrix matrix;
};

enum class JacobianMode {
  // Re-solve only the LQ game around the converged trajectory (default).
  kFrozen,
  // Finite differences through complete ILQ re-solves; reference only.
  kUnfrozen,
};

struct JacobianOptions {
  JacobianMode mode = JacobianMode::kFrozen;
  // Central-difference step h = relative_step * max(1, |theta_i|).
  double relative_step = 1e-4;
  // Used by the unfrozen mode's re-solves.
  IlqOptions ilq;
};

// Sensitivity of `agent`'s policy at (s_t, t) to that agent's own intent in
// the game `solution` was solved for. Solver failures propagate.
PolicyJacobian policy_jacobian(const GameSpec& spec, const IlqSolution& solution,
                               const Vector& state, int t, int agent,
                               const JacobianOptions& options = {});

struct GradientLearner {
  double learning_rate = 0.1;
  std::optional<IntentBox> clamp;
};

// theta' = clamp(theta - rate * J'(predicted - observed))
Vector gradient_update(const GradientLearner& learner, const Vector& estimate,
                       const Vector& predicted, const Vector& observed,
                       const PolicyJacobian& jac);

struct GaussianBelief {
  Vector mean;
  Matrix covariance;
  // Observation noise R = sigma^2 I on the peer's action.
  double action_noise_std = 0.5;

  static GaussianBelief scalar(double mean, double variance, double noise_std);
  void validate() const;
};

// Linear-Gaussian measurement update with the policy Jacobian as the
// observation matrix. The covariance is re-symmetrized; the mean is clamped
// into `clamp` when given.
GaussianBelief bayes_update(const GaussianBelief& belief,
                            const Vector& predicted, const Vector& observed,
                            const PolicyJacobian& jac,
                            const std::optional<IntentBox>& clamp = std::nullopt);

enum class LearnerKind { kBayes, kGradient };

struct LearnerConfig {
  LearnerKind kind = LearnerKind::kBayes;
  // Gradient learner only; the Bayesian learner's step comes from the belief.
  double learning_rate = 0.1;
};

// One update of `belief` by the configured learner. The gradient learner
// moves the mean only.
GaussianBelief learner_update(const LearnerConfig& learner,
                              const GaussianBelief& belief,
                              const Vector& predicted, const Vector& observed,
                              const PolicyJacobian& jac,
                              const std::optional<IntentBox>& clamp);

}  // namespace npace
