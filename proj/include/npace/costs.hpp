#pragma once

// Composable stage costs with analytic derivatives. Every term works on the
// stacked variable z = (s, a1, a2); see StackLayout.

#include "npace/game_core.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace npace {

// Either a constant or a constant plus one intent component.
struct Target {
  double offset = 0.0;
  int intent_agent = -1;  // -1: constant target
  int intent_component = 0;

  static Target constant(double value) { return {value, -1, 0}; }
  static Target intent(int agent, int component = 0) {
    return {0.0, agent, component};
  }

  double value(const IntentPair& intents) const {
    return intent_agent < 0 ? offset
                            : offset + intents[intent_agent](intent_component);
  }
};

class CostTerm {
 public:
  virtual ~CostTerm() = default;

  virtual double value(const Vector& z, const IntentPair& intents) const = 0;
  // Adds this term's gradient/Hessian in z into the accumulators.
  virtual void accumulate(const Vector& z, const IntentPair& intents,
                          Vector& gradient, Matrix& hessian) const = 0;
  // Adds d(term)/d(intents[agent]) into `out`.
  virtual void accumulate_intent(const Vector& z, const IntentPair& intents,
                                 int agent, Vector& out) const = 0;
};

// weight * (z[index] - target)^2
class QuadraticTerm final : public CostTerm {
 public:
  QuadraticTerm(int index, double weight, Target target = Target::constant(0.0))
      : index_(index), weight_(weight), target_(target) {}

  double value(const Vector& z, const IntentPair& intents) const override;
  void accumulate(const Vector& z, const IntentPair& intents, Vector& gradient,
                  Matrix& hessian) const override;
  void accumulate_intent(const Vector& z, const IntentPair& intents, int agent,
                         Vector& out) const override;

 private:
  int index_;
  double weight_;
  Target target_;
};

// 0.5 z'Hz + (h + L theta_agent)'z. Used for linear-quadratic games.
class QuadraticFormTerm final : public CostTerm {
 public:
  QuadraticFormTerm(Matrix hessian, Vector linear, Matrix intent_linear = {},
                    int intent_agent = -1);

  double value(const Vector& z, const IntentPair& intents) const override;
  void accumulate(const Vector& z, const IntentPair& intents, Vector& gradient,
                  Matrix& hessian) const override;
  void accumulate_intent(const Vector& z, const IntentPair& intents, int agent,
                         Vector& out) const override;

 private:
  Vector linear(const IntentPair& intents) const;

  Matrix hessian_;
  Vector linear_;
  Matrix intent_linear_;
  int intent_agent_;
};

// scale * theta * exp(-phi(d)), with d a sum of squared coordinate differences
// and phi(d) = (d - d_safe)^2 (squared) or d - d_safe (linear).
class ProximityTerm final : public CostTerm {
 public:
  // Pair (i, j) contributes (z_i - z_j)^2; j < 0 contributes z_i^2.
  using Pair = std::pair<int, int>;

  ProximityTerm(std::vector<Pair> pairs, double d_safe, double scale,
                Target weight, bool squared_exponent);

  double distance(const Vector& z) const;

  double value(const Vector& z, const IntentPair& intents) const override;
  void accumulate(const Vector& z, const IntentPair& intents, Vector& gradient,
                  Matrix& hessian) const override;
  void accumulate_intent(const Vector& z, const IntentPair& intents, int agent,
                         Vector& out) const override;

 private:
  double exponent(double d) const;

  std::vector<Pair> pairs_;
  double d_safe_;
  double scale_;
  Target weight_;
  bool squared_;
};

// Sum of terms.
class CompositeCost final : public CostModel {
 public:
  explicit CompositeCost(StackLayout layout) : layout_(layout) {}

  CompositeCost& add(std::shared_ptr<const CostTerm> term) {
    terms_.push_back(std::move(term));
    return *this;
  }
  template <typename Term, typename... Args>
  CompositeCost& emplace(Args&&... args) {
    return add(std::make_shared<Term>(std::forward<Args>(args)...));
  }

  double evaluate(const Vector& s, const Vector& a1, const Vector& a2,
                  const IntentPair& intents) const override;
  CostExpansion expand(const Vector& s, const Vector& a1, const Vector& a2,
                       const IntentPair& intents) const override;
  Vector intent_gradient(const Vector& s, const Vector& a1, const Vector& a2,
                         const IntentPair& intents, int agent) const override;

 private:
  StackLayout layout_;
  std::vector<std::shared_ptr<const CostTerm>> terms_;
};

}  // namespace npace
