#include "npace/costs.hpp"

#include <cmath>

namespace npace {

double QuadraticTerm::value(const Vector& z, const IntentPair& intents) const {
  const double e = z(index_) - target_.value(intents);
  return weight_ * e * e;
}

void QuadraticTerm::accumulate(const Vector& z, const IntentPair& intents,
                               Vector& gradient, Matrix& hessian) const {
  const double e = z(index_) - target_.value(intents);
  gradient(index_) += 2.0 * weight_ * e;
  hessian(index_, index_) += 2.0 * weight_;
}

void QuadraticTerm::accumulate_intent(const Vector& z,
                                      const IntentPair& intents, int agent,
                                      Vector& out) const {
  if (target_.intent_agent != agent) return;
  const double e = z(index_) - target_.value(intents);
  out(target_.intent_component) -= 2.0 * weight_ * e;
}

QuadraticFormTerm::QuadraticFormTerm(Matrix hessian, Vector linear,
                                     Matrix intent_linear, int intent_agent)
    : hessian_(std::move(hessian)),
      linear_(std::move(linear)),
      intent_linear_(std::move(intent_linear)),
      intent_agent_(intent_agent) {
  if (hessian_.rows() != hessian_.cols() || linear_.size() != hessian_.rows())
    throw ContractError("QuadraticFormTerm: inconsistent dimensions");
  if (intent_agent_ >= 0 && intent_linear_.rows() != linear_.size())
    throw ContractError("QuadraticFormTerm: intent map has wrong row count");
}

Vector QuadraticFormTerm::linear(const IntentPair& intents) const {
  if (intent_agent_ < 0) return linear_;
  return linear_ + intent_linear_ * intents[intent_agent_];
}

double QuadraticFormTerm::value(const Vector& z,
                                const IntentPair& intents) const {
  return 0.5 * z.dot(hessian_ * z) + linear(intents).dot(z);
}

void QuadraticFormTerm::accumulate(const Vector& z, const IntentPair& intents,
                                   Vector& gradient, Matrix& hessian) const {
  // Symmetric part only; the quadratic form ignores the skew part anyway.
  const Matrix sym = 0.5 * (hessian_ + hessian_.transpose());
  gradient += sym * z + linear(intents);
  hessian += sym;
}

void QuadraticFormTerm::accumulate_intent(const Vector& z, const IntentPair&,
                                          int agent, Vector& out) const {
  if (agent != intent_agent_) return;
  out += intent_linear_.transpose() * z;
}

ProximityTerm::ProximityTerm(std::vector<Pair> pairs, double d_safe,
                             double scale, Target weight,
                             bool squared_exponent)
    : pairs_(std::move(pairs)),
      d_safe_(d_safe),
      scale_(scale),
      weight_(weight),
      squared_(squared_exponent) {}

double ProximityTerm::distance(const Vector& z) const {
  double d = 0.0;
  for (const auto& [i, j] : pairs_) {
    const double diff = j < 0 ? z(i) : z(i) - z(j);
    d += diff * diff;
  }
  return d;
}

double ProximityTerm::exponent(double d) const {
  const double e = d - d_safe_;
  return squared_ ? e * e : e;
}

double ProximityTerm::value(const Vector& z, const IntentPair& intents) const {
  return scale_ * weight_.value(intents) * std::exp(-exponent(distance(z)));
}

void ProximityTerm::accumulate(const Vector& z, const IntentPair& intents,
                               Vector& gradient, Matrix& hessian) const {
  const double d = distance(z);
  const double e = d - d_safe_;
  const double c = scale_ * weight_.value(intents) * std::exp(-exponent(d));
  // phi' and phi'' of the exponent w.r.t. d.
  const double dphi = squared_ ? 2.0 * e : 1.0;
  const double ddphi = squared_ ? 2.0 : 0.0;

  const int dim = static_cast<int>(z.size());
  Vector grad_d = Vector::Zero(dim);
  Matrix hess_d = Matrix::Zero(dim, dim);
  for (const auto& [i, j] : pairs_) {
    if (j < 0) {
      grad_d(i) += 2.0 * z(i);
      hess_d(i, i) += 2.0;
    } else {
      const double diff = z(i) - z(j);
      grad_d(i) += 2.0 * diff;
      grad_d(j) -= 2.0 * diff;
      hess_d(i, i) += 2.0;
      hess_d(j, j) += 2.0;
      hess_d(i, j) -= 2.0;
      hess_d(j, i) -= 2.0;
    }
  }
  gradient += -c * dphi * grad_d;
  hessian += c * ((dphi * dphi - ddphi) * grad_d * grad_d.transpose() -
                  dphi * hess_d);
}

void ProximityTerm::accumulate_intent(const Vector& z, const IntentPair&,
                                      int agent, Vector& out) const {
  if (weight_.intent_agent != agent) return;
  out(weight_.intent_component) += scale_ * std::exp(-exponent(distance(z)));
}

double CompositeCost::evaluate(const Vector& s, const Vector& a1,
                               const Vector& a2,
                               const IntentPair& intents) const {
  const Vector z = layout_.stack(s, a1, a2);
  double total = 0.0;
  for (const auto& term : terms_) total += term->value(z, intents);
  return total;
}

CostExpansion CompositeCost::expand(const Vector& s, const Vector& a1,
                                    const Vector& a2,
                                    const IntentPair& intents) const {
  const Vector z = layout_.stack(s, a1, a2);
  CostExpansion out;
  out.gradient = Vector::Zero(layout_.size());
  out.hessian = Matrix::Zero(layout_.size(), layout_.size());
  for (const auto& term : terms_) {
    out.value += term->value(z, intents);
    term->accumulate(z, intents, out.gradient, out.hessian);
  }
  return out;
}

Vector CompositeCost::intent_gradient(const Vector& s, const Vector& a1,
                                      const Vector& a2,
                                      const IntentPair& intents,
                                      int agent) const {
  const Vector z = layout_.stack(s, a1, a2);
  Vector out = Vector::Zero(intents[agent].size());
  for (const auto& term : terms_)
    term->accumulate_intent(z, intents, agent, out);
  return out;
}

}  // namespace npace
