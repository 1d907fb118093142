#include "npace/dynamics.hpp"

#include <cmath>

namespace npace {

LinearDynamics::LinearDynamics(Matrix a, Matrix b1, Matrix b2, Vector drift)
    : a_(std::move(a)), b_{std::move(b1), std::move(b2)}, drift_(std::move(drift)) {
  if (a_.rows() != a_.cols() || b_[0].rows() != a_.rows() ||
      b_[1].rows() != a_.rows())
    throw ContractError("LinearDynamics: inconsistent dimensions");
  if (drift_.size() == 0) drift_ = Vector::Zero(a_.rows());
  if (drift_.size() != a_.rows())
    throw ContractError("LinearDynamics: drift has wrong dimension");
}

Vector LinearDynamics::vector_field(const Vector& s, const Vector& a1,
                                    const Vector& a2) const {
  return a_ * s + b_[0] * a1 + b_[1] * a2 + drift_;
}

DynamicsJacobians LinearDynamics::jacobians(const Vector&, const Vector&,
                                            const Vector&) const {
  return {a_, {b_[0], b_[1]}};
}

Vector LunarLanderDynamics::vector_field(const Vector& s, const Vector& a1,
                                         const Vector& a2) const {
  const double phi = s(2);
  const double thrust = a1(0);
  Vector out(6);
  out << s(3), s(4), s(5), thrust * std::sin(phi), thrust * std::cos(phi),
      a2(0);
  return out;
}

DynamicsJacobians LunarLanderDynamics::jacobians(const Vector& s,
                                                 const Vector& a1,
                                                 const Vector&) const {
  const double phi = s(2);
  const double thrust = a1(0);
  DynamicsJacobians jac{Matrix::Zero(6, 6), {Matrix::Zero(6, 1), Matrix::Zero(6, 1)}};
  jac.state(0, 3) = 1.0;
  jac.state(1, 4) = 1.0;
  jac.state(2, 5) = 1.0;
  jac.state(3, 2) = thrust * std::cos(phi);
  jac.state(4, 2) = -thrust * std::sin(phi);
  jac.action[0](3, 0) = std::sin(phi);
  jac.action[0](4, 0) = std::cos(phi);
  jac.action[1](5, 0) = 1.0;
  return jac;
}

Vector LaneMergeDynamics::vector_field(const Vector& s, const Vector& a1,
                                       const Vector& a2) const {
  const double phi = s(4);
  const double speed = s(5);
  Vector out(6);
  out << s(1), a1(0), speed * std::cos(phi), speed * std::sin(phi), a2(1),
      a2(0);
  return out;
}

DynamicsJacobians LaneMergeDynamics::jacobians(const Vector& s, const Vector&,
                                               const Vector&) const {
  const double phi = s(4);
  const double speed = s(5);
  DynamicsJacobians jac{Matrix::Zero(6, 6), {Matrix::Zero(6, 1), Matrix::Zero(6, 2)}};
  jac.state(0, 1) = 1.0;
  jac.state(2, 4) = -speed * std::sin(phi);
  jac.state(2, 5) = std::cos(phi);
  jac.state(3, 4) = speed * std::cos(phi);
  jac.state(3, 5) = std::sin(phi);
  jac.action[0](1, 0) = 1.0;
  jac.action[1](5, 0) = 1.0;
  jac.action[1](4, 1) = 1.0;
  return jac;
}

}  // namespace npace
