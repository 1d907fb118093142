#pragma once

#include "npace/game_core.hpp"

namespace npace {

// ds/dt = A s + B1 a1 + B2 a2 + c
class LinearDynamics final : public DynamicsModel {
 public:
  LinearDynamics(Matrix a, Matrix b1, Matrix b2, Vector drift = {});

  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int action_dim(int agent) const override {
    return static_cast<int>(b_[agent].cols());
  }
  Vector vector_field(const Vector& s, const Vector& a1,
                      const Vector& a2) const override;
  DynamicsJacobians jacobians(const Vector& s, const Vector& a1,
                              const Vector& a2) const override;

 private:
  Matrix a_;
  std::array<Matrix, kNumAgents> b_;
  Vector drift_;
};

// Planar lander without gravity. State (x, y, phi, vx, vy, omega); agent 0
// commands thrust F along the body axis, agent 1 commands torque T.
class LunarLanderDynamics final : public DynamicsModel {
 public:
  int state_dim() const override { return 6; }
  int action_dim(int) const override { return 1; }
  Vector vector_field(const Vector& s, const Vector& a1,
                      const Vector& a2) const override;
  DynamicsJacobians jacobians(const Vector& s, const Vector& a1,
                              const Vector& a2) const override;
};

// Straight-lane double integrator (agent 0) and a unicycle (agent 1).
// State (x1, v1, x2, y2, phi2, v2); actions a1 and (a2, delta2).
class LaneMergeDynamics final : public DynamicsModel {
 public:
  int state_dim() const override { return 6; }
  int action_dim(int agent) const override { return agent == 0 ? 1 : 2; }
  Vector vector_field(const Vector& s, const Vector& a1,
                      const Vector& a2) const override;
  DynamicsJacobians jacobians(const Vector& s, const Vector& a1,
                              const Vector& a2) const override;
};

}  // namespace npace
