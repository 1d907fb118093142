#pragma once

// Two-player general-sum game primitives: dynamics, parameterized stage
// costs, trajectories, affine feedback policies, rollout and cost evaluation.

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace npace {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kNumAgents = 2;
constexpr int other(int agent) { return 1 - agent; }

// Violated preconditions (dimension mismatch, non-finite inputs, bad options).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure inside a solver; carries the failing time step when known.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, int step = -1)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class DivergedRollout : public SolverError {
 public:
  using SolverError::SolverError;
};

// Intent parameters of both agents, indexed by agent (0 or 1).
struct IntentPair {
  std::array<Vector, kNumAgents> theta;

  IntentPair() = default;
  IntentPair(Vector first, Vector second)
      : theta{std::move(first), std::move(second)} {}

  static IntentPair scalar(double first, double second);

  const Vector& operator[](int agent) const { return theta[agent]; }
  Vector& operator[](int agent) { return theta[agent]; }

  // Exact (bitwise) comparison; used as a solve-cache key.
  bool operator==(const IntentPair& rhs) const;
};

// Closed axis-aligned box; lower < upper componentwise.
struct IntentBox {
  Vector lower;
  Vector upper;

  Vector clamp(const Vector& theta) const;
  bool contains(const Vector& theta) const;
  double width(int component) const { return upper(component) - lower(component); }
};

struct DynamicsJacobians {
  Matrix state;                           // n x n
  std::array<Matrix, kNumAgents> action;  // n x m_k
};

// Continuous-time vector field ds/dt = f(s, a1, a2) with analytic Jacobians.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int state_dim() const = 0;
  virtual int action_dim(int agent) const = 0;

  virtual Vector vector_field(const Vector& s, const Vector& a1,
                              const Vector& a2) const = 0;
  virtual DynamicsJacobians jacobians(const Vector& s, const Vector& a1,
                                      const Vector& a2) const = 0;
};

// Offsets of the stacked variable z = (s, a1, a2) used by cost expansions.
struct StackLayout {
  int state_dim = 0;
  std::array<int, kNumAgents> action_dims{};

  int size() const { return state_dim + action_dims[0] + action_dims[1]; }
  int action_offset(int agent) const {
    return agent == 0 ? state_dim : state_dim + action_dims[0];
  }
  Vector stack(const Vector& s, const Vector& a1, const Vector& a2) const;
};

// Value, gradient and Hessian of a stage cost w.r.t. z = (s, a1, a2).
struct CostExpansion {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

// Stage cost g(s, a1, a2; theta). The full intent pair is passed because a
// cost may depend on the peer's intent too (shared-goal games); most costs
// read only their owner's component.
class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual double evaluate(const Vector& s, const Vector& a1, const Vector& a2,
                          const IntentPair& intents) const = 0;
  virtual CostExpansion expand(const Vector& s, const Vector& a1,
                               const Vector& a2,
                               const IntentPair& intents) const = 0;
  // Gradient w.r.t. intents[agent].
  virtual Vector intent_gradient(const Vector& s, const Vector& a1,
                                 const Vector& a2, const IntentPair& intents,
                                 int agent) const = 0;
};

struct GameSpec {
  int state_dim = 0;
  std::array<int, kNumAgents> action_dims{};
  int horizon_steps = 0;
  double dt = 0.0;
  std::shared_ptr<const DynamicsModel> dynamics;
  std::array<std::shared_ptr<const CostModel>, kNumAgents> costs;
  std::array<int, kNumAgents> intent_dims{};
  std::array<std::optional<IntentBox>, kNumAgents> intent_bounds;

  // Throws ContractError when an invariant does not hold.
  void validate() const;

  StackLayout layout() const { return {state_dim, action_dims}; }

  // Same game over a different number of steps (receding horizon).
  GameSpec with_horizon(int steps) const;

  // Forward-Euler step s + dt * f(s, a1, a2).
  Vector step(const Vector& s, const Vector& a1, const Vector& a2) const;
};

struct Trajectory {
  std::vector<Vector> states;                            // horizon + 1
  std::array<std::vector<Vector>, kNumAgents> actions;  // horizon each

  int horizon() const { return static_cast<int>(actions[0].size()); }
};

// Time-varying affine policy a_t = -alpha_t - P_t (s - s*_t).
struct AffinePolicy {
  std::vector<Vector> feedforward;  // alpha_t
  std::vector<Matrix> gain;         // P_t
  std::vector<Vector> reference;    // s*_t

  int horizon() const { return static_cast<int>(feedforward.size()); }
  Vector action(int t, const Vector& s) const {
    return -feedforward[t] - gain[t] * (s - reference[t]);
  }

  static AffinePolicy zero(int horizon, int state_dim, int action_dim);

  // Drops the first `steps` entries (warm start for the next receding step).
  AffinePolicy shifted(int steps) const;
};

using PolicyPair = std::array<AffinePolicy, kNumAgents>;

// Forward rollout over spec.horizon_steps. Throws DivergedRollout carrying the
// step index when a state becomes non-finite or exceeds the norm guard.
Trajectory rollout(const GameSpec& spec, const Vector& s0,
                   const PolicyPair& policies);

// Sum of agent's stage costs over steps [begin, end) of the trajectory; end < 0
// means the full horizon.
double eval_cost(const GameSpec& spec, const Trajectory& traj, int agent,
                 const IntentPair& intents, int begin = 0, int end = -1);

inline constexpr double kDivergenceNorm = 1e6;

}  // namespace npace
