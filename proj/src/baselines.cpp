#include "npace/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <utility>

namespace npace {

void MinMaxConfig::validate() const {
  if (!(tolerance > 0.0)) throw ContractError("MinMaxConfig: tolerance must be positive");
  if (max_evaluations < 3 || sweeps < 1)
    throw ContractError("MinMaxConfig: too few evaluations or sweeps");
  for (const auto& box : boxes) {
    if (box && ((box->upper - box->lower).array() < 0.0).any())
      throw ContractError("MinMaxConfig: empty opponent box");
  }
}

double minmax_value(const GameSpec& spec, const Vector& state, int t, int agent,
                    const Vector& own_intent, const Vector& peer_intent,
                    const IlqOptions& ilq, const PolicyPair* warm,
                    IlqSolution* solution) {
  const GameSpec local = spec.with_horizon(spec.horizon_steps - t);
  IntentPair intents;
  intents[agent] = own_intent;
  intents[other(agent)] = peer_intent;
  IlqSolution sol = solve_ilq(local, state, intents, ilq, warm);
  const double value = eval_cost(local, sol.trajectory, agent, intents);
  if (solution != nullptr) *solution = std::move(sol);
  return value;
}

namespace {

constexpr double kInvPhi = 0.6180339887498948482;

struct Search {
  const GameSpec& spec;
  const Vector& state;
  int t;
  int agent;
  const Vector& own;
  const IlqOptions& ilq;
  const PolicyPair* warm;
  MinMaxResult& result;
  bool have_best = false;

  double evaluate(const Vector& theta) {
    ++result.evaluations;
    IlqSolution sol;
    double value;
    try {
      value = minmax_value(spec, state, t, agent, own, theta, ilq, warm, &sol);
    } catch (const SolverError&) {
      ++result.failures;
      return -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(value)) {
      ++result.failures;
      return -std::numeric_limits<double>::infinity();
    }
    if (!have_best || value > result.worst_value) {
      have_best = true;
      result.worst_value = value;
      result.worst_case = theta;
      result.solution = std::move(sol);
    }
    return value;
  }

  // Golden-section maximization along component i, other components fixed
  // at `base`.
  void line(Vector base, int i, double lo, double hi, const MinMaxConfig& cfg) {
    const auto at = [&](double x) {
      base(i) = x;
      return evaluate(base);
    };
    at(lo);
    if (hi == lo) return;
    at(hi);
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = at(c);
    double fd = at(d);
    while (b - a > cfg.tolerance && result.evaluations < cfg.max_evaluations) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = at(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = at(d);
      }
    }
  }
};

}  // namespace

MinMaxResult minmax_action(const GameSpec& spec, const Vector& state, int t,
                           int agent, const Vector& own_intent,
                           const MinMaxConfig& config, const IlqOptions& ilq,
                           const PolicyPair* warm) {
  config.validate();
  const int peer = other(agent);
  const std::optional<IntentBox>& box =
      config.boxes[peer] ? config.boxes[peer] : spec.intent_bounds[peer];
  if (!box) throw ContractError("minmax_action: no opponent intent box");
  if (box->lower.size() != spec.intent_dims[peer])
    throw ContractError("minmax_action: box dimension mismatch");

  MinMaxResult result;
  Search search{spec, state, t, agent, own_intent, ilq, warm, result};
  const int p = static_cast<int>(box->lower.size());
  Vector base = 0.5 * (box->lower + box->upper);
  const int sweeps = p == 1 ? 1 : config.sweeps;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int i = 0; i < p; ++i) {
      search.line(base, i, box->lower(i), box->upper(i), config);
      if (search.have_best) base = result.worst_case;
    }
  }
  if (!search.have_best)
    throw SolverError("minmax_action: every candidate solve failed", t);
  result.action = result.solution.policies[agent].action(0, state);
  return result;
}

void EkfConfig::validate() const {
  if (!(process_noise >= 0.0) || !(observation_noise > 0.0) ||
      !(prior_variance > 0.0) || !(policy_prior_variance > 0.0) || !(reinflation > 0.0))
    throw ContractError("EkfConfig: noise and prior scales must be positive");
}

PeerPolicyModel PeerPolicyModel::initial(int peer, int state_dim, int action_dim,
                                         const Vector& theta_hat,
                                         const EkfConfig& config, const Matrix& gain,
                                         const Vector& bias) {
  config.validate();
  PeerPolicyModel model;
  model.peer = peer;
  model.state_dim = state_dim;
  model.action_dim = action_dim;
  model.intent_dim = static_cast<int>(theta_hat.size());
  const int count = model.intent_dim + action_dim * state_dim + action_dim;
  model.mean = Vector::Zero(count);
  model.mean.head(model.intent_dim) = theta_hat;
  if (gain.size() != 0) {
    if (gain.rows() != action_dim || gain.cols() != state_dim)
      throw ContractError("PeerPolicyModel: gain has wrong shape");
    model.mean.segment(model.intent_dim, action_dim * state_dim) =
        Eigen::Map<const Vector>(gain.data(), gain.size());
  }
  if (bias.size() != 0) {
    if (bias.size() != action_dim) throw ContractError("PeerPolicyModel: bias has wrong size");
    model.mean.tail(action_dim) = bias;
  }
  model.covariance = config.policy_prior_variance * Matrix::Identity(count, count);
  model.covariance.topLeftCorner(model.intent_dim, model.intent_dim) =
      config.prior_variance * Matrix::Identity(model.intent_dim, model.intent_dim);
  return model;
}

PeerPolicyModel seeded_peer_model(const GameSpec& spec, const Vector& state, int agent,
                                  const Vector& own_intent, const Vector& theta_hat,
                                  const PeerGoalFn& goal, const EkfConfig& config,
                                  const IlqOptions& ilq) {
  const int peer = other(agent);
  IntentPair intents;
  intents[agent] = own_intent;
  intents[peer] = theta_hat;
  const IlqSolution sol = solve_ilq(spec, state, intents, ilq);
  const Matrix gain = -sol.policies[peer].gain[0];
  const Vector bias = sol.first_action(peer) - gain * (state - goal(theta_hat).state);
  return PeerPolicyModel::initial(peer, spec.state_dim, spec.action_dims[peer], theta_hat,
                                  config, gain, bias);
}

Matrix PeerPolicyModel::gain() const {
  return Eigen::Map<const Matrix>(mean.data() + intent_dim, action_dim, state_dim);
}

Vector PeerPolicyModel::action(const Vector& s, const PeerGoalFn& goal) const {
  return gain() * (s - goal(theta_hat()).state) + bias();
}

Matrix PeerPolicyModel::observation_jacobian(const Vector& s,
                                             const PeerGoalFn& goal) const {
  const PeerGoal g = goal(theta_hat());
  const Vector offset = s - g.state;
  Matrix h = Matrix::Zero(action_dim, mean.size());
  h.leftCols(intent_dim) = -gain() * g.jacobian;
  // d(K x)/d vec(K) = x' (kron) I
  for (int col = 0; col < state_dim; ++col)
    h.block(0, intent_dim + col * action_dim, action_dim, action_dim) =
        offset(col) * Matrix::Identity(action_dim, action_dim);
  h.rightCols(action_dim) = Matrix::Identity(action_dim, action_dim);
  return h;
}

EkfResult ekf_update(const PeerPolicyModel& model, const PeerGoalFn& goal,
                     const Vector& s, const Vector& observed,
                     const EkfConfig& config) {
  config.validate();
  if (s.size() != model.state_dim || observed.size() != model.action_dim)
    throw ContractError("ekf_update: dimension mismatch");
  const int count = static_cast<int>(model.mean.size());
  EkfResult out{model, Vector(), false};
  Matrix p = model.covariance + config.process_noise * Matrix::Identity(count, count);

  const Matrix h = model.observation_jacobian(s, goal);
  out.innovation = observed - model.action(s, goal);
  const Matrix innovation_cov =
      h * p * h.transpose() +
      config.observation_noise * Matrix::Identity(model.action_dim, model.action_dim);
  Eigen::LLT<Matrix> llt(innovation_cov);
  if (llt.info() != Eigen::Success)
    throw SolverError("ekf_update: innovation covariance is not invertible");
  const Matrix gain = llt.solve(h * p).transpose();
  out.model.mean = model.mean + gain * out.innovation;
  Matrix updated = p - gain * h * p;
  updated = 0.5 * (updated + updated.transpose());

  Eigen::LLT<Matrix> check(updated);
  if (check.info() != Eigen::Success || !updated.allFinite()) {
    updated = config.reinflation * Matrix::Identity(count, count);
    out.reinflated = true;
  }
  out.model.covariance = std::move(updated);
  return out;
}

namespace {

// Maps the reduced stack (s, a_ego, dummy) to the game stack (s, a0, a1)
// with the peer action replaced by the affine model K (s - g) + b.
struct ClosedLoopMap {
  int ego;
  int n;
  std::array<int, kNumAgents> dims;  // real action dimensions
  Matrix k;
  Vector g;
  Vector b;

  Vector peer_action(const Vector& s) const { return k * (s - g) + b; }

  std::array<Vector, kNumAgents> actions(const Vector& s, const Vector& a0,
                                         const Vector& a1) const {
    std::array<Vector, kNumAgents> out;
    out[ego] = ego == 0 ? a0 : a1;
    out[other(ego)] = peer_action(s);
    return out;
  }

  // d(game stack)/d(reduced stack)
  Matrix stack_jacobian() const {
    const StackLayout full{n, dims};
    std::array<int, kNumAgents> reduced_dims = dims;
    reduced_dims[other(ego)] = 1;
    const StackLayout reduced{n, reduced_dims};
    Matrix t = Matrix::Zero(full.size(), reduced.size());
    t.topLeftCorner(n, n).setIdentity();
    t.block(full.action_offset(ego), reduced.action_offset(ego), dims[ego], dims[ego])
        .setIdentity();
    t.block(full.action_offset(other(ego)), 0, dims[other(ego)], n) = k;
    return t;
  }
};

class ClosedLoopDynamics final : public DynamicsModel {
 public:
  ClosedLoopDynamics(std::shared_ptr<const DynamicsModel> base, ClosedLoopMap map)
      : base_(std::move(base)), map_(std::move(map)) {}

  int state_dim() const override { return map_.n; }
  int action_dim(int agent) const override {
    return agent == map_.ego ? map_.dims[agent] : 1;
  }

  Vector vector_field(const Vector& s, const Vector& a0,
                      const Vector& a1) const override {
    const auto a = map_.actions(s, a0, a1);
    return base_->vector_field(s, a[0], a[1]);
  }

  DynamicsJacobians jacobians(const Vector& s, const Vector& a0,
                              const Vector& a1) const override {
    const auto a = map_.actions(s, a0, a1);
    const DynamicsJacobians base = base_->jacobians(s, a[0], a[1]);
    const int peer = other(map_.ego);
    DynamicsJacobians out;
    out.state = base.state + base.action[peer] * map_.k;
    out.action[map_.ego] = base.action[map_.ego];
    out.action[peer] = Matrix::Zero(map_.n, 1);
    return out;
  }

 private:
  std::shared_ptr<const DynamicsModel> base_;
  ClosedLoopMap map_;
};

class ClosedLoopCost final : public CostModel {
 public:
  ClosedLoopCost(std::shared_ptr<const CostModel> base, ClosedLoopMap map)
      : base_(std::move(base)), map_(std::move(map)), t_(map_.stack_jacobian()) {}

  double evaluate(const Vector& s, const Vector& a0, const Vector& a1,
                  const IntentPair& intents) const override {
    const auto a = map_.actions(s, a0, a1);
    return base_->evaluate(s, a[0], a[1], intents);
  }

  CostExpansion expand(const Vector& s, const Vector& a0, const Vector& a1,
                       const IntentPair& intents) const override {
    const auto a = map_.actions(s, a0, a1);
    const CostExpansion base = base_->expand(s, a[0], a[1], intents);
    CostExpansion out;
    out.value = base.value;
    out.gradient = t_.transpose() * base.gradient;
    out.hessian = t_.transpose() * base.hessian * t_;
    return out;
  }

  Vector intent_gradient(const Vector& s, const Vector& a0, const Vector& a1,
                         const IntentPair& intents, int agent) const override {
    const auto a = map_.actions(s, a0, a1);
    return base_->intent_gradient(s, a[0], a[1], intents, agent);
  }

 private:
  std::shared_ptr<const CostModel> base_;
  ClosedLoopMap map_;
  Matrix t_;
};

// The placeholder peer of the reduced game pays for its (inert) action only.
class DummyCost final : public CostModel {
 public:
  DummyCost(int agent, StackLayout layout) : agent_(agent), layout_(layout) {}

  double evaluate(const Vector&, const Vector& a0, const Vector& a1,
                  const IntentPair&) const override {
    const Vector& a = agent_ == 0 ? a0 : a1;
    return a.squaredNorm();
  }

  CostExpansion expand(const Vector& s, const Vector& a0, const Vector& a1,
                       const IntentPair& intents) const override {
    CostExpansion out;
    out.value = evaluate(s, a0, a1, intents);
    out.gradient = Vector::Zero(layout_.size());
    out.hessian = Matrix::Zero(layout_.size(), layout_.size());
    const int off = layout_.action_offset(agent_);
    const Vector& a = agent_ == 0 ? a0 : a1;
    out.gradient.segment(off, a.size()) = 2.0 * a;
    out.hessian.block(off, off, a.size(), a.size()).diagonal().setConstant(2.0);
    return out;
  }

  Vector intent_gradient(const Vector&, const Vector&, const Vector&,
                         const IntentPair& intents, int agent) const override {
    return Vector::Zero(intents[agent].size());
  }

 private:
  int agent_;
  StackLayout layout_;
};

}  // namespace

IlqSolution mpc_solve(const GameSpec& spec, const Vector& state, int t, int agent,
                      const Vector& own_intent, const PeerPolicyModel& model,
                      const PeerGoalFn& goal, const IlqOptions& ilq,
                      const PolicyPair* warm) {
  const int peer = other(agent);
  if (model.peer != peer || model.state_dim != spec.state_dim ||
      model.action_dim != spec.action_dims[peer])
    throw ContractError("mpc_solve: peer model does not fit the game");
  const Vector theta_hat = model.theta_hat();
  ClosedLoopMap map{agent, spec.state_dim, spec.action_dims, model.gain(),
                    goal(theta_hat).state, model.bias()};

  GameSpec reduced = spec.with_horizon(spec.horizon_steps - t);
  reduced.action_dims[peer] = 1;
  reduced.dynamics = std::make_shared<ClosedLoopDynamics>(spec.dynamics, map);
  reduced.costs[agent] = std::make_shared<ClosedLoopCost>(spec.costs[agent], map);
  reduced.costs[peer] = std::make_shared<DummyCost>(peer, reduced.layout());

  IntentPair intents;
  intents[agent] = own_intent;
  intents[peer] = theta_hat;
  return solve_ilq(reduced, state, intents, ilq, warm);
}

}  // namespace npace
