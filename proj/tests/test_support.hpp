#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include "npace/costs.hpp"
#include "npace/dynamics.hpp"
#include "npace/ilq_game.hpp"
#include "npace/intent_comm.hpp"
#include "npace/lq_game.hpp"

#include <random>

namespace npace::testing {

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale);
}

inline Matrix random_spd(std::mt19937_64& rng, int n, double floor) {
  const Matrix g = random_matrix(rng, n, n);
  return g * g.transpose() / n + floor * Matrix::Identity(n, n);
}

inline Matrix random_psd(std::mt19937_64& rng, int n) {
  const Matrix g = random_matrix(rng, n, std::max(1, n / 2));
  return g * g.transpose();
}

// Random LQ game with mildly stable dynamics, PSD state costs, SPD
// own-action costs and PSD cross-action costs.
inline LqApprox random_lq(std::mt19937_64& rng, int n, int m0, int m1, int horizon,
                          bool terminal = false) {
  const std::array<int, kNumAgents> m{m0, m1};
  LqApprox lq;
  for (int t = 0; t < horizon; ++t) {
    LqStage s;
    s.dynamics = Matrix::Identity(n, n) + random_matrix(rng, n, n, 0.2);
    for (int k = 0; k < kNumAgents; ++k) {
      s.input[k] = random_matrix(rng, n, m[k], 0.5);
      s.state_cost[k] = random_psd(rng, n);
      s.state_linear[k] = random_vector(rng, n);
      for (int j = 0; j < kNumAgents; ++j) {
        s.action_cost[k][j] = j == k ? random_spd(rng, m[j], 0.5) : random_psd(rng, m[j]) * 0.3;
        s.action_linear[k][j] = random_vector(rng, m[j]);
      }
    }
    lq.stages.push_back(std::move(s));
  }
  if (terminal) {
    for (int k = 0; k < kNumAgents; ++k) {
      lq.terminal_cost[k] = random_psd(rng, n);
      lq.terminal_linear[k] = random_vector(rng, n);
    }
  }
  return lq;
}

// Agent k's best response to the peer's fixed affine policy
// da^j = -Pj ds - aj: single-agent Riccati recursion on the closed loop.
struct BestResponse {
  std::vector<Matrix> gain;
  std::vector<Vector> feedforward;
};

inline BestResponse best_response(const LqApprox& lq, int k, const std::vector<Matrix>& peer_gain,
                                  const std::vector<Vector>& peer_ff) {
  const int j = other(k);
  const int T = lq.horizon();
  const int n = lq.state_dim();
  Matrix z = lq.terminal_cost[k].size() ? lq.terminal_cost[k] : Matrix::Zero(n, n);
  Vector zeta = lq.terminal_linear[k].size() ? lq.terminal_linear[k] : Vector::Zero(n);
  BestResponse out;
  out.gain.resize(T);
  out.feedforward.resize(T);
  for (int t = T - 1; t >= 0; --t) {
    const LqStage& s = lq.stages[t];
    const Matrix a = s.dynamics - s.input[j] * peer_gain[t];
    const Vector c = -s.input[j] * peer_ff[t];
    const Matrix& b = s.input[k];
    const Matrix& rkk = s.action_cost[k][k];
    const Matrix& rkj = s.action_cost[k][j];
    // Stage state cost including the peer's action cost through its policy.
    const Matrix q = s.state_cost[k] + peer_gain[t].transpose() * rkj * peer_gain[t];
    const Vector l = s.state_linear[k] + peer_gain[t].transpose() * (rkj * peer_ff[t]) -
                     peer_gain[t].transpose() * s.action_linear[k][j];
    const Matrix h = rkk + b.transpose() * z * b;
    const Matrix g = b.transpose() * z * a;
    const Vector f = s.action_linear[k][k] + b.transpose() * (z * c + zeta);
    const Eigen::LDLT<Matrix> ldlt(h);
    out.gain[t] = ldlt.solve(g);
    out.feedforward[t] = ldlt.solve(f);
    const Matrix acl = a - b * out.gain[t];
    const Vector ccl = c - b * out.feedforward[t];
    const Matrix znew = q + out.gain[t].transpose() * rkk * out.gain[t] + acl.transpose() * z * acl;
    const Vector zetanew = l + out.gain[t].transpose() * (rkk * out.feedforward[t]) -
                           out.gain[t].transpose() * s.action_linear[k][k] +
                           acl.transpose() * (z * ccl + zeta);
    z = 0.5 * (znew + znew.transpose());
    zeta = zetanew;
  }
  return out;
}

// Total cost of agent k for a deviation rollout from ds0 under affine
// policies, and its gradient w.r.t. agent k's open-loop action perturbation
// at step t (computed by forward/adjoint pass on the closed loop).
inline double lq_total_cost(const LqApprox& lq, int k,
                            const std::array<std::vector<Matrix>, kNumAgents>& gain,
                            const std::array<std::vector<Vector>, kNumAgents>& ff,
                            const Vector& ds0, int perturb_t = -1, const Vector& delta = {}) {
  Vector ds = ds0;
  double cost = 0.0;
  for (int t = 0; t < lq.horizon(); ++t) {
    const LqStage& s = lq.stages[t];
    std::array<Vector, kNumAgents> da;
    for (int i = 0; i < kNumAgents; ++i) da[i] = -gain[i][t] * ds - ff[i][t];
    if (t == perturb_t) da[k] += delta;
    cost += 0.5 * ds.dot(s.state_cost[k] * ds) + s.state_linear[k].dot(ds);
    for (int i = 0; i < kNumAgents; ++i)
      cost += 0.5 * da[i].dot(s.action_cost[k][i] * da[i]) + s.action_linear[k][i].dot(da[i]);
    ds = s.dynamics * ds + s.input[0] * da[0] + s.input[1] * da[1];
  }
  if (lq.terminal_cost[k].size()) cost += 0.5 * ds.dot(lq.terminal_cost[k] * ds);
  if (lq.terminal_linear[k].size()) cost += lq.terminal_linear[k].dot(ds);
  return cost;
}

// d J^k / d da^k_t for each t along the deviation rollout from ds0, with
// every other action following the affine policies. The gradient comes from
// the closed-loop value of agent k (policy evaluation, not Riccati).
inline std::vector<Vector> lq_action_gradients(const LqApprox& lq, int k,
                                 const std::array<std::vector<Matrix>, kNumAgents>& gain,
                                 const std::array<std::vector<Vector>, kNumAgents>& ff,
                                 const Vector& ds0) {
  const int T = lq.horizon();
  const int n = lq.state_dim();
  std::vector<Matrix> z(T + 1);
  std::vector<Vector> zeta(T + 1);
  z[T] = lq.terminal_cost[k].size() ? lq.terminal_cost[k] : Matrix::Zero(n, n);
  zeta[T] = lq.terminal_linear[k].size() ? lq.terminal_linear[k] : Vector::Zero(n);
  for (int t = T - 1; t >= 0; --t) {
    const LqStage& s = lq.stages[t];
    Matrix acl = s.dynamics;
    Vector c = Vector::Zero(n);
    Matrix zt = s.state_cost[k];
    Vector lt = s.state_linear[k];
    for (int i = 0; i < kNumAgents; ++i) {
      acl -= s.input[i] * gain[i][t];
      c -= s.input[i] * ff[i][t];
      zt += gain[i][t].transpose() * s.action_cost[k][i] * gain[i][t];
      lt += gain[i][t].transpose() * (s.action_cost[k][i] * ff[i][t] - s.action_linear[k][i]);
    }
    z[t] = zt + acl.transpose() * z[t + 1] * acl;
    zeta[t] = lt + acl.transpose() * (z[t + 1] * c + zeta[t + 1]);
  }
  std::vector<Vector> out;
  Vector ds = ds0;
  for (int t = 0; t < T; ++t) {
    const LqStage& s = lq.stages[t];
    std::array<Vector, kNumAgents> da;
    for (int i = 0; i < kNumAgents; ++i) da[i] = -gain[i][t] * ds - ff[i][t];
    const Vector next = s.dynamics * ds + s.input[0] * da[0] + s.input[1] * da[1];
    out.push_back(s.action_cost[k][k] * da[k] + s.action_linear[k][k] +
                  s.input[k].transpose() * (z[t + 1] * next + zeta[t + 1]));
    ds = next;
  }
  return out;
}

inline double lq_action_gradient(const LqApprox& lq, int k,
                                 const std::array<std::vector<Matrix>, kNumAgents>& gain,
                                 const std::array<std::vector<Vector>, kNumAgents>& ff,
                                 const Vector& ds0) {
  double worst = 0.0;
  for (const Vector& g : lq_action_gradients(lq, k, gain, ff, ds0))
    worst = std::max(worst, g.cwiseAbs().maxCoeff());
  return worst;
}

// Quadratic-form game on linear dynamics, exactly LQ in (s, a).
struct LinearQuadraticSetup {
  GameSpec spec;
  Vector s0;
};

inline LinearQuadraticSetup random_lq_spec(std::mt19937_64& rng, int n, int m0, int m1,
                                           int horizon, double dt = 0.1) {
  const Matrix a = random_matrix(rng, n, n, 0.5);
  const Matrix b0 = random_matrix(rng, n, m0);
  const Matrix b1 = random_matrix(rng, n, m1);
  GameSpec spec;
  spec.state_dim = n;
  spec.action_dims = {m0, m1};
  spec.horizon_steps = horizon;
  spec.dt = dt;
  spec.dynamics = std::make_shared<LinearDynamics>(a, b0, b1);
  spec.intent_dims = {1, 1};
  const StackLayout layout = spec.layout();
  const int nz = layout.size();
  for (int k = 0; k < kNumAgents; ++k) {
    Matrix h = Matrix::Zero(nz, nz);
    h.topLeftCorner(n, n) = random_psd(rng, n);
    const int mk = spec.action_dims[k];
    h.block(layout.action_offset(k), layout.action_offset(k), mk, mk) = random_spd(rng, mk, 0.5);
    const int mj = spec.action_dims[other(k)];
    h.block(layout.action_offset(other(k)), layout.action_offset(other(k)), mj, mj) =
        0.2 * random_psd(rng, mj);
    Vector lin = Vector::Zero(nz);
    lin.head(n) = random_vector(rng, n);
    Matrix intent_lin = Matrix::Zero(nz, 1);
    intent_lin.topRows(n) = random_vector(rng, n);
    auto cost = std::make_shared<CompositeCost>(layout);
    cost->emplace<QuadraticFormTerm>(h, lin, intent_lin, k);
    spec.costs[k] = cost;
  }
  spec.validate();
  return {spec, random_vector(rng, n)};
}

// Random one-step teaching problem with a Bayesian peer learner: the peer's
// estimate of the ego intent is off the truth and its prediction of the ego
// action is off the nominal one.
inline TeachingProblem random_teaching_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 2);
  std::uniform_real_distribution<double> var(0.5, 25.0);
  const int m = dim(rng), p = dim(rng);
  TeachingProblem problem;
  problem.ego = dim(rng) - 1;
  problem.nominal = random_vector(rng, m);
  problem.cost_hessian = random_spd(rng, m, 0.2);
  problem.true_intent = random_vector(rng, p, 5.0);
  problem.peer_belief_of_self = GaussianBelief{problem.true_intent + random_vector(rng, p, 5.0),
                                               var(rng) * Matrix::Identity(p, p), 0.5};
  problem.peer_learner = LearnerConfig{};
  problem.predicted = problem.nominal + random_vector(rng, m, 0.5);
  problem.jacobian = PolicyJacobian{random_matrix(rng, m, p, 0.3)};
  return problem;
}

// Largest gap between the ILQ policy and the LQ Nash policy around the
// zero-action rollout, both written as a = -G s + c.
inline double ilq_lq_policy_gap(const GameSpec& spec, const Vector& s0, const IntentPair& intents,
                                const IlqSolution& sol) {
  const PolicyPair zero{AffinePolicy::zero(spec.horizon_steps, spec.state_dim, spec.action_dims[0]),
                        AffinePolicy::zero(spec.horizon_steps, spec.state_dim, spec.action_dims[1])};
  const Trajectory base = rollout(spec, s0, zero);
  const LqSolution lq = solve_lq_nash(linearize_quadratize(spec, base, intents));
  double gap = 0.0;
  for (int k = 0; k < kNumAgents; ++k) {
    const AffinePolicy& p = sol.policies[k];
    for (int t = 0; t < spec.horizon_steps; ++t) {
      gap = std::max(gap, (p.gain[t] - lq.gain[k][t]).cwiseAbs().maxCoeff());
      const Vector ilq_offset = -p.feedforward[t] + p.gain[t] * p.reference[t];
      const Vector lq_offset = lq.gain[k][t] * base.states[t] - lq.feedforward[k][t];
      gap = std::max(gap, (ilq_offset - lq_offset).cwiseAbs().maxCoeff());
    }
  }
  return gap;
}

// Action sensitivity of a linear-quadratic game to agent k's intent: the
// feedforward is linear in the first-order cost terms, so solving the LQ
// game with only the intent-derivative of those terms gives it exactly.
inline Matrix lq_sensitivity(const GameSpec& spec, const IlqSolution& sol, int k) {
  IntentPair unit = sol.intents;
  unit[k](0) += 1.0;
  const LqApprox a = linearize_quadratize(spec, sol.trajectory, sol.intents);
  LqApprox d = linearize_quadratize(spec, sol.trajectory, unit);
  for (int t = 0; t < d.horizon(); ++t) {
    for (int i = 0; i < kNumAgents; ++i) {
      d.stages[t].state_linear[i] -= a.stages[t].state_linear[i];
      for (int j = 0; j < kNumAgents; ++j)
        d.stages[t].action_linear[i][j] -= a.stages[t].action_linear[i][j];
    }
  }
  const LqSolution sens = solve_lq_nash(d);
  return -sens.feedforward[k][0];
}

}  // namespace npace::testing
