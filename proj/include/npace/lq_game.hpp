#pragma once

// Finite-horizon two-player linear-quadratic game, feedback Nash equilibrium
// via the coupled backward (Riccati) recursion.
//
// Deviation-coordinate model at step t:
//   ds_{t+1} = A_t ds_t + B_t^0 da^0_t + B_t^1 da^1_t
//   stage cost of agent k:
//     1/2 ds'Q^k ds + l^k'ds + sum_j (1/2 da^j'R^{kj} da^j + r^{kj}'da^j)
// plus an optional terminal state cost 1/2 ds_T'Q_T^k ds_T + l_T^k'ds_T
// (zero in the iterative solver, whose costs are running costs only).

#include "npace/game_core.hpp"

#include <array>
#include <vector>

namespace npace {

struct LqStage {
  Matrix dynamics;                            // A_t
  std::array<Matrix, kNumAgents> input;       // B_t^k
  std::array<Matrix, kNumAgents> state_cost;  // Q_t^k
  std::array<Vector, kNumAgents> state_linear;                              // l_t^k
  std::array<std::array<Matrix, kNumAgents>, kNumAgents> action_cost;    // R_t^{kj}
  std::array<std::array<Vector, kNumAgents>, kNumAgents> action_linear;  // r_t^{kj}
};

struct LqApprox {
  std::vector<LqStage> stages;
  // Terminal cost; empty members mean zero.
  std::array<Matrix, kNumAgents> terminal_cost;
  std::array<Vector, kNumAgents> terminal_linear;

  int horizon() const { return static_cast<int>(stages.size()); }
  int state_dim() const { return static_cast<int>(stages.front().dynamics.rows()); }
  int action_dim(int agent) const {
    return static_cast<int>(stages.front().input[agent].cols());
  }
};

struct LqOptions {
  // Own-action costs get lambda*I with lambda = scale * (1 + trace(R)/m).
  double regularization_scale = 1e-6;
  // Reciprocal condition estimate of the stacked gain system below which
  // the step is declared singular.
  double min_reciprocal_condition = 1e-12;
};

struct LqSolution {
  // Deviation policies da^k_t = -gain[k][t] ds_t - feedforward[k][t].
  std::array<std::vector<Matrix>, kNumAgents> gain;
  std::array<std::vector<Vector>, kNumAgents> feedforward;
  // Quadratic value functions V_t^k(ds) = 1/2 ds'Z ds + zeta'ds (+ const),
  // t = 0..horizon, the last entry being the terminal value.
  std::array<std::vector<Matrix>, kNumAgents> value_hessian;
  std::array<std::vector<Vector>, kNumAgents> value_gradient;
};

// The game actually solved: own-action blocks regularized per LqOptions.
LqApprox regularized(const LqApprox& lq, const LqOptions& options = {});

// Throws ContractError for indefinite or asymmetric own-action costs and
// SolverError (with the step index) when the coupled gain system is singular.
LqSolution solve_lq_nash(const LqApprox& lq, const LqOptions& options = {});

// Nearest symmetric positive semidefinite matrix (eigenvalues clamped at 0).
Matrix project_psd(const Matrix& m);

}  // namespace npace
