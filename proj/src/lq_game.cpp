#include "npace/lq_game.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/Cholesky>

#include <string>

namespace npace {
namespace {

void check_own_cost(const Matrix& r, int step) {
  const double scale = 1.0 + r.cwiseAbs().maxCoeff();
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ContractError("solve_lq_nash: own-action cost is not symmetric at step " +
                        std::to_string(step));
  }
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) {
    throw ContractError(
        "solve_lq_nash: own-action cost is not positive definite at step " +
        std::to_string(step));
  }
}

}  // namespace

LqApprox regularized(const LqApprox& lq, const LqOptions& options) {
  LqApprox out = lq;
  if (options.regularization_scale <= 0.0) return out;
  for (LqStage& stage : out.stages) {
    for (int k = 0; k < kNumAgents; ++k) {
      Matrix& r = stage.action_cost[k][k];
      const double m = static_cast<double>(r.rows());
      const double lambda = options.regularization_scale * (1.0 + r.trace() / m);
      r.diagonal().array() += lambda;
    }
  }
  return out;
}

LqSolution solve_lq_nash(const LqApprox& input, const LqOptions& options) {
  if (input.stages.empty()) throw ContractError("solve_lq_nash: empty horizon");
  const LqApprox lq = regularized(input, options);

  const int horizon = lq.horizon();
  const int n = lq.state_dim();
  const std::array<int, kNumAgents> m{lq.action_dim(0), lq.action_dim(1)};
  const int m_total = m[0] + m[1];
  const std::array<int, kNumAgents> offset{0, m[0]};

  LqSolution sol;
  for (int k = 0; k < kNumAgents; ++k) {
    sol.gain[k].resize(horizon);
    sol.feedforward[k].resize(horizon);
    sol.value_hessian[k].resize(horizon + 1);
    sol.value_gradient[k].resize(horizon + 1);
    sol.value_hessian[k][horizon] = lq.terminal_cost[k].size() > 0
                                        ? lq.terminal_cost[k]
                                        : Matrix::Zero(n, n);
    sol.value_gradient[k][horizon] = lq.terminal_linear[k].size() > 0
                                         ? lq.terminal_linear[k]
                                         : Vector::Zero(n);
  }

  Matrix system(m_total, m_total);
  Matrix rhs(m_total, n + 1);
  Eigen::PartialPivLU<Matrix> lu;

  for (int t = horizon - 1; t >= 0; --t) {
    const LqStage& stage = lq.stages[t];
    std::array<Matrix, kNumAgents> bz;
    for (int k = 0; k < kNumAgents; ++k) {
      check_own_cost(stage.action_cost[k][k], t);
      const Matrix& z_next = sol.value_hessian[k][t + 1];
      bz[k] = stage.input[k].transpose() * z_next;
      const int row = offset[k];
      for (int j = 0; j < kNumAgents; ++j) {
        system.block(row, offset[j], m[k], m[j]) = bz[k] * stage.input[j];
      }
      system.block(row, row, m[k], m[k]) += stage.action_cost[k][k];
      rhs.block(row, 0, m[k], n) = bz[k] * stage.dynamics;
      rhs.block(row, n, m[k], 1) =
          stage.input[k].transpose() * sol.value_gradient[k][t + 1] +
          stage.action_linear[k][k];
    }

    lu.compute(system);
    if (!(lu.rcond() >= options.min_reciprocal_condition)) {
      throw SolverError("solve_lq_nash: singular coupled gain system at step " +
                            std::to_string(t),
                        t);
    }
    const Matrix solution = lu.solve(rhs);

    Matrix closed_loop = stage.dynamics;
    Vector drift = Vector::Zero(n);
    for (int k = 0; k < kNumAgents; ++k) {
      sol.gain[k][t] = solution.block(offset[k], 0, m[k], n);
      sol.feedforward[k][t] = solution.block(offset[k], n, m[k], 1);
      closed_loop -= stage.input[k] * sol.gain[k][t];
      drift -= stage.input[k] * sol.feedforward[k][t];
    }

    for (int k = 0; k < kNumAgents; ++k) {
      const Matrix& z_next = sol.value_hessian[k][t + 1];
      const Vector& zeta_next = sol.value_gradient[k][t + 1];
      Matrix z = closed_loop.transpose() * z_next * closed_loop +
                 stage.state_cost[k];
      Vector zeta = closed_loop.transpose() * (zeta_next + z_next * drift) +
                    stage.state_linear[k];
      for (int j = 0; j < kNumAgents; ++j) {
        const Matrix& p = sol.gain[j][t];
        const Matrix& r = stage.action_cost[k][j];
        if (r.size() == 0) continue;
        z += p.transpose() * r * p;
        zeta += p.transpose() * (r * sol.feedforward[j][t] -
                                 stage.action_linear[k][j]);
      }
      sol.value_hessian[k][t] = 0.5 * (z + z.transpose());
      sol.value_gradient[k][t] = std::move(zeta);
    }
  }
  return sol;
}

Matrix project_psd(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clamped.asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace npace
