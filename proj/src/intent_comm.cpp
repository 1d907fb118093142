#include "npace/intent_comm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace npace {

void TeachingConfig::validate() const {
  if (!(eta >= 0.0)) throw ContractError("TeachingConfig: eta must be >= 0");
  if (!(trust_region > 0.0))
    throw ContractError("TeachingConfig: trust region must be positive");
  if (max_steps < 1 || !(fd_step > 0.0) || !(stationarity_tolerance > 0.0))
    throw ContractError("TeachingConfig: invalid optimizer settings");
}

TeachingProblem make_teaching_problem(int ego, const IlqSolution& ego_solution,
                                      const GaussianBelief& peer_belief_of_self,
                                      const LearnerConfig& peer_learner,
                                      const std::optional<IntentBox>& clamp,
                                      const Vector& predicted,
                                      const PolicyJacobian& jacobian,
                                      const Vector& true_intent) {
  const LqStage& stage = ego_solution.approximation.stages.front();
  const Matrix& b = stage.input[ego];
  const Matrix& z_next = ego_solution.lq_solution.value_hessian[ego][1];
  Matrix h = stage.action_cost[ego][ego] + b.transpose() * z_next * b;

  TeachingProblem problem;
  problem.ego = ego;
  problem.nominal = ego_solution.policies[ego].action(0, ego_solution.trajectory.states[0]);
  problem.cost_hessian = 0.5 * (h + h.transpose());
  problem.peer_belief_of_self = peer_belief_of_self;
  problem.peer_learner = peer_learner;
  problem.clamp = clamp;
  problem.predicted = predicted;
  problem.jacobian = jacobian;
  problem.true_intent = true_intent;
  return problem;
}

double teaching_error(const TeachingProblem& problem, const Vector& action) {
  const GaussianBelief next =
      learner_update(problem.peer_learner, problem.peer_belief_of_self,
                     problem.predicted, action, problem.jacobian, problem.clamp);
  return (next.mean - problem.true_intent).squaredNorm();
}

double teaching_objective(const TeachingProblem& problem, double eta,
                          const Vector& action) {
  const Vector d = action - problem.nominal;
  const double cost = 0.5 * d.dot(problem.cost_hessian * d);
  if (eta == 0.0) return cost;
  return cost + eta * teaching_error(problem, action);
}

namespace {

Vector fd_gradient(const TeachingProblem& problem, double eta, const Vector& a,
                   double h) {
  Vector g(a.size());
  for (int i = 0; i < a.size(); ++i) {
    Vector up = a, down = a;
    up(i) += h;
    down(i) -= h;
    g(i) = (teaching_objective(problem, eta, up) -
            teaching_objective(problem, eta, down)) / (2.0 * h);
  }
  return g;
}

// Central finite-difference Hessian at a.
Matrix fd_hessian(const TeachingProblem& problem, double eta, const Vector& a,
                  double h) {
  const int m = static_cast<int>(a.size());
  const double f0 = teaching_objective(problem, eta, a);
  Matrix hess(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double v;
      if (i == j) {
        Vector up = a, down = a;
        up(i) += h;
        down(i) -= h;
        v = (teaching_objective(problem, eta, up) - 2.0 * f0 +
             teaching_objective(problem, eta, down)) / (h * h);
      } else {
        Vector pp = a, pm = a, mp = a, mm = a;
        pp(i) += h; pp(j) += h;
        pm(i) += h; pm(j) -= h;
        mp(i) -= h; mp(j) += h;
        mm(i) -= h; mm(j) -= h;
        v = (teaching_objective(problem, eta, pp) - teaching_objective(problem, eta, pm) -
             teaching_objective(problem, eta, mp) + teaching_objective(problem, eta, mm)) /
            (4.0 * h * h);
      }
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

// Newton direction on the coordinates not pinned at a bound by the gradient;
// empty when the reduced Hessian is not positive definite.
std::optional<Vector> newton_direction(const Matrix& hess, const Vector& g,
                                       const Vector& a, const Vector& lower,
                                       const Vector& upper) {
  std::vector<int> free;
  for (int i = 0; i < a.size(); ++i) {
    const bool pinned = (a(i) <= lower(i) && g(i) > 0.0) || (a(i) >= upper(i) && g(i) < 0.0);
    if (!pinned) free.push_back(i);
  }
  Vector d = Vector::Zero(a.size());
  if (free.empty()) return d;
  const int nf = static_cast<int>(free.size());
  Matrix hf(nf, nf);
  Vector gf(nf);
  for (int i = 0; i < nf; ++i) {
    gf(i) = g(free[i]);
    for (int j = 0; j < nf; ++j) hf(i, j) = hess(free[i], free[j]);
  }
  const Eigen::LLT<Matrix> llt(hf);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vector df = llt.solve(gf);
  for (int i = 0; i < nf; ++i) d(free[i]) = df(i);
  return d;
}

}  // namespace

TeachingResult teaching_action(const TeachingProblem& problem,
                               const TeachingConfig& config) {
  config.validate();
  TeachingResult out;
  out.action = problem.nominal;
  out.objective = 0.0;
  out.error = teaching_error(problem, problem.nominal);
  if (config.eta == 0.0) {
    out.stationary = true;
    return out;
  }

  const double eta = config.eta;
  const Vector lower = problem.nominal.array() - config.trust_region;
  const Vector upper = problem.nominal.array() + config.trust_region;
  const auto project = [&](const Vector& a) {
    return Vector(a.cwiseMax(lower).cwiseMin(upper));
  };
  const auto fallback = [&]() {
    TeachingResult nominal;
    nominal.action = problem.nominal;
    nominal.objective = eta * out.error;
    nominal.error = out.error;
    nominal.fallback = true;
    return nominal;
  };

  Vector a = problem.nominal;
  double f = teaching_objective(problem, eta, a);
  if (!std::isfinite(f)) return fallback();

  for (int step = 0; step < config.max_steps; ++step) {
    const double h = config.fd_step * std::max(1.0, a.cwiseAbs().maxCoeff());
    const Vector g = fd_gradient(problem, eta, a, h);
    const Matrix hess = fd_hessian(problem, eta, a, 10.0 * h);
    if (!g.allFinite() || !hess.allFinite()) return fallback();
    const double curvature = std::max(
        Eigen::SelfAdjointEigenSolver<Matrix>(hess, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff(),
        1e-8);

    const Vector target = project(a - g / curvature);
    const double projected_gradient =
        (a - target).lpNorm<Eigen::Infinity>() * curvature;
    if (projected_gradient <=
        config.stationarity_tolerance * std::max(1.0, std::abs(f))) {
      out.stationary = true;
      break;
    }

    // Projected Newton first, then the projected gradient step.
    bool moved = false;
    std::vector<Vector> directions;
    const std::optional<Vector> newton = newton_direction(hess, g, a, lower, upper);
    if (newton) directions.push_back(*newton);
    directions.push_back(g / curvature);
    for (const Vector& d : directions) {
      for (double scale = 1.0; scale > 1e-8 && !moved; scale *= 0.5) {
        const Vector trial = project(a - scale * d);
        const double ft = teaching_objective(problem, eta, trial);
        if (!std::isfinite(ft)) return fallback();
        if (ft < f) {
          a = trial;
          f = ft;
          moved = true;
        }
      }
      if (moved) break;
    }
    out.iterations = step + 1;
    if (!moved) {
      // Stationary to working precision when the model decrease is below
      // the rounding level of f.
      const double model_decrease = newton ? 0.5 * g.dot(*newton) : 0.0;
      out.stationary = newton && model_decrease <= 64.0 * std::numeric_limits<double>::epsilon() *
                                                      std::max(1.0, std::abs(f));
      break;
    }
  }

  out.action = a;
  out.objective = f;
  out.error = teaching_error(problem, a);
  return out;
}

}  // namespace npace
