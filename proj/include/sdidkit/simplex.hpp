#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdidkit/error.hpp"

namespace sdidkit {

/// min over w in the simplex and an unconstrained intercept c0 of
///
///   || c0 * 1 + A w - b ||^2 + ridge * ||w||^2
///
/// Rows of A are the fitted observations, columns the weighted series.
struct SimplexLsProblem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  double ridge = 0.0;
  bool intercept = true;
};

struct SimplexLsOptions {
  double tolerance = 1e-8;  // on the Frank-Wolfe duality gap, relative to max(1, starting objective)
  int max_iter = 20000;
};

struct SolverReport {
  int iterations = 0;
  double objective = 0.0;
  double gap = 0.0;
  bool converged = false;
};

struct SimplexLsSolution {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  SolverReport report;
};

/// Objective value at (intercept, w), evaluated directly from the problem data.
inline double simplex_ls_objective(const SimplexLsProblem& p, double intercept, const Eigen::VectorXd& w) {
  const Eigen::VectorXd r = (p.a * w).array() + intercept - p.b.array();
  return r.squaredNorm() + p.ridge * w.squaredNorm();
}

/// Intercept that is optimal for a fixed weight vector.
inline double simplex_ls_intercept(const SimplexLsProblem& p, const Eigen::VectorXd& w) {
  if (!p.intercept || p.a.rows() == 0) return 0.0;
  return (p.b - p.a * w).mean();
}

namespace detail {

inline constexpr int kFrankWolfeBudget = 2000;

/// Fully corrective phase: minimizes the quadratic exactly over the affine hull
/// of the current support (minimum-norm KKT solution), steps back to the
/// simplex when that minimizer leaves it, and adds the Frank-Wolfe vertex when
/// the support is optimal. Returns the final duality gap; `it` counts steps.
template <class Objective>
double active_set_polish(const Eigen::MatrixXd& g, const Eigen::VectorXd& c, Eigen::VectorXd& w, double tol,
                         int budget, int& it, std::vector<double>& trace, Objective&& objective,
                         Eigen::VectorXd& gw) {
  using Eigen::Index;
  const Index d = w.size();
  std::vector<Index> support;
  for (Index i = 0; i < d; ++i)
    if (w(i) > 0.0) support.push_back(i);
  // The minimizer is unchanged by scaling G and c together; scaling keeps the
  // constraint row commensurate with G for the rank decision.
  const double scale = std::max(g.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double gap = std::numeric_limits<double>::infinity();
  for (int steps = 0; steps < budget; ++steps, ++it) {
    const auto m = static_cast<Index>(support.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Index a = 0; a < m; ++a) {
      for (Index b = 0; b < m; ++b) kkt(a, b) = g(support[a], support[b]) / scale;
      kkt(a, m) = kkt(m, a) = 1.0;
      rhs(a) = c(support[a]) / scale;
    }
    rhs(m) = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);

    double theta = 1.0;
    for (Index a = 0; a < m; ++a) {
      const double wi = w(support[a]), ui = sol(a);
      if (ui < 0.0) theta = std::min(theta, wi / (wi - ui));
    }
    for (Index a = 0; a < m; ++a) w(support[a]) += theta * (sol(a) - w(support[a]));
    if (theta < 1.0) {
      std::vector<Index> kept;
      for (Index i : support)
        if (w(i) > 1e-15 * theta) kept.push_back(i);
        else w(i) = 0.0;
      if (kept.empty()) kept.push_back(support.front());
      support = std::move(kept);
      continue;
    }
    for (Index i = 0; i < d; ++i)
      if (w(i) < 0.0) w(i) = 0.0;
    w /= w.sum();
    gw.noalias() = g * w;
    trace.push_back(objective());
    const Eigen::VectorXd grad = 2.0 * (gw - c);
    Index s = 0;
    grad.minCoeff(&s);
    gap = grad.dot(w) - grad(s);
    if (gap <= tol) return gap;
    if (std::find(support.begin(), support.end(), s) != support.end()) continue;
    support.push_back(s);
  }
  return gap;
}

}  // namespace detail

/// Away-step Frank-Wolfe with exact line search, started from the uniform
/// vector. The intercept is profiled out by centering, which turns the problem
/// into the quadratic w'Gw - 2c'w + const with G = Ac'Ac + ridge*I.
///
/// Problems that Frank-Wolfe does not settle within a fixed budget are
/// finished by an active-set phase on the support.
///
/// A flat objective leaves the uniform start untouched, which is the
/// tie-break for degenerate problems. Throws ConvergenceError (carrying the
/// objective trace) when max_iter is reached with the gap above tolerance.
inline SimplexLsSolution simplex_ls_minimize(const SimplexLsProblem& p, const SimplexLsOptions& opt = {}) {
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const Index d = p.a.cols();
  if (d < 1) throw InputError("simplex problem needs at least one weight");
  if (p.a.rows() != p.b.size()) throw InputError("simplex problem: A and b have different row counts");

  SimplexLsSolution sol;
  if (d == 1) {
    sol.weights = VectorXd::Ones(1);
    sol.intercept = simplex_ls_intercept(p, sol.weights);
    sol.report = {0, simplex_ls_objective(p, sol.intercept, sol.weights), 0.0, true};
    return sol;
  }

  MatrixXd ac = p.a;
  VectorXd bc = p.b;
  if (p.intercept && p.a.rows() > 0) {
    ac.rowwise() -= p.a.colwise().mean();
    bc.array() -= p.b.mean();
  }
  MatrixXd g = ac.transpose() * ac;
  g.diagonal().array() += p.ridge;
  const VectorXd c = ac.transpose() * bc;
  const double c0 = bc.squaredNorm();

  VectorXd w = VectorXd::Constant(d, 1.0 / static_cast<double>(d));
  VectorXd gw = g * w;
  auto objective = [&] { return w.dot(gw) - 2.0 * c.dot(w) + c0; };

  const double start = objective();
  const double tol = opt.tolerance * std::max(1.0, std::abs(start));
  std::vector<double> trace;
  trace.reserve(64);
  trace.push_back(start);

  auto fail = [&](double gap) {
    trace.push_back(objective());
    throw ConvergenceError("simplex least squares did not converge in " + std::to_string(opt.max_iter) +
                               " iterations (gap " + std::to_string(gap) + ")",
                           std::move(trace));
  };

  // Frank-Wolfe stalls on faces of optima (rank-deficient G); past this many
  // iterations the remaining budget goes to the active-set phase below.
  const int fw_budget = std::min(opt.max_iter, detail::kFrankWolfeBudget);
  int it = 0;
  double gap = 0.0;
  bool done = false;
  for (;; ++it) {
    if (it > 0 && it % 128 == 0) gw.noalias() = g * w;
    const VectorXd grad = 2.0 * (gw - c);
    const double gdotw = grad.dot(w);
    Index s = 0;
    grad.minCoeff(&s);
    gap = gdotw - grad(s);
    if (gap <= tol) {
      done = true;
      break;
    }
    if (it >= fw_budget) break;

    Index v = -1;
    double worst = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < d; ++i)
      if (w(i) > 0.0 && grad(i) > worst) {
        worst = grad(i);
        v = i;
      }
    const double away_gap = worst - gdotw;

    VectorXd gd;
    double slope = 0.0, gamma_max = 1.0;
    const bool toward = gap >= away_gap;
    if (toward) {
      gd = g.col(s) - gw;
      slope = grad(s) - gdotw;  // grad . (e_s - w)
    } else {
      gd = gw - g.col(v);
      slope = gdotw - grad(v);  // grad . (w - e_v)
      gamma_max = w(v) / (1.0 - w(v));
    }
    // d'Gd from Gd and d without forming d.
    const double curv = toward ? gd(s) - gd.dot(w) : gd.dot(w) - gd(v);
    double gamma = curv > 0.0 ? -slope / (2.0 * curv) : gamma_max;
    gamma = std::clamp(gamma, 0.0, gamma_max);

    if (toward) {
      w *= (1.0 - gamma);
      w(s) += gamma;
    } else {
      w *= (1.0 + gamma);
      w(v) -= gamma;
      if (gamma == gamma_max) w(v) = 0.0;
    }
    gw.noalias() += gamma * gd;
    for (Index i = 0; i < d; ++i)
      if (w(i) < 0.0) w(i) = 0.0;
    if (it % 16 == 0) trace.push_back(objective());
  }
  if (!done) {
    if (it >= opt.max_iter) fail(gap);
    gap = detail::active_set_polish(g, c, w, tol, opt.max_iter - it, it, trace, objective, gw);
    if (gap > tol) fail(gap);
  }

  w /= w.sum();
  sol.weights = w;
  sol.intercept = simplex_ls_intercept(p, w);
  sol.report.iterations = it;
  sol.report.gap = gap;
  sol.report.converged = true;
  sol.report.objective = simplex_ls_objective(p, sol.intercept, w);
  return sol;
}

}  // namespace sdidkit
