#pragma once

#include "biasaware/model.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace biasaware {

/// One solution of the propensity-score regression of w_t on Z2_t.
struct PathPoint {
  double lambda = 0.0;  // Lagrange weight; equals t_lambda on a constrained path
  double t_lambda = 0.0;
  Vector pi_star;
  Vector residual;
  double rss = 0.0;
};

struct ModulusPoint {
  double delta = 0.0;
  double omega = 0.0;
  double omega_prime = 0.0;
};

enum class PathKind { Ridge, Lasso, Generic };

/// Points are sorted by t_lambda increasing. `evaluate` returns the exact
/// solution at any parameter inside the path range (lambda for ridge and
/// lasso, t for the constrained path).
struct SolutionPath {
  PathKind kind = PathKind::Ridge;
  std::vector<PathPoint> points;
  bool truncated = false;
  std::string note;
  std::function<PathPoint(double)> evaluate;

  /// True if the parameter decreases as t increases.
  bool lagrangian() const { return kind != PathKind::Generic; }
};

/// min ||w - Z pi||^2 + lambda ||M pi||^2 at each lambda (lambda may be 0 or +inf).
SolutionPath ridge_path(const CanonicalDesign& design, const Penalty& penalty, std::vector<double> lambdas);
SolutionPath ridge_path(const CanonicalDesign& design, const Matrix& M, const std::vector<double>& lambdas);

/// 100 log-spaced weights over [1e-6, 1] * 1e4 * trace-scale plus the
/// corners lambda = inf (pi = 0) and lambda = 0 (long regression).
std::vector<double> default_ridge_grid(const CanonicalDesign& design, const Penalty& penalty, int count = 100);

struct LassoOptions {
  double floor_ratio = 1e-6;
};

/// Homotopy knots of min ||w - Z pi||^2 + lambda ||M pi||_1.
SolutionPath lasso_path(const CanonicalDesign& design, const Penalty& penalty, const LassoOptions& opt = {});
SolutionPath lasso_path(const CanonicalDesign& design);

struct GenericOptions {
  double rel_gap = 1e-9;
  int max_iter = 200000;
};

/// min ||w - Z pi||^2 subject to Pen(pi) <= t for each t in the grid.
SolutionPath generic_path(const CanonicalDesign& design, const Penalty& penalty, std::vector<double> t_grid,
                          const GenericOptions& opt = {});
SolutionPath generic_path(const CanonicalDesign& design, const PenaltySpec& spec, std::vector<double> t_grid,
                          const GenericOptions& opt = {});

/// Solves the constrained problem at a single level t.
PathPoint constrained_point(const CanonicalDesign& design, const Penalty& penalty, double t,
                            const GenericOptions& opt = {});

/// Lasso for l1, ridge for the l2 family, the constrained solver otherwise.
SolutionPath solution_path(const CanonicalDesign& design, const Penalty& penalty);

ModulusPoint modulus_from_path(const PathPoint& pp, double C, const CanonicalDesign& design);

struct KktCheck {
  double active_deviation = 0.0;   // max |2 z_j'r - lambda sign(pi_j)| / lambda_scale
  double inactive_excess = 0.0;    // max (|2 z_j'r| - lambda)_+ / lambda_scale
  bool ok(double tol = 1e-8) const { return active_deviation <= tol && inactive_excess <= tol; }
};

/// KKT residuals of an unweighted l1 path point, relative to `lambda_scale`.
KktCheck lasso_kkt(const PathPoint& pp, const CanonicalDesign& design, double lambda_scale);

/// lambda, t_lambda, rss, ||pi||_2 per point.
void write_path_csv(const SolutionPath& path, std::ostream& out);

}  // namespace biasaware
