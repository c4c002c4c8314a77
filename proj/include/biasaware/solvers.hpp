#pragma once

#include "biasaware/model.hpp"

#include <string>
#include <vector>

namespace biasaware::solvers {

/// Euclidean projection of v onto { x : ||x||_p <= radius }, p in [1, inf].
Vector project_lp_ball(const Vector& v, double p, double radius);

struct FirstOrderOptions {
  double rel_gap = 1e-9;  // stop when gap <= rel_gap * ||b||^2
  int max_iter = 200000;
};

struct FirstOrderResult {
  Vector x;
  double objective = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// min ||b - A x||^2 subject to ||x||_p <= radius (accelerated projected gradient).
FirstOrderResult constrained_least_squares(const Matrix& A, const Vector& b, double p, double radius,
                                           const Vector* warm = nullptr, const FirstOrderOptions& opt = {});

/// min ||b - A x||^2 + mu ||x||_p (accelerated proximal gradient).
FirstOrderResult penalized_least_squares(const Matrix& A, const Vector& b, double p, double mu,
                                         const Vector* warm = nullptr, const FirstOrderOptions& opt = {});

/// Largest singular value squared of A.
double spectral_norm_sq(const Matrix& A);

struct LassoKnot {
  double lambda = 0.0;
  Vector beta;
  std::vector<Index> active;
};

struct LassoHomotopy {
  std::vector<LassoKnot> knots;  // lambda strictly decreasing
  double lambda_max = 0.0;
  bool truncated = false;
  std::string note;
};

/// Exact piecewise-linear path of min ||b - A x||^2 + lambda ||x||_1 from
/// lambda_max = ||2 A'b||_inf down to `lambda_end`. Entry ties go to the
/// lowest column index.
LassoHomotopy lasso_homotopy(const Matrix& A, const Vector& b, double lambda_end);

/// Interpolated coefficients on a homotopy at any lambda in [last knot, inf).
Vector lasso_at(const LassoHomotopy& h, double lambda);

/// Ridge solutions of min ||b - A x||^2 + lambda ||x||^2 through one thin SVD.
class RidgeSvd {
 public:
  RidgeSvd(const Matrix& A, const Vector& b);
  Vector coef(double lambda) const;
  Vector fitted(double lambda) const;
  /// ||x(lambda)||_2 without forming x.
  double coef_norm(double lambda) const;
  /// Smallest kept singular value squared; lambda = 0 is valid only when the
  /// design has full column rank.
  bool full_column_rank() const { return full_rank_; }
  double trace_scale() const;
  Index rank() const { return s_.size(); }

 private:
  Matrix U_, V_;
  Vector s_, c_;
  bool full_rank_ = false;
};

}  // namespace biasaware::solvers
