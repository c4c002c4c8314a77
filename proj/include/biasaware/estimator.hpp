#pragma once

#include "biasaware/model.hpp"
#include "biasaware/pathsolver.hpp"

namespace biasaware {

/// Linear estimator a'Y with its worst-case bias per unit C and variance.
struct LinearEstimator {
  Vector a;
  double bbar = 0.0;
  double V_homo = 0.0;  // sigma2 * ||a||^2
  double lind = 1.0;    // max_i a_i^2 / sum_j a_j^2
  double lambda = 0.0;
  double t_lambda = 0.0;
};

/// Estimator implied by a path point. `sigma2` scales the variance.
LinearEstimator weights_from_path(const PathPoint& pp, const CanonicalDesign& design, const Penalty& penalty,
                                  double sigma2);
LinearEstimator weights_from_path(const PathPoint& pp, const CanonicalDesign& design, const PenaltySpec& spec,
                                  double sigma2);

/// Regression of Y on w after the baseline controls only.
LinearEstimator short_regression(const CanonicalDesign& design, const Penalty& penalty, double sigma2);
/// Regression of Y on w and every control; zero worst-case bias.
LinearEstimator long_regression(const CanonicalDesign& design, double sigma2);

double apply(const LinearEstimator& est, const Vector& y);

double lindeberg_weight(const Vector& a);

struct RidgeBlend {
  double omega_weight = 0.0;
  double varsigma2 = 1.0;
};

/// Weight on the short regression of the predictor-norm ridge estimator.
RidgeBlend ridge_blend(const CanonicalDesign& design, double lambda);

}  // namespace biasaware
