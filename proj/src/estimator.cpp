#include "biasaware/estimator.hpp"

#include "biasaware/errors.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>

namespace biasaware {

namespace {

LinearEstimator from_weights(Vector a, double bbar, double sigma2) {
  LinearEstimator est;
  est.V_homo = sigma2 * a.squaredNorm();
  est.lind = lindeberg_weight(a);
  est.bbar = std::max(bbar, 0.0);
  est.a = std::move(a);
  return est;
}

// Residual of w_t after projecting on every restricted control.
Vector long_residual(const CanonicalDesign& design) {
  if (design.k2() == 0) return design.w_t;
  if (design.k2() + design.proj_rank >= design.n())
    fail(ErrorKind::CollinearDesign, "long regression needs fewer regressors than observations");
  Eigen::ColPivHouseholderQR<Matrix> qr(design.Z2_t);
  qr.setThreshold(kRankTolerance);
  Vector r = design.w_t - design.Z2_t * qr.solve(design.w_t);
  if (r.norm() <= 1e-8 * design.w_t.norm())
    fail(ErrorKind::CollinearDesign, "w lies in the span of the controls");
  return r;
}

}  // namespace

double lindeberg_weight(const Vector& a) {
  double s = a.squaredNorm();
  if (s == 0.0) return 1.0;
  return a.cwiseAbs2().maxCoeff() / s;
}

LinearEstimator weights_from_path(const PathPoint& pp, const CanonicalDesign& design, const Penalty& penalty,
                                  double sigma2) {
  if (!(pp.rss > 0.0)) fail(ErrorKind::DegeneratePath, "estimator undefined at zero residual");
  const Vector& r = pp.residual;
  double rw = r.dot(design.w_t);
  if (std::abs(rw) < 1e-12 * design.w_t.norm() * r.norm())
    fail(ErrorKind::ZeroDenominator, "(w - Z pi)'w is numerically zero");
  Vector a = r / rw;
  double pen = pp.pi_star.size() ? penalty.value(pp.pi_star) : 0.0;
  double bbar;
  if (pen > 0.0) {
    bbar = r.dot(design.Z2_t * pp.pi_star) / (pen * rw);
  } else {
    bbar = penalty.dual(design.Z2_t.transpose() * a);
  }
  LinearEstimator est = from_weights(std::move(a), bbar, sigma2);
  est.lambda = pp.lambda;
  est.t_lambda = pp.t_lambda;
  return est;
}

LinearEstimator weights_from_path(const PathPoint& pp, const CanonicalDesign& design, const PenaltySpec& spec,
                                  double sigma2) {
  return weights_from_path(pp, design, Penalty(spec, design), sigma2);
}

LinearEstimator short_regression(const CanonicalDesign& design, const Penalty& penalty, double sigma2) {
  double ww = design.w_t.squaredNorm();
  if (!(ww > 0.0)) fail(ErrorKind::ZeroDenominator, "w is zero after removing the baseline controls");
  Vector a = design.w_t / ww;
  double bbar = design.k2() ? penalty.dual(design.Z2_t.transpose() * a) : 0.0;
  LinearEstimator est = from_weights(std::move(a), bbar, sigma2);
  est.lambda = std::numeric_limits<double>::infinity();
  return est;
}

LinearEstimator long_regression(const CanonicalDesign& design, double sigma2) {
  Vector r = long_residual(design);
  Vector a = r / r.dot(design.w_t);
  return from_weights(std::move(a), 0.0, sigma2);
}

double apply(const LinearEstimator& est, const Vector& y) {
  if (est.a.size() != y.size()) fail(ErrorKind::DimensionMismatch, "weights and outcome differ in length");
  return est.a.dot(y);
}

RidgeBlend ridge_blend(const CanonicalDesign& design, double lambda) {
  if (lambda < 0.0) fail(ErrorKind::InvalidArgument, "negative ridge weight");
  Vector r = long_residual(design);
  RidgeBlend b;
  b.varsigma2 = r.squaredNorm() / design.w_t.squaredNorm();
  if (std::isinf(lambda)) {
    b.omega_weight = 1.0;
  } else {
    double ln = lambda / static_cast<double>(design.n());
    b.omega_weight = ln / (ln + b.varsigma2);
  }
  return b;
}

}  // namespace biasaware
