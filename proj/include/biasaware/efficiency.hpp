#pragma once

#include "biasaware/model.hpp"
#include "biasaware/pathsolver.hpp"

#include <utility>
#include <vector>

namespace biasaware {

struct EfficiencyReport {
  double kappa_flci = 0.0;
  double kappa_mse_lo = 0.0;
  double kappa_mse_hi = 0.0;
  std::vector<ModulusPoint> modulus_samples;
  double alpha = 0.05;
  double sigma = 1.0;
  double extension_mass = 0.0;  // share of the numerator not pinned down by the samples
  bool extension_flag = false;  // extension_mass above 5%
  int samples_used = 0;
};

/// Modulus samples at the path points with t > 0, sorted by delta.
std::vector<ModulusPoint> modulus_curve(const SolutionPath& path, double C, const CanonicalDesign& design);

/// Modulus samples at `count` parameters spread over the path, plus its points.
std::vector<ModulusPoint> modulus_samples(const SolutionPath& path, double C, const CanonicalDesign& design,
                                          int count);

struct KappaFlciDetail {
  double numerator = 0.0;
  double denominator = 0.0;
  double extension_mass = 0.0;
  double delta_at_min = 0.0;
};

/// Ratio of the expected length of the shortest CI to the shortest FLCI.
/// The modulus is interpolated linearly and extended by tangent lines.
double kappa_flci(const std::vector<ModulusPoint>& modulus, double alpha, double sigma = 1.0,
                  KappaFlciDetail* detail = nullptr);

/// Minimax affine risk in N(theta, sigma^2), |theta| <= tau.
double rho_affine(double tau, double sigma);

struct MinimaxRiskBounds {
  double lower = 0.0;  // max(best symmetric three-point prior Bayes risk, affine risk / 1.25)
  double upper = 0.0;  // min(affine risk, max risk of that prior's Bayes rule)
};

MinimaxRiskBounds rho_nonlinear_bounds(double tau, double sigma);

std::pair<double, double> kappa_mse_bracket(const std::vector<ModulusPoint>& modulus, double sigma);

/// Samples the modulus along the path, doubling the density until kappa_flci
/// is stable to 1e-3, then brackets kappa_mse.
EfficiencyReport efficiency_report(const CanonicalDesign& design, const Penalty& penalty, double C, double alpha,
                                   double sigma = 1.0);

}  // namespace biasaware
