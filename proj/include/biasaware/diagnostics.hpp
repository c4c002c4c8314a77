#pragma once

#include "biasaware/inference.hpp"
#include "biasaware/model.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace biasaware {

/// Penalized regression of Y on X = (w, Z1, Z2) with only the Z2 block penalized.
struct OutcomeFit {
  Vector theta1_hat;  // (beta, gamma1)
  Vector theta2_hat;
  Vector residuals;
  double lambda = 0.0;
  double r2 = 0.0;
};

/// Y and Z2 with (w, Z1) projected out; the Z2 block is whitened so that the
/// penalty becomes ||u||_p.
struct PartialledOutcome {
  Vector y;
  Matrix X2;   // whitened
  Matrix X2_raw;
  double p = 1.0;
  Penalty penalty;
  Matrix X1;   // (w, Z1) in the original scale
  Vector y_raw;
  Matrix Z2_raw;
  double tss = 0.0;

  PartialledOutcome(const Dataset& d, const PenaltySpec& spec);

  /// Full fit from a whitened Z2 coefficient.
  OutcomeFit finish(const Vector& u, double lambda) const;
};

/// min ||Y - X theta||^2 / n + lambda ||theta2||, solved exactly for p in {1, 2}.
OutcomeFit outcome_regression(const Dataset& d, const PenaltySpec& spec, double lambda);
OutcomeFit outcome_regression(const PartialledOutcome& po, double lambda);

/// k^{1/q} / sqrt(n), or sqrt(log k) / sqrt(n) when q is infinite.
double rate_functional(double q, Index k, Index n);

/// 2 sqrt(log log max(n, 3)) + 1.
double default_K_n(Index n);

struct InitialResidualFit {
  Vector residuals;
  double lambda0 = 0.0;
  double lambda_final = 0.0;
};

/// Residuals for the variance estimate: an outcome regression at
/// 2 K_n r_q sd(Y) s_X, refined once by the moderate deviations penalty for p = 1.
InitialResidualFit default_initial_residuals(const Dataset& d, const PenaltySpec& spec,
                                             std::optional<double> K_n = std::nullopt, double alpha = 0.05);

/// (C, R^2(C)) for the fit constrained by Pen(gamma2) <= C.
std::vector<std::pair<double, double>> r2_curve(const Dataset& d, const PenaltySpec& spec,
                                                const std::vector<double>& c_grid);

struct SensitivityRow {
  double C = 0.0;
  InferenceReport flci;
  bool excludes_null = false;
};

struct Breakdown {
  std::optional<double> c_star;  // empty means "none"
  std::vector<SensitivityRow> rows;
};

/// Largest C before the first grid value whose FLCI contains the null.
Breakdown breakdown_C(const BiasAwareAnalysis& analysis, double alpha, double null_value,
                      const std::vector<double>& c_grid, std::optional<double> lind_cap = std::nullopt);
Breakdown breakdown_C(const Dataset& d, const PenaltySpec& spec, double alpha, double null_value,
                      const std::vector<double>& c_grid);

enum class CLowerMode { KnownSigmaMC, ModerateDeviations };

std::string_view to_string(CLowerMode m);

struct CLowerCI {
  double c_hat = 0.0;
  double lambda_star_alpha = 0.0;
  CLowerMode mode = CLowerMode::KnownSigmaMC;
  double alpha = 0.05;
};

struct CLowerOptions {
  std::optional<Vector> residuals;  // required by the moderate deviations mode
  std::uint64_t seed = 20240101;
  int draws = 100000;
};

/// Solves alpha = sum_j 2 Phi(-lambda / sqrt(V_j)), V_j = sum_i (2 x_ij / n)^2 e_i^2.
double moderate_deviations_lambda(const Matrix& X2, const Vector& resid, double alpha);

/// 1 - alpha quantile of ||2 X2'e||_q / n with e ~ N(0, sigma2 I).
double known_sigma_lambda(const Matrix& X2, double sigma2, double q, double alpha, int draws,
                          std::uint64_t seed);

/// sup over lambda > lambda* of (lambda - lambda*) / (lambda + lambda*) * ||theta2(lambda)||_p.
double c_hat_from_path(const PartialledOutcome& po, double lambda_star);

CLowerCI lower_ci_C(const Dataset& d, const PenaltySpec& spec, double alpha, CLowerMode mode,
                    const CLowerOptions& opt = {});

struct DoubleLassoResult {
  double beta_zz = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double beta_lasso = 0.0;
  double sd = 0.0;
};

/// Debiased lasso with both stages at the given l1 weights (objective
/// ||.||^2 + lambda ||.||_1; the outcome stage penalizes beta and gamma2).
DoubleLassoResult double_lasso_zz(const Dataset& d, double lambda_ps, double lambda_out, double alpha);

}  // namespace biasaware
