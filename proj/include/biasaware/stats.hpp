#pragma once

#include <cmath>
#include <functional>

namespace biasaware {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

/// P(Z <= x), accurate in both tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// P(Z > x).
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double normal_quantile(double p);

/// Root of a continuous function with f(lo) and f(hi) of opposite sign.
double find_root(const std::function<double(double)>& f, double lo, double hi, double xtol = 1e-14);

/// Minimizer of a unimodal function on [lo, hi] by golden-section search.
/// Returns the abscissa; `fmin` receives the value there.
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double& fmin,
                               double rel_tol = 1e-10, int max_iter = 200);

}  // namespace biasaware
