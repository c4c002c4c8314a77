#include "biasaware/stats.hpp"

#include "biasaware/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>

#include <cstdint>
#include <limits>

namespace biasaware {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::InvalidArgument, "normal quantile needs p in (0, 1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

double find_root(const std::function<double(double)>& f, double lo, double hi, double xtol) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) fail(ErrorKind::InvalidArgument, "root is not bracketed");
  std::uintmax_t iters = 200;
  auto tol = [xtol](double a, double b) { return std::abs(b - a) <= xtol * std::max(1.0, std::abs(a)); };
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (a + b);
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double& fmin,
                               double rel_tol, int max_iter) {
  constexpr double kInvPhi = 0.61803398874989484820;
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > rel_tol * std::max({1e-300, std::abs(a), std::abs(b)}); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  if (f1 <= f2) {
    fmin = f1;
    return x1;
  }
  fmin = f2;
  return x2;
}

}  // namespace biasaware
