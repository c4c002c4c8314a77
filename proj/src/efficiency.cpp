#include "biasaware/efficiency.hpp"

#include "biasaware/errors.hpp"
#include "biasaware/inference.hpp"
#include "biasaware/stats.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace biasaware {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ModulusPoint> tidy(std::vector<ModulusPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const ModulusPoint& a, const ModulusPoint& b) { return a.delta < b.delta; });
  std::vector<ModulusPoint> out;
  for (const auto& m : pts) {
    if (!(m.delta > 0.0) || !std::isfinite(m.delta) || !std::isfinite(m.omega)) continue;
    if (!out.empty() && m.delta <= out.back().delta * (1.0 + 1e-12)) continue;
    out.push_back(m);
  }
  return out;
}

void add_point(std::vector<ModulusPoint>& out, const PathPoint& pp, double C, const CanonicalDesign& design) {
  if (pp.t_lambda > 0.0 && pp.rss > 0.0) out.push_back(modulus_from_path(pp, C, design));
}

// Integral of (c0 + c1 u) phi(z - u / (2 sigma)) du / (2 sigma) over [ua, ub].
double segment_integral(double c0, double c1, double ua, double ub, double z, double sigma) {
  double xa = z - ua / (2.0 * sigma);
  double Fa = normal_cdf(xa), fa = normal_pdf(xa);
  double Fb = 0.0, fb = 0.0;
  if (std::isfinite(ub)) {
    double xb = z - ub / (2.0 * sigma);
    Fb = normal_cdf(xb);
    fb = normal_pdf(xb);
  }
  return (c0 + 2.0 * sigma * c1 * z) * (Fa - Fb) - 2.0 * sigma * c1 * (fb - fa);
}

template <class F>
double integrate(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 10, 1e-11);
}

// Three-point prior {-s, 0, s} with masses (p/2, 1-p, p/2) in N(theta, 1).
struct ThreePoint {
  double s, p;

  double num(double y) const { return s * 0.5 * p * (normal_pdf(y - s) - normal_pdf(y + s)); }
  double marg(double y) const {
    return (1.0 - p) * normal_pdf(y) + 0.5 * p * (normal_pdf(y - s) + normal_pdf(y + s));
  }
  double rule(double y) const {
    double m = marg(y);
    return m > 0.0 ? num(y) / m : 0.0;
  }
  double bayes_risk() const {
    auto f = [this](double y) {
      double m = marg(y);
      if (!(m > 0.0)) return 0.0;
      double v = num(y);
      return v * v / m;
    };
    double mid = s > 0.0 ? integrate(f, 0.0, s) : 0.0;
    double tail = integrate(f, s, s + 12.0);
    return p * s * s - 2.0 * (mid + tail);
  }
  double risk_at(double theta) const {
    auto f = [this, theta](double y) {
      double d = rule(y) - theta;
      return d * d * normal_pdf(y - theta);
    };
    return integrate(f, theta - 12.0, theta) + integrate(f, theta, theta + 12.0);
  }
};

ThreePoint best_three_point(double tau) {
  double smax = std::min(tau, 8.0);
  double best_risk = -1.0;
  ThreePoint best{smax, 1.0};
  auto best_p = [&](double s, double& risk) {
    double fm;
    auto neg = [s](double p) { return -ThreePoint{s, p}.bayes_risk(); };
    double p = golden_section_minimize(neg, 1e-6, 1.0, fm, 1e-7, 80);
    double at_one = neg(1.0);
    if (at_one <= fm) {
      p = 1.0;
      fm = at_one;
    }
    risk = -fm;
    return p;
  };
  const int grid = 12;
  double s_star = smax;
  for (int i = 1; i <= grid; ++i) {
    double s = smax * i / grid;
    double r;
    double p = best_p(s, r);
    if (r > best_risk) {
      best_risk = r;
      best = {s, p};
      s_star = s;
    }
  }
  double lo = std::max(s_star - smax / grid, 1e-9), hi = std::min(s_star + smax / grid, smax);
  double fm;
  double s = golden_section_minimize(
      [&](double sv) {
        double r;
        best_p(sv, r);
        return -r;
      },
      lo, hi, fm, 1e-7, 60);
  if (-fm > best_risk) {
    double r;
    best = {s, best_p(s, r)};
  }
  return best;
}

}  // namespace

std::vector<ModulusPoint> modulus_curve(const SolutionPath& path, double C, const CanonicalDesign& design) {
  std::vector<ModulusPoint> out;
  for (const auto& pp : path.points) add_point(out, pp, C, design);
  return tidy(std::move(out));
}

std::vector<ModulusPoint> modulus_samples(const SolutionPath& path, double C, const CanonicalDesign& design,
                                          int count) {
  std::vector<ModulusPoint> out;
  for (const auto& pp : path.points) add_point(out, pp, C, design);
  const auto& pts = path.points;
  std::vector<double> params;
  if (path.kind == PathKind::Generic) {
    double tmin = kInf, tmax = 0.0;
    for (const auto& pp : pts)
      if (pp.t_lambda > 0.0) {
        tmin = std::min(tmin, pp.t_lambda);
        tmax = std::max(tmax, pp.t_lambda);
      }
    if (tmax > 0.0) {
      double lo = 1e-6 * tmin;
      for (int i = 0; i < count; ++i) params.push_back(lo * std::pow(tmax / lo, static_cast<double>(i) / (count - 1)));
    }
  } else {
    double lmin = kInf, lmax = 0.0;
    for (const auto& pp : pts) {
      if (!std::isfinite(pp.lambda)) continue;
      if (pp.lambda > 0.0) lmin = std::min(lmin, pp.lambda);
      lmax = std::max(lmax, pp.lambda);
    }
    if (lmax > 0.0 && std::isfinite(lmin)) {
      double hi = path.kind == PathKind::Ridge ? 1e8 * lmax : lmax;
      for (int i = 0; i < count; ++i)
        params.push_back(lmin * std::pow(hi / lmin, static_cast<double>(i) / (count - 1)));
      if (path.kind == PathKind::Lasso && pts.size() > 1) {
        // Approach the null solution, where t -> 0 and delta grows without bound.
        double gap = pts[0].lambda - pts[1].lambda;
        for (int j = 1; j <= 12; ++j) params.push_back(pts[0].lambda - gap * std::pow(10.0, -j));
      }
    }
  }
  for (double prm : params) {
    if (path.kind == PathKind::Lasso && prm >= pts.front().lambda) continue;
    add_point(out, path.evaluate(prm), C, design);
  }
  return tidy(std::move(out));
}

double kappa_flci(const std::vector<ModulusPoint>& modulus_in, double alpha, double sigma, KappaFlciDetail* detail) {
  if (!(alpha > 0.0 && alpha < 0.5)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 0.5)");
  if (!(sigma > 0.0)) fail(ErrorKind::NonpositiveSd, "sigma must be positive");
  std::vector<ModulusPoint> m = tidy(modulus_in);
  if (m.empty()) fail(ErrorKind::InsufficientModulusRange, "no usable modulus samples");
  const double z = normal_quantile(1.0 - alpha);

  const auto& first = m.front();
  const auto& last = m.back();
  double lower_ext = segment_integral(first.omega - first.omega_prime * first.delta, first.omega_prime, 0.0,
                                      first.delta, z, sigma);
  double upper_ext = segment_integral(last.omega - last.omega_prime * last.delta, last.omega_prime, last.delta,
                                      kInf, z, sigma);
  double inner = 0.0;
  for (std::size_t i = 0; i + 1 < m.size(); ++i) {
    double slope = (m[i + 1].omega - m[i].omega) / (m[i + 1].delta - m[i].delta);
    inner += segment_integral(m[i].omega - slope * m[i].delta, slope, m[i].delta, m[i + 1].delta, z, sigma);
  }
  double numerator = lower_ext + inner + upper_ext;
  // Below the first sample the modulus lies between the chord from the origin
  // and the tangent; the two coincide when the first sample is the long regression.
  double chord = segment_integral(0.0, first.omega / first.delta, 0.0, first.delta, z, sigma);
  double lower_gap = std::max(lower_ext - chord, 0.0);
  double ext = numerator > 0.0 ? (lower_gap + upper_ext) / numerator : 1.0;
  if (ext > 0.5) fail(ErrorKind::InsufficientModulusRange, "extension carries most of the integral");

  auto half = [&](double om, double omp, double d) {
    double b = om / (2.0 * sigma * omp) - d / (2.0 * sigma);
    return cv_alpha(std::max(b, 0.0), alpha) * sigma * omp;
  };
  std::size_t best = 0;
  double best_val = kInf;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double v = half(m[i].omega, m[i].omega_prime, m[i].delta);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double best_delta = m[best].delta;
  auto interp = [&](std::size_t i, double th) {
    double om = m[i].omega + th * (m[i + 1].omega - m[i].omega);
    double omp = m[i].omega_prime + th * (m[i + 1].omega_prime - m[i].omega_prime);
    double d = m[i].delta + th * (m[i + 1].delta - m[i].delta);
    return half(om, omp, d);
  };
  for (std::size_t i : {best > 0 ? best - 1 : m.size(), best}) {
    if (i + 1 >= m.size()) continue;
    double fm;
    double th = golden_section_minimize([&](double t) { return interp(i, t); }, 0.0, 1.0, fm, 1e-10);
    if (fm < best_val) {
      best_val = fm;
      best_delta = m[i].delta + th * (m[i + 1].delta - m[i].delta);
    }
  }
  double kappa = numerator / (2.0 * best_val);
  if (detail) {
    detail->numerator = numerator;
    detail->denominator = 2.0 * best_val;
    detail->extension_mass = ext;
    detail->delta_at_min = best_delta;
  }
  return kappa;
}

double rho_affine(double tau, double sigma) {
  double s2 = sigma * sigma, t2 = tau * tau;
  if (std::isinf(tau)) return s2;
  return s2 * t2 / (s2 + t2);
}

MinimaxRiskBounds rho_nonlinear_bounds(double tau, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorKind::NonpositiveSd, "sigma must be positive");
  MinimaxRiskBounds b;
  if (!(tau > 0.0)) return b;
  double ts = tau / sigma;
  ThreePoint prior = best_three_point(ts);
  b.lower = std::max(prior.bayes_risk(), 0.0) * sigma * sigma;
  double worst = 0.0;
  const int grid = 48;
  for (int i = 0; i <= grid; ++i) worst = std::max(worst, prior.risk_at(ts * i / grid));
  b.upper = std::min(rho_affine(tau, sigma), worst * sigma * sigma);
  // Universal affine-to-minimax ratio for the bounded normal mean.
  b.lower = std::max(b.lower, rho_affine(tau, sigma) / 1.25);
  b.lower = std::min(b.lower, b.upper);
  return b;
}

std::pair<double, double> kappa_mse_bracket(const std::vector<ModulusPoint>& modulus_in, double sigma) {
  std::vector<ModulusPoint> m = tidy(modulus_in);
  if (m.empty()) fail(ErrorKind::InsufficientModulusRange, "no usable modulus samples");
  const std::size_t cap = 60;
  std::vector<ModulusPoint> use;
  if (m.size() <= cap) {
    use = m;
  } else {
    for (std::size_t i = 0; i < cap; ++i) use.push_back(m[i * (m.size() - 1) / (cap - 1)]);
  }
  double A = 0.0, L = 0.0, U = 0.0;
  for (const auto& pt : use) {
    double g = (pt.omega / pt.delta) * (pt.omega / pt.delta);
    double tau = pt.delta / 2.0;
    MinimaxRiskBounds rb = rho_nonlinear_bounds(tau, sigma);
    A = std::max(A, g * rho_affine(tau, sigma));
    L = std::max(L, g * rb.lower);
    U = std::max(U, g * rb.upper);
  }
  if (!(A > 0.0)) fail(ErrorKind::InsufficientModulusRange, "degenerate modulus");
  return {L / A, U / A};
}

EfficiencyReport efficiency_report(const CanonicalDesign& design, const Penalty& penalty, double C, double alpha,
                                   double sigma) {
  if (!(C > 0.0)) fail(ErrorKind::InvalidArgument, "efficiency needs C > 0");
  SolutionPath path = solution_path(design, penalty);
  EfficiencyReport rep;
  rep.alpha = alpha;
  rep.sigma = sigma;
  int n = 50;
  auto coarse = modulus_samples(path, C, design, n);
  double k_coarse = kappa_flci(coarse, alpha, sigma);
  while (true) {
    auto fine = modulus_samples(path, C, design, 2 * n);
    KappaFlciDetail det;
    double k_fine = kappa_flci(fine, alpha, sigma, &det);
    if (std::abs(k_fine - k_coarse) <= 1e-3 || n >= 6400) {
      rep.kappa_flci = k_fine;
      rep.extension_mass = det.extension_mass;
      rep.extension_flag = det.extension_mass > 0.05;
      rep.modulus_samples = std::move(fine);
      rep.samples_used = static_cast<int>(rep.modulus_samples.size());
      break;
    }
    k_coarse = k_fine;
    n *= 2;
  }
  auto [lo, hi] = kappa_mse_bracket(rep.modulus_samples, sigma);
  rep.kappa_mse_lo = lo;
  rep.kappa_mse_hi = hi;
  return rep;
}

}  // namespace biasaware
