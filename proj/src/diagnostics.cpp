#include "biasaware/diagnostics.hpp"

#include "biasaware/errors.hpp"
#include "biasaware/solvers.hpp"
#include "biasaware/stats.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace biasaware {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix stack_x1(const Dataset& d) {
  Matrix X1(d.n(), 1 + d.k1());
  X1.col(0) = d.w;
  if (d.k1() > 0) X1.rightCols(d.k1()) = d.Z1;
  return X1;
}

Eigen::ColPivHouseholderQR<Matrix> x1_qr(const Matrix& X1) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X1);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < X1.cols())
    fail(ErrorKind::RankDeficientBaseline, "w and the baseline controls are collinear");
  return qr;
}

// Exact penalized Z2 coefficient in whitened coordinates.
Vector penalized_coef(const Matrix& X, const Vector& y, double p, double mu) {
  const Index k = X.cols();
  if (k == 0) return Vector::Zero(0);
  if (p == 1.0) {
    auto h = solvers::lasso_homotopy(X, y, mu);
    return solvers::lasso_at(h, mu);
  }
  if (p == 2.0) {
    double top = (2.0 * (X.transpose() * y)).norm();
    if (mu >= top) return Vector::Zero(k);
    solvers::RidgeSvd svd(X, y);
    auto g = [&](double lr) {
      double rho = std::exp(lr);
      return 2.0 * rho * svd.coef_norm(rho) - mu;
    };
    double lo = 0.0, hi = 0.0;
    while (g(hi) <= 0.0) hi += 2.0;
    lo = hi - 2.0;
    while (g(lo) >= 0.0) lo -= 2.0;
    double lr = find_root(g, lo, hi, 1e-14);
    return svd.coef(std::exp(lr));
  }
  auto res = solvers::penalized_least_squares(X, y, p, mu);
  if (!res.converged) fail(ErrorKind::ConvergenceFailure, "penalized outcome regression did not converge");
  return res.x;
}

double outcome_lambda_max(const PartialledOutcome& po) {
  double q = conjugate_exponent(po.p);
  return lp_norm(Vector(2.0 * (po.X2.transpose() * po.y)), q) / static_cast<double>(po.y.size());
}

}  // namespace

PartialledOutcome::PartialledOutcome(const Dataset& d, const PenaltySpec& spec)
    : penalty(spec, canonicalize(d)) {
  X1 = stack_x1(d);
  auto qr = x1_qr(X1);
  auto resid = [&](const Matrix& M) -> Matrix { return M - X1 * qr.solve(M); };
  y_raw = d.y;
  Z2_raw = d.Z2;
  y = resid(d.y);
  X2_raw = d.k2() ? resid(d.Z2) : Matrix(d.n(), 0);
  X2 = penalty.whiten(X2_raw);
  p = penalty.p();
  tss = (d.y.array() - d.y.mean()).square().sum();
}

OutcomeFit PartialledOutcome::finish(const Vector& u, double lambda) const {
  OutcomeFit fit;
  fit.lambda = lambda;
  fit.theta2_hat = u.size() ? penalty.unwhiten(u) : Vector::Zero(Z2_raw.cols());
  Vector partial = y_raw - Z2_raw * fit.theta2_hat;
  Eigen::ColPivHouseholderQR<Matrix> qr(X1);
  fit.theta1_hat = qr.solve(partial);
  fit.residuals = partial - X1 * fit.theta1_hat;
  fit.r2 = tss > 0.0 ? 1.0 - fit.residuals.squaredNorm() / tss : 0.0;
  return fit;
}

OutcomeFit outcome_regression(const PartialledOutcome& po, double lambda) {
  if (!(lambda > 0.0)) fail(ErrorKind::InvalidArgument, "outcome regression needs a positive penalty");
  double mu = static_cast<double>(po.y.size()) * lambda;
  if (std::isinf(lambda)) return po.finish(Vector::Zero(po.X2.cols()), lambda);
  return po.finish(penalized_coef(po.X2, po.y, po.p, mu), lambda);
}

OutcomeFit outcome_regression(const Dataset& d, const PenaltySpec& spec, double lambda) {
  return outcome_regression(PartialledOutcome(d, spec), lambda);
}

double rate_functional(double q, Index k, Index n) {
  double rn = std::sqrt(static_cast<double>(n));
  if (std::isinf(q)) return std::sqrt(std::log(static_cast<double>(std::max<Index>(k, 1)))) / rn;
  return std::pow(static_cast<double>(k), 1.0 / q) / rn;
}

double default_K_n(Index n) {
  return 2.0 * std::sqrt(std::log(std::log(static_cast<double>(std::max<Index>(n, 3))))) + 1.0;
}

InitialResidualFit default_initial_residuals(const Dataset& d, const PenaltySpec& spec, std::optional<double> K_n,
                                             double alpha) {
  PartialledOutcome po(d, spec);
  const Index n = d.n(), k = po.X2.cols();
  InitialResidualFit out;
  if (k == 0) {
    out.residuals = po.y;
    return out;
  }
  const double q = conjugate_exponent(po.p);
  Vector colnorm = po.X2.colwise().norm().transpose() / std::sqrt(static_cast<double>(n));
  double s_x = std::isinf(q) ? colnorm.maxCoeff() : std::sqrt(colnorm.squaredNorm() / static_cast<double>(k));
  double sd_y = po.y.norm() / std::sqrt(static_cast<double>(n));
  double kn = K_n ? *K_n : default_K_n(n);
  out.lambda0 = 2.0 * kn * rate_functional(q, std::max<Index>(k, 2), n) * sd_y * s_x;
  if (!(out.lambda0 > 0.0)) {
    out.residuals = po.y;
    return out;
  }
  OutcomeFit fit = outcome_regression(po, out.lambda0);
  out.lambda_final = out.lambda0;
  if (po.p == 1.0) {
    double lam = moderate_deviations_lambda(po.X2, fit.residuals, alpha);
    if (lam > 0.0) {
      fit = outcome_regression(po, lam);
      out.lambda_final = lam;
    }
  }
  out.residuals = fit.residuals;
  return out;
}

std::vector<std::pair<double, double>> r2_curve(const Dataset& d, const PenaltySpec& spec,
                                                const std::vector<double>& c_grid) {
  PartialledOutcome po(d, spec);
  for (std::size_t i = 0; i < c_grid.size(); ++i) {
    if (!(c_grid[i] >= 0.0)) fail(ErrorKind::InvalidArgument, "C grid must be nonnegative");
    if (i > 0 && c_grid[i] < c_grid[i - 1]) fail(ErrorKind::InvalidArgument, "C grid must be ascending");
  }
  const Index k = po.X2.cols();
  std::vector<std::pair<double, double>> out;
  if (k == 0) {
    double r2 = po.finish(Vector::Zero(0), 0.0).r2;
    for (double C : c_grid) out.emplace_back(C, r2);
    return out;
  }

  std::function<Vector(double)> solve;
  std::shared_ptr<solvers::LassoHomotopy> h;
  std::shared_ptr<solvers::RidgeSvd> svd;
  if (po.p == 1.0) {
    h = std::make_shared<solvers::LassoHomotopy>(solvers::lasso_homotopy(po.X2, po.y, 0.0));
    solve = [&po, h](double C) -> Vector {
      const auto& ks = h->knots;
      for (std::size_t i = 1; i < ks.size(); ++i) {
        double t0 = ks[i - 1].beta.lpNorm<1>(), t1 = ks[i].beta.lpNorm<1>();
        if (t1 >= C) {
          double th = t1 > t0 ? (C - t0) / (t1 - t0) : 1.0;
          return (1.0 - th) * ks[i - 1].beta + th * ks[i].beta;
        }
      }
      return ks.back().beta;
    };
  } else if (po.p == 2.0) {
    svd = std::make_shared<solvers::RidgeSvd>(po.X2, po.y);
    solve = [svd](double C) -> Vector {
      if (svd->coef_norm(0.0) <= C) return svd->coef(0.0);
      auto g = [&](double lr) { return svd->coef_norm(std::exp(lr)) - C; };
      double hi = 0.0;
      while (g(hi) >= 0.0) hi += 2.0;
      double lo = hi - 2.0;
      while (g(lo) <= 0.0) lo -= 2.0;
      return svd->coef(std::exp(find_root(g, lo, hi, 1e-14)));
    };
  } else {
    solve = [&po](double C) -> Vector {
      auto res = solvers::constrained_least_squares(po.X2, po.y, po.p, C);
      if (!res.converged) fail(ErrorKind::ConvergenceFailure, "constrained outcome fit did not converge");
      return res.x;
    };
  }
  for (double C : c_grid) {
    Vector u = C == 0.0 ? Vector::Zero(k) : solve(C);
    out.emplace_back(C, po.finish(u, 0.0).r2);
  }
  return out;
}

Breakdown breakdown_C(const BiasAwareAnalysis& analysis, double alpha, double null_value,
                      const std::vector<double>& c_grid, std::optional<double> lind_cap) {
  Breakdown b;
  bool found_inclusion = false;
  for (std::size_t i = 0; i < c_grid.size(); ++i) {
    if (i > 0 && c_grid[i] < c_grid[i - 1]) fail(ErrorKind::InvalidArgument, "C grid must be ascending");
    SensitivityRow row;
    row.C = c_grid[i];
    row.flci = analysis.report(row.C, alpha, Criterion::FLCI, lind_cap);
    row.excludes_null = null_value < row.flci.ci_lo || null_value > row.flci.ci_hi;
    if (!row.excludes_null && !found_inclusion) {
      found_inclusion = true;
      if (i > 0) b.c_star = c_grid[i - 1];
    }
    b.rows.push_back(std::move(row));
  }
  if (!found_inclusion && !c_grid.empty()) b.c_star = c_grid.back();
  return b;
}

Breakdown breakdown_C(const Dataset& d, const PenaltySpec& spec, double alpha, double null_value,
                      const std::vector<double>& c_grid) {
  BiasAwareAnalysis analysis(d, spec);
  return breakdown_C(analysis, alpha, null_value, c_grid);
}

std::string_view to_string(CLowerMode m) {
  return m == CLowerMode::KnownSigmaMC ? "known-sigma-mc" : "moderate-deviations";
}

double moderate_deviations_lambda(const Matrix& X2, const Vector& resid, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  if (resid.size() != X2.rows()) fail(ErrorKind::DimensionMismatch, "residuals and design differ in length");
  const double n = static_cast<double>(X2.rows());
  Vector e2 = resid.array().square();
  Vector sd = ((4.0 / (n * n)) * (X2.array().square().matrix().transpose() * e2)).array().sqrt();
  std::vector<double> s;
  for (Index j = 0; j < sd.size(); ++j)
    if (sd[j] > 0.0) s.push_back(sd[j]);
  if (s.empty()) return 0.0;
  auto f = [&](double lam) {
    double tot = 0.0;
    for (double v : s) tot += 2.0 * normal_cdf(-lam / v);
    return tot - alpha;
  };
  double smax = *std::max_element(s.begin(), s.end());
  double hi = smax * normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(s.size()))) + 10.0;
  return find_root(f, 0.0, hi, 1e-14);
}

double known_sigma_lambda(const Matrix& X2, double sigma2, double q, double alpha, int draws,
                          std::uint64_t seed) {
  if (!(sigma2 >= 0.0)) fail(ErrorKind::InvalidArgument, "variance must be nonnegative");
  if (draws < 1) fail(ErrorKind::InvalidArgument, "need at least one draw");
  const Index n = X2.rows();
  const double sigma = std::sqrt(sigma2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> stats;
  stats.reserve(draws);
  const int block = 512;
  Matrix Xt = X2.transpose();
  for (int start = 0; start < draws; start += block) {
    int b = std::min(block, draws - start);
    Matrix E(n, b);
    for (Index j = 0; j < b; ++j)
      for (Index i = 0; i < n; ++i) E(i, j) = sigma * normal(rng);
    Matrix G = Xt * E;
    for (Index j = 0; j < b; ++j) stats.push_back(2.0 * lp_norm(G.col(j), q) / static_cast<double>(n));
  }
  std::size_t idx = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(draws))) - 1;
  idx = std::min(idx, stats.size() - 1);
  std::nth_element(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(idx), stats.end());
  return stats[idx];
}

double c_hat_from_path(const PartialledOutcome& po, double lambda_star) {
  const Index k = po.X2.cols();
  if (k == 0) return 0.0;
  const double n = static_cast<double>(po.y.size());
  double lmax = outcome_lambda_max(po);
  if (!(lambda_star < lmax)) return 0.0;
  std::vector<double> grid;
  const int extra = 50;
  double base = std::max(lambda_star, 1e-12 * lmax);
  for (int i = 1; i <= extra; ++i) grid.push_back(base * std::pow(lmax / base, static_cast<double>(i) / extra));

  std::function<double(double)> norm_at;
  if (po.p == 1.0) {
    auto h = std::make_shared<solvers::LassoHomotopy>(solvers::lasso_homotopy(po.X2, po.y, n * base));
    for (const auto& kn : h->knots) {
      double lam = kn.lambda / n;
      if (lam > lambda_star) grid.push_back(lam);
    }
    norm_at = [h, n](double lam) { return solvers::lasso_at(*h, n * lam).lpNorm<1>(); };
  } else {
    norm_at = [&po, n](double lam) { return lp_norm(penalized_coef(po.X2, po.y, po.p, n * lam), po.p); };
  }
  double best = 0.0;
  for (double lam : grid) {
    if (!(lam > lambda_star)) continue;
    double v = (lam - lambda_star) / (lam + lambda_star) * norm_at(lam);
    best = std::max(best, v);
  }
  return best;
}

CLowerCI lower_ci_C(const Dataset& d, const PenaltySpec& spec, double alpha, CLowerMode mode,
                    const CLowerOptions& opt) {
  if (!(alpha > 0.0 && alpha < 0.5)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 0.5)");
  PartialledOutcome po(d, spec);
  CLowerCI out;
  out.mode = mode;
  out.alpha = alpha;
  if (mode == CLowerMode::KnownSigmaMC) {
    if (!d.sigma2) fail(ErrorKind::MissingSigma, "known-sigma mode needs sigma2");
    out.lambda_star_alpha =
        known_sigma_lambda(po.X2, *d.sigma2, conjugate_exponent(po.p), alpha, opt.draws, opt.seed);
  } else {
    if (!opt.residuals) fail(ErrorKind::MissingResiduals, "moderate deviations mode needs residuals");
    if (po.p != 1.0) fail(ErrorKind::InvalidArgument, "moderate deviations critical value needs an l1 penalty");
    out.lambda_star_alpha = moderate_deviations_lambda(po.X2, *opt.residuals, alpha);
  }
  out.c_hat = c_hat_from_path(po, out.lambda_star_alpha);
  return out;
}

DoubleLassoResult double_lasso_zz(const Dataset& d, double lambda_ps, double lambda_out, double alpha) {
  if (!(lambda_ps > 0.0) || !(lambda_out > 0.0)) fail(ErrorKind::InvalidArgument, "lasso weights must be positive");
  CanonicalDesign cd = canonicalize(d);
  const Index k = cd.k2();
  Vector pi = Vector::Zero(k);
  if (k > 0) pi = solvers::lasso_at(solvers::lasso_homotopy(cd.Z2_t, cd.w_t, lambda_ps), lambda_ps);
  Vector r = cd.w_t - cd.Z2_t * pi;
  double rw = r.dot(cd.w_t);
  if (std::abs(rw) < 1e-12 * cd.w_t.norm() * r.norm())
    fail(ErrorKind::ZeroDenominator, "(w - Z pi)'w is numerically zero");

  Matrix X(cd.n(), 1 + k);
  X.col(0) = cd.w_t;
  if (k > 0) X.rightCols(k) = cd.Z2_t;
  Vector coef = solvers::lasso_at(solvers::lasso_homotopy(X, cd.y_t, lambda_out), lambda_out);
  Vector resid = cd.y_t - X * coef;

  DoubleLassoResult out;
  out.beta_lasso = coef[0];
  out.beta_zz = coef[0] + r.dot(resid) / rw;
  Vector a = r / rw;
  out.sd = std::sqrt(robust_variance(a, resid));
  double z = normal_quantile(1.0 - alpha / 2.0);
  out.ci_lo = out.beta_zz - z * out.sd;
  out.ci_hi = out.beta_zz + z * out.sd;
  return out;
}

}  // namespace biasaware
