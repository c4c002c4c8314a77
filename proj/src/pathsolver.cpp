#include "biasaware/pathsolver.hpp"

#include "biasaware/errors.hpp"
#include "biasaware/solvers.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>

namespace biasaware {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroRss = 1e-24;  // relative to ||w_t||^2

PathPoint make_point(double lambda, double t, Vector pi, const Vector& w, Vector fitted) {
  PathPoint pp;
  pp.lambda = lambda;
  pp.t_lambda = t;
  pp.pi_star = std::move(pi);
  pp.residual = w - fitted;
  pp.rss = pp.residual.squaredNorm();
  return pp;
}

bool degenerate(const PathPoint& pp, double wtw) { return pp.rss <= kZeroRss * wtw; }

std::vector<double> log_grid(double hi, double lo, int count) {
  std::vector<double> g(count);
  double a = std::log(hi), b = std::log(lo);
  for (int i = 0; i < count; ++i) g[i] = std::exp(a + (b - a) * i / std::max(count - 1, 1));
  return g;
}

bool full_column_rank(const Matrix& A) {
  if (A.cols() >= A.rows()) return false;
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(kRankTolerance);
  return qr.rank() == A.cols();
}

}  // namespace

SolutionPath ridge_path(const CanonicalDesign& design, const Penalty& penalty, std::vector<double> lambdas) {
  if (penalty.p() != 2.0) fail(ErrorKind::InvalidArgument, "ridge path needs an l2 penalty");
  auto A = std::make_shared<Matrix>(penalty.whiten(design.Z2_t));
  auto svd = std::make_shared<solvers::RidgeSvd>(*A, design.w_t);
  auto pen = std::make_shared<Penalty>(penalty);
  Vector w = design.w_t;
  const double wtw = w.squaredNorm();
  const Index k2 = design.k2();

  SolutionPath path;
  path.kind = PathKind::Ridge;
  path.evaluate = [svd, pen, w, k2](double lambda) {
    if (std::isinf(lambda)) return make_point(lambda, 0.0, Vector::Zero(k2), w, Vector::Zero(w.size()));
    if (lambda < 0.0) fail(ErrorKind::InvalidArgument, "negative ridge weight");
    if (lambda == 0.0 && !svd->full_column_rank())
      fail(ErrorKind::SingularSystem, "ridge system is singular at lambda = 0");
    Vector u = svd->coef(lambda);
    return make_point(lambda, u.norm(), pen->unwhiten(u), w, svd->fitted(lambda));
  };

  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  for (double lam : lambdas) {
    if (lam == 0.0 && !svd->full_column_rank()) {
      path.truncated = true;
      path.note = "lambda = 0 dropped: design is not of full column rank";
      continue;
    }
    PathPoint pp = path.evaluate(lam);
    if (degenerate(pp, wtw)) {
      path.truncated = true;
      path.note = "residual reached zero; path truncated at the last valid point";
      continue;
    }
    path.points.push_back(std::move(pp));
  }
  if (path.points.empty()) fail(ErrorKind::DegeneratePath, "no ridge point with positive residual");
  return path;
}

SolutionPath ridge_path(const CanonicalDesign& design, const Matrix& M, const std::vector<double>& lambdas) {
  std::optional<Penalty> pen;
  try {
    pen.emplace(PenaltySpec::l2(M), design);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SingularWeightMatrix) fail(ErrorKind::SingularSystem, e.what());
    throw;
  }
  return ridge_path(design, *pen, lambdas);
}

std::vector<double> default_ridge_grid(const CanonicalDesign& design, const Penalty& penalty, int count) {
  solvers::RidgeSvd svd(penalty.whiten(design.Z2_t), design.w_t);
  double hi = 1e4 * svd.trace_scale();
  if (!(hi > 0.0)) hi = 1.0;
  std::vector<double> g = log_grid(hi, 1e-6 * hi, count);
  g.insert(g.begin(), kInf);
  g.push_back(0.0);
  return g;
}

SolutionPath lasso_path(const CanonicalDesign& design, const Penalty& penalty, const LassoOptions& opt) {
  if (penalty.p() != 1.0) fail(ErrorKind::InvalidArgument, "lasso path needs an l1 penalty");
  if (design.k2() < 1) fail(ErrorKind::InvalidArgument, "lasso path needs at least one restricted control");
  auto A = std::make_shared<Matrix>(penalty.whiten(design.Z2_t));
  const Vector& w = design.w_t;
  const double wtw = w.squaredNorm();
  bool to_zero = full_column_rank(*A);
  double lmax = 2.0 * (A->transpose() * w).cwiseAbs().maxCoeff();
  auto h = std::make_shared<solvers::LassoHomotopy>(
      solvers::lasso_homotopy(*A, w, to_zero ? 0.0 : opt.floor_ratio * lmax));
  auto pen = std::make_shared<Penalty>(penalty);

  SolutionPath path;
  path.kind = PathKind::Lasso;
  path.truncated = h->truncated;
  path.note = h->note;
  Vector wc = w;
  path.evaluate = [A, h, pen, wc](double lambda) {
    Vector u = solvers::lasso_at(*h, lambda);
    double lam = std::max(lambda, h->knots.back().lambda);
    return make_point(lam, u.lpNorm<1>(), pen->unwhiten(u), wc, *A * u);
  };
  for (const auto& kn : h->knots) {
    PathPoint pp = make_point(kn.lambda, kn.beta.lpNorm<1>(), pen->unwhiten(kn.beta), w, *A * kn.beta);
    if (degenerate(pp, wtw)) {
      path.truncated = true;
      break;
    }
    path.points.push_back(std::move(pp));
  }
  return path;
}

SolutionPath lasso_path(const CanonicalDesign& design) {
  return lasso_path(design, Penalty(PenaltySpec::l1(), design));
}

namespace {

struct ConstrainedEngine {
  Matrix A;
  Vector w;
  std::shared_ptr<Penalty> pen;
  GenericOptions opt;
  Index k2;

  PathPoint solve(double t, const Vector* warm, Vector* u_out = nullptr) const {
    if (t < 0.0) fail(ErrorKind::InvalidArgument, "negative constraint level");
    if (t == 0.0) {
      if (u_out) *u_out = Vector::Zero(A.cols());
      return make_point(0.0, 0.0, Vector::Zero(k2), w, Vector::Zero(w.size()));
    }
    solvers::FirstOrderOptions fo;
    fo.rel_gap = opt.rel_gap;
    fo.max_iter = opt.max_iter;
    auto res = solvers::constrained_least_squares(A, w, pen->p(), t, warm, fo);
    if (!res.converged)
      fail(ErrorKind::ConvergenceFailure, "constrained solve did not reach the gap tolerance at t = " +
                                              std::to_string(t));
    if (u_out) *u_out = res.x;
    return make_point(t, t, pen->unwhiten(res.x), w, A * res.x);
  }
};

}  // namespace

PathPoint constrained_point(const CanonicalDesign& design, const Penalty& penalty, double t,
                            const GenericOptions& opt) {
  ConstrainedEngine eng{penalty.whiten(design.Z2_t), design.w_t, std::make_shared<Penalty>(penalty), opt,
                        design.k2()};
  return eng.solve(t, nullptr);
}

SolutionPath generic_path(const CanonicalDesign& design, const Penalty& penalty, std::vector<double> t_grid,
                          const GenericOptions& opt) {
  auto eng = std::make_shared<ConstrainedEngine>(
      ConstrainedEngine{penalty.whiten(design.Z2_t), design.w_t, std::make_shared<Penalty>(penalty), opt,
                        design.k2()});
  const double wtw = design.w_t.squaredNorm();
  SolutionPath path;
  path.kind = PathKind::Generic;
  path.evaluate = [eng](double t) { return eng->solve(t, nullptr); };

  std::sort(t_grid.begin(), t_grid.end());
  t_grid.erase(std::unique(t_grid.begin(), t_grid.end()), t_grid.end());
  Vector warm;
  for (double t : t_grid) {
    Vector u;
    PathPoint pp = eng->solve(t, warm.size() ? &warm : nullptr, &u);
    if (degenerate(pp, wtw)) {
      path.truncated = true;
      path.note = "residual reached zero; path truncated at the last valid point";
      break;
    }
    if (!path.points.empty()) {
      double prev = path.points.back().rss;
      if (pp.rss > prev * (1.0 + 1e-7) + 1e-12 * wtw)
        fail(ErrorKind::ConvergenceFailure, "residual sum of squares increased along the constrained path");
    }
    warm = std::move(u);
    path.points.push_back(std::move(pp));
  }
  if (path.points.empty()) fail(ErrorKind::DegeneratePath, "no constrained point with positive residual");
  return path;
}

SolutionPath generic_path(const CanonicalDesign& design, const PenaltySpec& spec, std::vector<double> t_grid,
                          const GenericOptions& opt) {
  return generic_path(design, Penalty(spec, design), std::move(t_grid), opt);
}

SolutionPath solution_path(const CanonicalDesign& design, const Penalty& penalty) {
  if (penalty.p() == 1.0) return lasso_path(design, penalty);
  if (penalty.p() == 2.0) return ridge_path(design, penalty, default_ridge_grid(design, penalty));
  Matrix A = penalty.whiten(design.Z2_t);
  solvers::RidgeSvd svd(A, design.w_t);
  double tmax = lp_norm(svd.coef(0.0), penalty.p());
  std::vector<double> grid{0.0};
  for (double t : log_grid(tmax, 1e-4 * tmax, 60)) grid.push_back(t);
  return generic_path(design, penalty, grid);
}

ModulusPoint modulus_from_path(const PathPoint& pp, double C, const CanonicalDesign& design) {
  if (!(pp.t_lambda > 0.0)) fail(ErrorKind::ZeroPenaltySolution, "modulus undefined where the penalty is zero");
  if (!(pp.rss > 0.0)) fail(ErrorKind::DegeneratePath, "modulus undefined at zero residual");
  double rnorm = std::sqrt(pp.rss);
  double wr = design.w_t.dot(pp.residual);
  if (!(wr > 0.0)) fail(ErrorKind::ZeroDenominator, "w'(w - Z pi) is not positive");
  ModulusPoint m;
  m.omega = 2.0 * C / pp.t_lambda;
  m.delta = m.omega * rnorm;
  m.omega_prime = rnorm / wr;
  return m;
}

KktCheck lasso_kkt(const PathPoint& pp, const CanonicalDesign& design, double lambda_scale) {
  KktCheck k;
  Vector c = 2.0 * (design.Z2_t.transpose() * pp.residual);
  for (Index j = 0; j < c.size(); ++j) {
    if (pp.pi_star[j] != 0.0) {
      double s = pp.pi_star[j] > 0 ? 1.0 : -1.0;
      k.active_deviation = std::max(k.active_deviation, std::abs(c[j] - pp.lambda * s) / lambda_scale);
    } else {
      k.inactive_excess = std::max(k.inactive_excess, (std::abs(c[j]) - pp.lambda) / lambda_scale);
    }
  }
  k.inactive_excess = std::max(k.inactive_excess, 0.0);
  return k;
}

void write_path_csv(const SolutionPath& path, std::ostream& out) {
  out << "lambda,t_lambda,rss,pi_norm\n";
  out.precision(17);
  for (const auto& pp : path.points)
    out << pp.lambda << ',' << pp.t_lambda << ',' << pp.rss << ',' << pp.pi_star.norm() << '\n';
}

}  // namespace biasaware
