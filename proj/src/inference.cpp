#include "biasaware/inference.hpp"

#include "biasaware/diagnostics.hpp"
#include "biasaware/errors.hpp"
#include "biasaware/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace biasaware {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 0.5)");
}

}  // namespace

double cv_alpha(double B, double alpha) {
  check_alpha(alpha);
  if (!std::isfinite(B)) fail(ErrorKind::InvalidArgument, "bias ratio must be finite");
  B = std::abs(B);
  // P(|N(B,1)| > c) - alpha, decreasing in c.
  auto excess = [B, alpha](double c) { return normal_sf(c - B) + normal_sf(c + B) - alpha; };
  double lo = std::max(normal_quantile(1.0 - alpha / 2.0), B + normal_quantile(1.0 - alpha));
  double hi = B + normal_quantile(1.0 - alpha / 2.0);
  if (excess(lo) <= 0.0) return lo;
  if (excess(hi) >= 0.0) return hi;
  return find_root(excess, lo, hi, 1e-15);
}

double flci_half_length(double maxbias, double sd, double alpha) {
  if (sd < 0.0) fail(ErrorKind::NonpositiveSd, "negative standard deviation");
  if (sd == 0.0) {
    check_alpha(alpha);
    return maxbias;
  }
  return sd * cv_alpha(maxbias / sd, alpha);
}

std::pair<double, double> flci(double beta_hat, double maxbias, double sd, double alpha) {
  if (!(sd > 0.0)) fail(ErrorKind::NonpositiveSd, "standard deviation must be positive");
  double chi = sd * cv_alpha(maxbias / sd, alpha);
  return {beta_hat - chi, beta_hat + chi};
}

std::string_view to_string(Criterion c) { return c == Criterion::MSE ? "mse" : "flci"; }

double criterion_value(Criterion c, double maxbias, double variance, double alpha) {
  if (c == Criterion::MSE) return variance + maxbias * maxbias;
  return flci_half_length(maxbias, std::sqrt(std::max(variance, 0.0)), alpha);
}

SelectionResult select_lambda(const SolutionPath& path, const CanonicalDesign& design, const Penalty& penalty,
                              double C, double sigma2, double alpha, Criterion criterion,
                              std::optional<double> lind_cap) {
  check_alpha(alpha);
  if (!(C >= 0.0) || !std::isfinite(C)) fail(ErrorKind::InvalidArgument, "C must be finite and nonnegative");
  if (!(sigma2 >= 0.0)) fail(ErrorKind::InvalidArgument, "variance must be nonnegative");
  if (path.points.empty()) fail(ErrorKind::InvalidArgument, "empty solution path");
  const auto& pts = path.points;
  const std::size_t m = pts.size();

  auto score = [&](const LinearEstimator& est) {
    if (lind_cap && est.lind > *lind_cap) return kInf;
    return criterion_value(criterion, C * est.bbar, est.V_homo, alpha);
  };

  SelectionResult res;
  res.grid_objective.resize(m);
  std::vector<LinearEstimator> ests;
  ests.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    ests.push_back(weights_from_path(pts[i], design, penalty, sigma2));
    res.grid_objective[i] = score(ests.back());
    if (std::isfinite(res.grid_objective[i])) ++res.feasible_count;
  }
  if (res.feasible_count == 0) fail(ErrorKind::EmptyFeasibleSet, "the Lindeberg cap excludes every path point");
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (res.grid_objective[i] < res.grid_objective[best]) best = i;
  res.grid_index = best;

  double best_obj = res.grid_objective[best];
  double best_param = pts[best].lambda;
  bool refined = false;

  auto full_score = [&](double param) { return score(weights_from_path(path.evaluate(param), design, penalty, sigma2)); };
  auto consider = [&](double param, double obj) {
    if (obj < best_obj) {
      best_obj = obj;
      best_param = param;
      refined = true;
    }
  };

  if (path.kind == PathKind::Lasso) {
    const Vector& w = design.w_t;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const Vector& r0 = pts[i].residual;
      Vector d = pts[i + 1].residual - r0;
      double a0 = r0.squaredNorm(), b0 = r0.dot(d), c0 = d.squaredNorm();
      double e0 = r0.dot(w), f0 = d.dot(w);
      double t0 = pts[i].t_lambda, t1 = pts[i + 1].t_lambda;
      auto f = [&](double th) {
        double rr = a0 + 2.0 * b0 * th + c0 * th * th;
        double rw = e0 + f0 * th;
        double t = t0 + (t1 - t0) * th;
        if (!(rr > 0.0) || !(rw > 0.0)) return kInf;
        if (lind_cap) {
          double mx = (r0 + th * d).cwiseAbs2().maxCoeff();
          if (mx / rr > *lind_cap) return kInf;
        }
        double bbar;
        if (t > 0.0) {
          bbar = (rw - rr) / (t * rw);
        } else {
          bbar = ests[i].bbar;
        }
        double V = sigma2 * rr / (rw * rw);
        return criterion_value(criterion, C * std::max(bbar, 0.0), V, alpha);
      };
      double fm;
      double th = golden_section_minimize(f, 0.0, 1.0, fm, 1e-10);
      if (fm < best_obj) {
        double lam = pts[i].lambda + th * (pts[i + 1].lambda - pts[i].lambda);
        consider(lam, full_score(lam));
      }
    }
  } else {
    auto refine = [&](std::size_t i) {
      double p0 = pts[i].lambda, p1 = pts[i + 1].lambda;
      if (std::isinf(p0) || std::isinf(p1)) return;
      double lo = std::min(p0, p1), hi = std::max(p0, p1);
      double fm;
      if (lo == 0.0) {
        double x = golden_section_minimize(full_score, lo, hi, fm, 1e-10);
        consider(x, fm);
      } else {
        auto g = [&](double s) { return full_score(std::exp(s)); };
        double s = golden_section_minimize(g, std::log(lo), std::log(hi), fm, 1e-12);
        consider(std::exp(s), fm);
      }
    };
    if (best > 0) refine(best - 1);
    if (best + 1 < m) refine(best);
  }

  if (refined) {
    res.point = path.evaluate(best_param);
    res.est = weights_from_path(res.point, design, penalty, sigma2);
    res.objective = score(res.est);
    if (!(res.objective <= res.grid_objective[best])) {
      res.point = pts[best];
      res.est = ests[best];
      res.objective = res.grid_objective[best];
    }
  } else {
    res.point = pts[best];
    res.est = ests[best];
    res.objective = res.grid_objective[best];
  }
  return res;
}

double robust_variance(const Vector& a, const Vector& resid) {
  if (a.size() != resid.size()) fail(ErrorKind::DimensionMismatch, "weights and residuals differ in length");
  return (a.array().square() * resid.array().square()).sum();
}

BiasAwareAnalysis::BiasAwareAnalysis(const Dataset& d, const PenaltySpec& spec, std::optional<Vector> init_resid)
    : spec_(spec), design_(canonicalize(d)), penalty_(spec, design_) {
  if (d.k2() == 0) fail(ErrorKind::SchemaError, "no restricted controls to penalize");
  set_outcome(d, std::move(init_resid));
  path_ = solution_path(design_, penalty_);
}

BiasAwareAnalysis::BiasAwareAnalysis(const BiasAwareAnalysis& base, const Dataset& d,
                                     std::optional<Vector> init_resid)
    : spec_(base.spec_), design_(base.design_), penalty_(base.penalty_), path_(base.path_) {
  if (d.n() != design_.n() || d.k2() != design_.k2())
    fail(ErrorKind::DimensionMismatch, "rebound dataset has a different shape");
  design_.y_t = canonicalize(d).y_t;
  set_outcome(d, std::move(init_resid));
}

BiasAwareAnalysis BiasAwareAnalysis::rebind(const Dataset& d, std::optional<Vector> init_resid) const {
  return BiasAwareAnalysis(*this, d, std::move(init_resid));
}

void BiasAwareAnalysis::set_outcome(const Dataset& d, std::optional<Vector> init_resid) {
  known_ = d.sigma2.has_value();
  if (init_resid) {
    if (init_resid->size() != d.n()) fail(ErrorKind::DimensionMismatch, "initial residuals have the wrong length");
    if (!init_resid->allFinite()) fail(ErrorKind::NonFiniteValue, "initial residuals are not finite");
    resid_ = std::move(*init_resid);
  } else if (!known_) {
    resid_ = default_initial_residuals(d, spec_).residuals;
  } else {
    resid_.resize(0);
  }
  sigma2_ = known_ ? *d.sigma2 : resid_.squaredNorm() / static_cast<double>(d.n());
}

InferenceReport BiasAwareAnalysis::report_at(const PathPoint& pp, double C, double alpha, Criterion criterion) const {
  LinearEstimator est = weights_from_path(pp, design_, penalty_, sigma2_);
  InferenceReport r;
  r.beta_hat = apply(est, design_.y_t);
  r.bbar = est.bbar;
  r.maxbias = C * est.bbar;
  r.sd_homo = std::sqrt(est.V_homo);
  r.sd_robust = resid_.size() ? std::sqrt(robust_variance(est.a, resid_)) : std::numeric_limits<double>::quiet_NaN();
  r.sd_used = known_ ? r.sd_homo : r.sd_robust;
  r.variance_mode = known_ ? "known" : "robust";
  if (!(r.sd_used > 0.0)) fail(ErrorKind::NonpositiveSd, "standard error of the selected estimator is zero");
  r.cv = cv_alpha(r.maxbias / r.sd_used, alpha);
  r.ci_lo = r.beta_hat - r.cv * r.sd_used;
  r.ci_hi = r.beta_hat + r.cv * r.sd_used;
  r.lambda_chosen = pp.lambda;
  r.t_chosen = pp.t_lambda;
  r.criterion = criterion;
  r.lind = est.lind;
  r.alpha = alpha;
  r.C = C;
  r.sigma2 = sigma2_;
  return r;
}

InferenceReport BiasAwareAnalysis::report(double C, double alpha, Criterion criterion,
                                          std::optional<double> lind_cap) const {
  SelectionResult sel = select_lambda(path_, design_, penalty_, C, sigma2_, alpha, criterion, lind_cap);
  return report_at(sel.point, C, alpha, criterion);
}

std::pair<InferenceReport, InferenceReport> BiasAwareAnalysis::reports(double C, double alpha,
                                                                       std::optional<double> lind_cap) const {
  return {report(C, alpha, Criterion::MSE, lind_cap), report(C, alpha, Criterion::FLCI, lind_cap)};
}

std::pair<InferenceReport, InferenceReport> baseline_pipeline(const Dataset& d, const PenaltySpec& spec, double C,
                                                              double alpha, const InitResiduals& init,
                                                              std::optional<double> lind_cap) {
  std::optional<Vector> resid;
  if (init.mode == InitResidMode::Provided) resid = init.provided;
  BiasAwareAnalysis analysis(d, spec, resid);
  return analysis.reports(C, alpha, lind_cap);
}

}  // namespace biasaware
