#include "biasaware/simharness.hpp"

#include "biasaware/diagnostics.hpp"
#include "biasaware/errors.hpp"
#include "biasaware/estimator.hpp"
#include "biasaware/parallel.hpp"
#include "biasaware/pathsolver.hpp"
#include "biasaware/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

namespace biasaware {

namespace {

enum StreamTag : std::uint32_t { kDesignStream = 1, kErrorStream = 2 };

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t rep, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

void require(bool ok, const std::string& msg) {
  if (!ok) fail(ErrorKind::InvalidSpec, msg);
}

double error_variance_for_selection(const DGPSpec& spec, const Dataset& design) {
  if (spec.error_scale == ErrorScale::Homo) return spec.sigma * spec.sigma;
  return spec.sigma * spec.sigma * (0.5 + design.w.array().abs()).square().mean();
}

Vector error_sd(const DGPSpec& spec, const Vector& w) {
  if (spec.error_scale == ErrorScale::Homo) return Vector::Constant(w.size(), spec.sigma);
  return spec.sigma * (0.5 + w.array().abs());
}

double length_of(const InferenceReport& r) { return r.ci_hi - r.ci_lo; }

}  // namespace

void DGPSpec::validate() const {
  require(n >= 3, "n must be at least 3");
  require(k1 >= 0 && k2 >= 1, "need k1 >= 0 and k2 >= 1");
  require(k1 < n, "k1 must be smaller than n");
  require(std::isfinite(beta), "beta must be finite");
  require(std::isfinite(gamma_C) && gamma_C >= 0.0, "gamma C must be finite and nonnegative");
  if (gamma_style == GammaStyle::Sparse) require(sparse_s >= 1 && sparse_s <= k2, "sparsity must lie in [1, k2]");
  if (gamma_style == GammaStyle::WorstCase)
    require(worst_case_alpha > 0.0 && worst_case_alpha < 0.5, "worst-case alpha must lie in (0, 0.5)");
  if (design == DesignKind::Correlated) require(rho > -1.0 && rho < 1.0, "rho must lie in (-1, 1)");
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  if (shock == Shock::StudentT) require(df > 2.0, "Student t shocks need df > 2");
  require(std::isfinite(w_loading), "w loading must be finite");
  if (known_sigma)
    require(error_scale == ErrorScale::Homo, "a known error variance needs homoskedastic errors");
  if (penalty.kind == PenaltyKind::Lp) require(penalty.p >= 1.0, "penalty exponent must be at least 1");
}

Dataset generate_design(const DGPSpec& spec, std::uint64_t rep) {
  spec.validate();
  auto rng = stream(spec.seed, spec.redraw_design ? rep : 0, kDesignStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = spec.n, k1 = spec.k1, k2 = spec.k2;

  Dataset d;
  d.Z1.resize(n, k1);
  for (Index j = 0; j < k1; ++j)
    for (Index i = 0; i < n; ++i) d.Z1(i, j) = j == 0 ? 1.0 : normal(rng);

  d.Z2.resize(n, k2);
  const double c = std::sqrt(1.0 - spec.rho * spec.rho);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k2; ++j) {
      double e = normal(rng);
      d.Z2(i, j) = (spec.design == DesignKind::Correlated && j > 0) ? spec.rho * d.Z2(i, j - 1) + c * e : e;
    }
  }
  const double dj = spec.w_loading / std::sqrt(static_cast<double>(k2));
  d.w = d.Z2.rowwise().sum() * dj;
  for (Index i = 0; i < n; ++i) d.w[i] += normal(rng);
  d.y = Vector::Zero(n);

  for (Index j = 0; j < k1; ++j) d.baseline_names.push_back(j == 0 ? "const" : "x" + std::to_string(j));
  for (Index j = 0; j < k2; ++j) d.restricted_names.push_back("z" + std::to_string(j + 1));
  return d;
}

Vector worst_case_direction(const Penalty& penalty, const Vector& v) {
  // v'W u over ||u||_p <= 1 is attained at the dual-norm maximizer of W'v.
  Vector g = penalty.whiten(v.transpose()).transpose();
  const double q = penalty.q();
  Vector u = Vector::Zero(g.size());
  if (g.size() == 0 || g.cwiseAbs().maxCoeff() == 0.0) return penalty.unwhiten(u);
  if (std::isinf(q)) {
    Index j;
    g.cwiseAbs().maxCoeff(&j);
    u[j] = g[j] > 0 ? 1.0 : -1.0;
  } else if (q == 1.0) {
    for (Index j = 0; j < g.size(); ++j) u[j] = g[j] > 0 ? 1.0 : (g[j] < 0 ? -1.0 : 0.0);
  } else {
    double gq = lp_norm(g, q);
    for (Index j = 0; j < g.size(); ++j) {
      double s = g[j] > 0 ? 1.0 : (g[j] < 0 ? -1.0 : 0.0);
      u[j] = s * std::pow(std::abs(g[j]) / gq, q - 1.0);
    }
  }
  return penalty.unwhiten(u);
}

Vector generate_gamma(const DGPSpec& spec, const Dataset& design) {
  const Index k2 = spec.k2;
  const double C = spec.gamma_C;
  CanonicalDesign cd = canonicalize(design);
  auto rescale = [&](Vector g) {
    double pen = penalty_value(spec.penalty, g, cd);
    require(pen > 0.0, "gamma direction has zero penalty");
    return Vector(g * (C / pen));
  };
  switch (spec.gamma_style) {
    case GammaStyle::Zero:
      return Vector::Zero(k2);
    case GammaStyle::DenseUniform:
      return rescale(Vector::Ones(k2));
    case GammaStyle::Sparse: {
      Vector g = Vector::Zero(k2);
      g.head(spec.sparse_s).setOnes();
      return rescale(g);
    }
    case GammaStyle::WorstCase: {
      Penalty pen(spec.penalty, cd);
      SolutionPath path = solution_path(cd, pen);
      SelectionResult sel = select_lambda(path, cd, pen, C, error_variance_for_selection(spec, design),
                                          spec.worst_case_alpha, Criterion::FLCI);
      if (sel.point.t_lambda > 0.0) return Vector(sel.point.pi_star * (C / sel.point.t_lambda));
      return Vector(C * worst_case_direction(pen, cd.Z2_t.transpose() * sel.est.a));
    }
  }
  return Vector::Zero(k2);
}

Draw generate_outcome(const DGPSpec& spec, const Dataset& design, const Vector& gamma2, std::uint64_t rep) {
  spec.validate();
  if (design.n() != spec.n || design.k2() != spec.k2 || gamma2.size() != spec.k2)
    fail(ErrorKind::InvalidSpec, "design or gamma does not match the spec");
  auto rng = stream(spec.seed, rep, kErrorStream);
  const Index n = spec.n;

  Draw out;
  out.data = design;
  Truth& t = out.truth;
  t.beta = spec.beta;
  t.gamma1 = Vector::Ones(spec.k1);
  t.gamma2 = gamma2;
  t.pen_gamma2 = penalty_value(spec.penalty, gamma2, canonicalize(design));
  t.error_sd = error_sd(spec, design.w);
  t.eps.resize(n);
  if (spec.shock == Shock::Gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < n; ++i) t.eps[i] = t.error_sd[i] * normal(rng);
  } else {
    std::student_t_distribution<double> student(spec.df);
    const double scale = std::sqrt((spec.df - 2.0) / spec.df);
    for (Index i = 0; i < n; ++i) t.eps[i] = t.error_sd[i] * scale * student(rng);
  }
  std::ostringstream desc;
  desc << (spec.error_scale == ErrorScale::Homo ? "homoskedastic" : "sd = sigma*(0.5+|w|)") << ", "
       << (spec.shock == Shock::Gaussian ? "gaussian" : "student-t(" + std::to_string(spec.df) + ")")
       << ", sigma = " << spec.sigma;
  t.error_process = desc.str();

  out.data.y = design.w * spec.beta + design.Z2 * gamma2 + t.eps;
  if (spec.k1 > 0) out.data.y += design.Z1 * t.gamma1;
  if (spec.known_sigma) out.data.sigma2 = spec.sigma * spec.sigma;
  return out;
}

Draw generate(const DGPSpec& spec, std::uint64_t rep) {
  Dataset design = generate_design(spec, rep);
  Vector gamma2 = generate_gamma(spec, design);
  return generate_outcome(spec, design, gamma2, rep);
}

CoverageSummary CoverageSummary::from_records(std::vector<RepRecord> records, double alpha, double C_assumed,
                                              double beta_true, bool has_zz) {
  CoverageSummary s;
  s.reps = records.size();
  s.alpha = alpha;
  s.C_assumed = C_assumed;
  s.beta_true = beta_true;
  s.has_zz = has_zz;
  const double R = static_cast<double>(s.reps);
  if (s.reps > 0) {
    double cov = 0.0, len = 0.0, zcov = 0.0, zlen = 0.0;
    for (const auto& r : records) {
      cov += r.covered ? 1.0 : 0.0;
      len += r.ci_hi - r.ci_lo;
      zcov += r.zz_covered ? 1.0 : 0.0;
      zlen += r.zz_hi - r.zz_lo;
    }
    s.coverage = cov / R;
    s.mean_length = len / R;
    s.mc_se = std::sqrt(s.coverage * (1.0 - s.coverage) / R);
    if (has_zz) {
      s.zz_coverage = zcov / R;
      s.zz_mean_length = zlen / R;
      s.zz_mc_se = std::sqrt(s.zz_coverage * (1.0 - s.zz_coverage) / R);
    }
  }
  s.records = std::move(records);
  return s;
}

std::pair<double, double> default_double_lasso_lambdas(const Dataset& d) {
  CanonicalDesign cd = canonicalize(d);
  const double n = static_cast<double>(cd.n());
  const double k = static_cast<double>(std::max<Index>(cd.k2(), 1));
  const double z = normal_quantile(1.0 - 0.05 / (2.0 * k));
  auto sd = [&](const Vector& v) { return std::sqrt((v.array() - v.mean()).square().sum() / (n - 1.0)); };
  return {2.2 * sd(cd.w_t) * std::sqrt(n) * z, 2.2 * sd(cd.y_t) * std::sqrt(n) * z};
}

CoverageSummary coverage_experiment(const DGPSpec& spec, double C_assumed, double alpha, std::size_t reps,
                                    const CoverageOptions& opt) {
  spec.validate();
  if (reps < 100) fail(ErrorKind::InvalidSpec, "coverage experiments need at least 100 replications");
  if (!(C_assumed >= 0.0) || !std::isfinite(C_assumed)) fail(ErrorKind::InvalidArgument, "C must be finite and nonnegative");

  const bool fixed = !spec.redraw_design;
  Dataset design0;
  Vector gamma0;
  std::optional<BiasAwareAnalysis> base;
  std::optional<SelectionResult> known_sel;
  if (fixed) {
    design0 = generate_design(spec, 0);
    gamma0 = generate_gamma(spec, design0);
    base.emplace(generate_outcome(spec, design0, gamma0, 0).data, spec.penalty);
    if (base->known_sigma()) {
      // Nothing in the known-variance pipeline depends on Y except a'Y.
      known_sel = select_lambda(base->path(), base->design(), base->penalty(), C_assumed, base->sigma2(), alpha,
                                opt.criterion, opt.lind_cap);
    }
  }
  std::optional<InferenceReport> known_report;
  if (known_sel) known_report = base->report_at(known_sel->point, C_assumed, alpha, opt.criterion);

  std::vector<RepRecord> records(reps);
  parallel_for(reps, [&](std::size_t i) {
    const std::uint64_t rep = i;
    Draw draw = fixed ? generate_outcome(spec, design0, gamma0, rep) : generate(spec, rep);
    RepRecord rec;
    rec.rep = rep;
    if (known_report) {
      const InferenceReport& r = *known_report;
      rec.beta_hat = known_sel->est.a.dot(draw.data.y);
      rec.maxbias = r.maxbias;
      rec.sd_used = r.sd_used;
      rec.ci_lo = rec.beta_hat - r.cv * r.sd_used;
      rec.ci_hi = rec.beta_hat + r.cv * r.sd_used;
    } else {
      BiasAwareAnalysis an = fixed ? base->rebind(draw.data) : BiasAwareAnalysis(draw.data, spec.penalty);
      InferenceReport r = an.report(C_assumed, alpha, opt.criterion, opt.lind_cap);
      rec.beta_hat = r.beta_hat;
      rec.maxbias = r.maxbias;
      rec.sd_used = r.sd_used;
      rec.ci_lo = r.ci_lo;
      rec.ci_hi = r.ci_hi;
    }
    rec.covered = rec.ci_lo <= spec.beta && spec.beta <= rec.ci_hi;
    if (opt.double_lasso) {
      auto [lps, lout] = default_double_lasso_lambdas(draw.data);
      DoubleLassoResult zz = double_lasso_zz(draw.data, opt.lambda_ps.value_or(lps), opt.lambda_out.value_or(lout), alpha);
      rec.zz_beta = zz.beta_zz;
      rec.zz_lo = zz.ci_lo;
      rec.zz_hi = zz.ci_hi;
      rec.zz_covered = zz.ci_lo <= spec.beta && spec.beta <= zz.ci_hi;
    }
    records[i] = rec;
  });

  CoverageSummary s = CoverageSummary::from_records(std::move(records), alpha, C_assumed, spec.beta, opt.double_lasso);
  Dataset d0 = fixed ? design0 : generate_design(spec, 0);
  s.pen_gamma2 = penalty_value(spec.penalty, fixed ? gamma0 : generate_gamma(spec, d0), canonicalize(d0));
  if (!opt.keep_records) s.records.clear();
  return s;
}

std::vector<RateCell> rate_experiment(const DGPSpec& base, const std::vector<Index>& n_grid,
                                      const std::vector<Index>& k_grid, double C, double alpha, std::size_t reps) {
  if (n_grid.empty() || k_grid.empty()) fail(ErrorKind::InvalidSpec, "empty grid");
  if (!std::is_sorted(n_grid.begin(), n_grid.end()) || !std::is_sorted(k_grid.begin(), k_grid.end()))
    fail(ErrorKind::InvalidSpec, "grids must be ascending");
  if (reps < 1) fail(ErrorKind::InvalidSpec, "need at least one replication");
  const double q = base.penalty.q();
  std::vector<RateCell> cells;
  for (Index n : n_grid) {
    for (Index k : k_grid) {
      DGPSpec spec = base;
      spec.n = n;
      spec.k2 = k;
      if (spec.gamma_style == GammaStyle::Sparse) spec.sparse_s = std::min(spec.sparse_s, k);
      spec.validate();
      std::vector<double> lengths(reps);
      parallel_for(reps, [&](std::size_t i) {
        Draw draw = generate(spec, i);
        BiasAwareAnalysis an(draw.data, spec.penalty);
        lengths[i] = length_of(an.report(C, alpha, Criterion::FLCI));
      });
      RateCell cell;
      cell.n = n;
      cell.k2 = k;
      cell.rate = rate_functional(q, k, n);
      cell.reps = reps;
      double m = 0.0;
      for (double l : lengths) m += l;
      m /= static_cast<double>(reps);
      double v = 0.0;
      for (double l : lengths) v += (l - m) * (l - m);
      cell.mean_length = m;
      cell.se_length = reps > 1 ? std::sqrt(v / static_cast<double>(reps - 1) / static_cast<double>(reps)) : 0.0;
      cells.push_back(cell);
    }
  }
  return cells;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::InvalidArgument, "need two or more matching points");
  const std::size_t m = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) fail(ErrorKind::InvalidArgument, "log-log slope needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) fail(ErrorKind::InvalidArgument, "x values are all equal");
  return sxy / sxx;
}

LowerCSummary lower_c_experiment(const DGPSpec& spec, double alpha, std::size_t reps, int draws) {
  spec.validate();
  if (!spec.known_sigma) fail(ErrorKind::InvalidSpec, "the lower-C experiment runs in the known-sigma mode");
  if (reps < 100) fail(ErrorKind::InvalidSpec, "need at least 100 replications");
  const double sigma2 = spec.sigma * spec.sigma;
  const bool fixed = !spec.redraw_design;

  Dataset design0;
  Vector gamma0;
  double lambda_fixed = 0.0;
  if (fixed) {
    design0 = generate_design(spec, 0);
    gamma0 = generate_gamma(spec, design0);
    PartialledOutcome po0(generate_outcome(spec, design0, gamma0, 0).data, spec.penalty);
    lambda_fixed = known_sigma_lambda(po0.X2, sigma2, conjugate_exponent(po0.p), alpha, draws, spec.seed);
  }

  std::vector<LowerCRecord> records(reps);
  parallel_for(reps, [&](std::size_t i) {
    Draw draw = fixed ? generate_outcome(spec, design0, gamma0, i) : generate(spec, i);
    PartialledOutcome po(draw.data, spec.penalty);
    const double n = static_cast<double>(spec.n);
    const double q = conjugate_exponent(po.p);
    double lam0 = fixed ? lambda_fixed : known_sigma_lambda(po.X2, sigma2, q, alpha, draws, spec.seed + i);

    LowerCRecord rec;
    rec.rep = i;
    rec.c_hat = c_hat_from_path(po, lam0);
    Eigen::ColPivHouseholderQR<Matrix> qr(po.X1);
    Vector Me = draw.truth.eps - po.X1 * qr.solve(draw.truth.eps);
    rec.noise_stat = 2.0 * lp_norm(po.X2.transpose() * Me, q) / n;
    rec.event = rec.noise_stat <= lam0;
    rec.min_slack = std::numeric_limits<double>::infinity();
    if (rec.event) {
      const double pen_true = po.penalty.value(draw.truth.gamma2);
      for (double f : {0.5, 0.9, 1.0, 1.1, 1.5, 2.0, 4.0}) {
        double lam = f * lam0;
        OutcomeFit fit = outcome_regression(po, lam);
        double fitted = (po.X2_raw * (fit.theta2_hat - draw.truth.gamma2)).squaredNorm() / n;
        double pen_hat = po.penalty.value(fit.theta2_hat);
        double lhs = fitted + (lam - lam0) * pen_hat;
        double rhs = (lam + lam0) * pen_true;
        rec.min_slack = std::min(rec.min_slack, rhs - lhs);
      }
    }
    records[i] = rec;
  });

  LowerCSummary s;
  s.reps = reps;
  s.alpha = alpha;
  s.lambda_star = lambda_fixed;
  std::size_t positive = 0;
  for (const auto& r : records) {
    if (r.c_hat > 0.0) ++positive;
    if (r.event) {
      ++s.event_count;
      // Solver accuracy allowance relative to the scale of the inequality.
      if (r.min_slack < -1e-8 * std::max(1.0, r.noise_stat)) ++s.basic_inequality_failures;
    }
  }
  s.positive_rate = static_cast<double>(positive) / static_cast<double>(reps);
  s.mc_se = std::sqrt(s.positive_rate * (1.0 - s.positive_rate) / static_cast<double>(reps));
  s.records = std::move(records);
  return s;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidSpec, "'" + key + "' expects a number, got '" + v + "'");
  }
}

Index to_index(const std::string& key, const std::string& v) {
  double x = to_real(key, v);
  if (x != std::floor(x)) fail(ErrorKind::InvalidSpec, "'" + key + "' expects an integer");
  return static_cast<Index>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::InvalidSpec, "'" + key + "' expects true or false");
}

std::vector<Index> to_index_list(const std::string& key, const std::string& v) {
  std::vector<Index> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_index(key, trim(item)));
  return out;
}

template <class E>
E to_enum(const std::string& key, const std::string& v, const std::map<std::string, E>& names) {
  auto it = names.find(v);
  if (it == names.end()) fail(ErrorKind::InvalidSpec, "unknown value '" + v + "' for '" + key + "'");
  return it->second;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  DGPSpec& g = cfg.dgp;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"kind", [&](auto& k, auto& v) {
         if (v != "coverage" && v != "rate" && v != "lower-c") fail(ErrorKind::InvalidSpec, "unknown " + k + " '" + v + "'");
         cfg.kind = v;
       }},
      {"n", [&](auto& k, auto& v) { g.n = to_index(k, v); }},
      {"k1", [&](auto& k, auto& v) { g.k1 = to_index(k, v); }},
      {"k2", [&](auto& k, auto& v) { g.k2 = to_index(k, v); }},
      {"beta", [&](auto& k, auto& v) { g.beta = to_real(k, v); }},
      {"gamma_style", [&](auto& k, auto& v) {
         g.gamma_style = to_enum<GammaStyle>(k, v, {{"zero", GammaStyle::Zero},
                                                    {"worst_case", GammaStyle::WorstCase},
                                                    {"dense_uniform", GammaStyle::DenseUniform},
                                                    {"sparse", GammaStyle::Sparse}});
       }},
      {"gamma_C", [&](auto& k, auto& v) { g.gamma_C = to_real(k, v); }},
      {"sparse_s", [&](auto& k, auto& v) { g.sparse_s = to_index(k, v); }},
      {"worst_case_alpha", [&](auto& k, auto& v) { g.worst_case_alpha = to_real(k, v); }},
      {"design", [&](auto& k, auto& v) {
         g.design = to_enum<DesignKind>(k, v, {{"iid_normal", DesignKind::IIDNormal},
                                               {"correlated", DesignKind::Correlated}});
       }},
      {"rho", [&](auto& k, auto& v) { g.rho = to_real(k, v); }},
      {"error", [&](auto& k, auto& v) {
         g.error_scale = to_enum<ErrorScale>(k, v, {{"homo", ErrorScale::Homo}, {"hetero_by_w", ErrorScale::HeteroByW}});
       }},
      {"sigma", [&](auto& k, auto& v) { g.sigma = to_real(k, v); }},
      {"shock", [&](auto& k, auto& v) {
         g.shock = to_enum<Shock>(k, v, {{"gaussian", Shock::Gaussian}, {"student_t", Shock::StudentT}});
       }},
      {"df", [&](auto& k, auto& v) { g.df = to_real(k, v); }},
      {"penalty", [&](auto& k, auto& v) {
         if (v == "l1") g.penalty = PenaltySpec::l1();
         else if (v == "l2") g.penalty = PenaltySpec::l2();
         else if (v == "predictor-l2") g.penalty = PenaltySpec::predictor_norm();
         else fail(ErrorKind::InvalidSpec, "unknown value '" + v + "' for '" + k + "'");
       }},
      {"w_loading", [&](auto& k, auto& v) { g.w_loading = to_real(k, v); }},
      {"redraw_design", [&](auto& k, auto& v) { g.redraw_design = to_bool(k, v); }},
      {"known_sigma", [&](auto& k, auto& v) { g.known_sigma = to_bool(k, v); }},
      {"seed", [&](auto& k, auto& v) {
         try {
           g.seed = std::stoull(v);
         } catch (const std::exception&) {
           fail(ErrorKind::InvalidSpec, "'" + k + "' expects an unsigned integer");
         }
       }},
      {"C", [&](auto& k, auto& v) { cfg.C_assumed = to_real(k, v); }},
      {"alpha", [&](auto& k, auto& v) { cfg.alpha = to_real(k, v); }},
      {"reps", [&](auto& k, auto& v) { cfg.reps = static_cast<std::size_t>(to_index(k, v)); }},
      {"double_lasso", [&](auto& k, auto& v) { cfg.double_lasso = to_bool(k, v); }},
      {"n_grid", [&](auto& k, auto& v) { cfg.n_grid = to_index_list(k, v); }},
      {"k_grid", [&](auto& k, auto& v) { cfg.k_grid = to_index_list(k, v); }},
  };

  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::InvalidSpec, "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorKind::InvalidSpec, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(key, value);
  }
  cfg.dgp.validate();
  if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5)) fail(ErrorKind::InvalidSpec, "alpha must lie in (0, 0.5)");
  if (cfg.kind == "rate" && (cfg.n_grid.empty() || cfg.k_grid.empty()))
    fail(ErrorKind::InvalidSpec, "rate experiments need n_grid and k_grid");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileError, "cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FileError, "cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

}  // namespace

void write_records_csv(const CoverageSummary& s, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "rep,beta_hat,ci_lo,ci_hi,maxbias,sd_used,covered";
  if (s.has_zz) out << ",zz_beta,zz_lo,zz_hi,zz_covered";
  out << '\n';
  for (const auto& r : s.records) {
    out << r.rep << ',' << r.beta_hat << ',' << r.ci_lo << ',' << r.ci_hi << ',' << r.maxbias << ',' << r.sd_used
        << ',' << (r.covered ? 1 : 0);
    if (s.has_zz) out << ',' << r.zz_beta << ',' << r.zz_lo << ',' << r.zz_hi << ',' << (r.zz_covered ? 1 : 0);
    out << '\n';
  }
}

void write_rate_csv(const std::vector<RateCell>& cells, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "n,k2,rate,mean_length,se_length,reps\n";
  for (const auto& c : cells)
    out << c.n << ',' << c.k2 << ',' << c.rate << ',' << c.mean_length << ',' << c.se_length << ',' << c.reps << '\n';
}

void write_lower_c_csv(const LowerCSummary& s, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "rep,c_hat,noise_stat,event,min_slack\n";
  for (const auto& r : s.records)
    out << r.rep << ',' << r.c_hat << ',' << r.noise_stat << ',' << (r.event ? 1 : 0) << ','
        << (r.event ? r.min_slack : 0.0) << '\n';
}

}  // namespace biasaware
