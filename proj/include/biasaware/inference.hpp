#pragma once

#include "biasaware/estimator.hpp"
#include "biasaware/model.hpp"
#include "biasaware/pathsolver.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace biasaware {

/// 1 - alpha quantile of |N(B, 1)|.
double cv_alpha(double B, double alpha);

/// Half-length sd * cv_alpha(maxbias / sd); tends to maxbias as sd -> 0.
double flci_half_length(double maxbias, double sd, double alpha);

std::pair<double, double> flci(double beta_hat, double maxbias, double sd, double alpha);

enum class Criterion { MSE, FLCI };

std::string_view to_string(Criterion c);

/// Value of the selection objective for a given bias bound and variance.
double criterion_value(Criterion c, double maxbias, double variance, double alpha);

struct SelectionResult {
  PathPoint point;
  LinearEstimator est;
  double objective = 0.0;
  std::size_t grid_index = 0;           // best grid point before refinement
  std::vector<double> grid_objective;   // +inf where the Lindeberg cap binds
  std::size_t feasible_count = 0;
};

SelectionResult select_lambda(const SolutionPath& path, const CanonicalDesign& design, const Penalty& penalty,
                              double C, double sigma2, double alpha, Criterion criterion,
                              std::optional<double> lind_cap = std::nullopt);

/// HC0 variance sum_i a_i^2 resid_i^2.
double robust_variance(const Vector& a, const Vector& resid);

struct InferenceReport {
  double beta_hat = 0.0;
  double maxbias = 0.0;
  double bbar = 0.0;
  double sd_homo = 0.0;
  double sd_robust = 0.0;
  double sd_used = 0.0;
  double cv = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double lambda_chosen = 0.0;
  double t_chosen = 0.0;
  Criterion criterion = Criterion::FLCI;
  double lind = 0.0;
  double alpha = 0.05;
  double C = 0.0;
  double sigma2 = 0.0;
  std::string variance_mode;  // "robust", or "known" in the idealized mode
};

/// Reusable state of the baseline algorithm: the canonical design, the
/// C-independent solution path, the variance estimate and the residuals used
/// for the robust variance.
class BiasAwareAnalysis {
 public:
  /// With `init_resid` unset the residuals come from the regularized outcome
  /// regression. In the idealized mode (sigma2 set) they are only computed
  /// when supplied, and sd_robust is then NaN.
  BiasAwareAnalysis(const Dataset& d, const PenaltySpec& spec, std::optional<Vector> init_resid = std::nullopt);

  /// Same design and path, new outcome. `d` must share w, Z1 and Z2 with the original.
  BiasAwareAnalysis rebind(const Dataset& d, std::optional<Vector> init_resid = std::nullopt) const;

  InferenceReport report(double C, double alpha, Criterion criterion,
                         std::optional<double> lind_cap = std::nullopt) const;

  /// (MSE report, FLCI report).
  std::pair<InferenceReport, InferenceReport> reports(double C, double alpha,
                                                      std::optional<double> lind_cap = std::nullopt) const;

  /// Report for an already selected path point.
  InferenceReport report_at(const PathPoint& pp, double C, double alpha, Criterion criterion) const;

  const CanonicalDesign& design() const { return design_; }
  const Penalty& penalty() const { return penalty_; }
  const SolutionPath& path() const { return path_; }
  const Vector& residuals() const { return resid_; }
  double sigma2() const { return sigma2_; }
  bool known_sigma() const { return known_; }

 private:
  BiasAwareAnalysis(const BiasAwareAnalysis& base, const Dataset& d, std::optional<Vector> init_resid);
  void set_outcome(const Dataset& d, std::optional<Vector> init_resid);

  PenaltySpec spec_;
  CanonicalDesign design_;
  Penalty penalty_;
  SolutionPath path_;
  Vector resid_;
  double sigma2_ = 0.0;
  bool known_ = false;
};

enum class InitResidMode { OutcomeRegression, Provided };

struct InitResiduals {
  InitResidMode mode = InitResidMode::OutcomeRegression;
  Vector provided;
};

std::pair<InferenceReport, InferenceReport> baseline_pipeline(const Dataset& d, const PenaltySpec& spec, double C,
                                                              double alpha, const InitResiduals& init = {},
                                                              std::optional<double> lind_cap = std::nullopt);

}  // namespace biasaware
