#pragma once

#include "biasaware/inference.hpp"
#include "biasaware/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace biasaware {

enum class GammaStyle { Zero, WorstCase, DenseUniform, Sparse };
enum class DesignKind { IIDNormal, Correlated };
enum class ErrorScale { Homo, HeteroByW };
enum class Shock { Gaussian, StudentT };

/// Data-generating process
///   Y = w beta + Z1 gamma1 + Z2 gamma2 + eps,  w = Z2 delta + nu,
/// with delta_j = w_loading / sqrt(k2), nu ~ N(0, 1), Z1 = (1, N(0,1) columns)
/// and gamma1 = 1. Z2 rows are N(0, I) or AR(1) across columns with
/// correlation rho. eps_i = sigma * s_i * e_i with s_i = 1 (Homo) or
/// 0.5 + |w_i| (HeteroByW) and e_i standard normal or Student t scaled to
/// unit variance.
struct DGPSpec {
  Index n = 100;
  Index k1 = 1;
  Index k2 = 50;
  double beta = 1.0;

  GammaStyle gamma_style = GammaStyle::Zero;
  double gamma_C = 0.0;
  Index sparse_s = 1;
  // WorstCase: gamma2 = (C/t) pi* at the FLCI-optimal point for gamma_C at this alpha.
  double worst_case_alpha = 0.05;

  DesignKind design = DesignKind::IIDNormal;
  double rho = 0.0;

  ErrorScale error_scale = ErrorScale::Homo;
  double sigma = 1.0;
  Shock shock = Shock::Gaussian;
  double df = 8.0;

  PenaltySpec penalty = PenaltySpec::l1();
  double w_loading = 1.0;

  bool redraw_design = false;  // false: every replication shares the rep-0 design
  bool known_sigma = false;    // sets Dataset::sigma2 (Homo errors only)
  std::uint64_t seed = 1;

  /// Throws InvalidSpec.
  void validate() const;
};

struct Truth {
  double beta = 0.0;
  Vector gamma1;
  Vector gamma2;
  double pen_gamma2 = 0.0;
  Vector eps;
  Vector error_sd;  // sd of eps_i
  std::string error_process;
};

struct Draw {
  Dataset data;
  Truth truth;
};

/// Replication `rep` of the process. Identical (spec, rep) give bit-identical output.
Draw generate(const DGPSpec& spec, std::uint64_t rep = 0);

/// Design part only (y and gamma left empty). Shared across reps unless redraw_design.
Dataset generate_design(const DGPSpec& spec, std::uint64_t rep = 0);

/// gamma2 for the given design.
Vector generate_gamma(const DGPSpec& spec, const Dataset& design);

/// Completes a design with outcome draws for replication `rep`.
Draw generate_outcome(const DGPSpec& spec, const Dataset& design, const Vector& gamma2, std::uint64_t rep);

/// gamma maximizing v'gamma over Pen(gamma) <= 1, for the penalty bound to `design`.
Vector worst_case_direction(const Penalty& penalty, const Vector& v);

struct CoverageOptions {
  Criterion criterion = Criterion::FLCI;
  std::optional<double> lind_cap;
  bool double_lasso = false;
  // Double lasso weights; default to the plug-in rule in default_double_lasso_lambdas.
  std::optional<double> lambda_ps;
  std::optional<double> lambda_out;
  bool keep_records = true;
};

struct RepRecord {
  std::uint64_t rep = 0;
  double beta_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double maxbias = 0.0;
  double sd_used = 0.0;
  bool covered = false;
  double zz_beta = 0.0;
  double zz_lo = 0.0;
  double zz_hi = 0.0;
  bool zz_covered = false;
};

struct CoverageSummary {
  std::size_t reps = 0;
  double alpha = 0.05;
  double C_assumed = 0.0;
  double beta_true = 0.0;
  double pen_gamma2 = 0.0;  // of rep 0
  double coverage = 0.0;
  double mc_se = 0.0;
  double mean_length = 0.0;
  bool has_zz = false;
  double zz_coverage = 0.0;
  double zz_mc_se = 0.0;
  double zz_mean_length = 0.0;
  std::vector<RepRecord> records;

  /// Recomputes every statistic from `records`.
  static CoverageSummary from_records(std::vector<RepRecord> records, double alpha, double C_assumed,
                                      double beta_true, bool has_zz);
};

/// Objective ||.||^2 + lambda ||.||_1 weights for the double lasso:
/// 2.2 sd(v) sqrt(n) z_{1 - 0.05/(2k)} with v the partialled w or Y.
std::pair<double, double> default_double_lasso_lambdas(const Dataset& d);

CoverageSummary coverage_experiment(const DGPSpec& spec, double C_assumed, double alpha, std::size_t reps,
                                    const CoverageOptions& opt = {});

struct RateCell {
  Index n = 0;
  Index k2 = 0;
  double rate = 0.0;  // r_q(k2, n)
  double mean_length = 0.0;
  double se_length = 0.0;
  std::size_t reps = 0;
};

/// Mean FLCI length over `reps` replications for every (n, k2) cell.
std::vector<RateCell> rate_experiment(const DGPSpec& base, const std::vector<Index>& n_grid,
                                      const std::vector<Index>& k_grid, double C, double alpha, std::size_t reps);

/// OLS slope of log(y) on log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

struct LowerCRecord {
  std::uint64_t rep = 0;
  double c_hat = 0.0;
  double noise_stat = 0.0;  // ||2 X2' M eps||_q / n
  bool event = false;       // noise_stat <= lambda*
  double min_slack = 0.0;   // basic inequality slack over the lambda grid (event reps)
};

struct LowerCSummary {
  std::size_t reps = 0;
  double alpha = 0.05;
  double lambda_star = 0.0;
  double positive_rate = 0.0;  // P(c_hat > 0)
  double mc_se = 0.0;
  std::size_t event_count = 0;
  std::size_t basic_inequality_failures = 0;
  std::vector<LowerCRecord> records;
};

/// Lower confidence bound for C across replications in the known-sigma mode,
/// checking the basic inequality on a lambda grid whenever the noise event holds.
LowerCSummary lower_c_experiment(const DGPSpec& spec, double alpha, std::size_t reps, int draws = 100000);

struct ExperimentConfig {
  std::string kind = "coverage";  // coverage | rate | lower-c
  DGPSpec dgp;
  double C_assumed = 1.0;
  double alpha = 0.05;
  std::size_t reps = 2000;
  bool double_lasso = false;
  std::vector<Index> n_grid;
  std::vector<Index> k_grid;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys raise InvalidSpec.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

void write_records_csv(const CoverageSummary& s, const std::filesystem::path& path);
void write_rate_csv(const std::vector<RateCell>& cells, const std::filesystem::path& path);
void write_lower_c_csv(const LowerCSummary& s, const std::filesystem::path& path);

}  // namespace biasaware
