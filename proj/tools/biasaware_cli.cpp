#include "biasaware/diagnostics.hpp"
#include "biasaware/efficiency.hpp"
#include "biasaware/errors.hpp"
#include "biasaware/inference.hpp"
#include "biasaware/serialize.hpp"
#include "biasaware/simharness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace biasaware;

namespace {

struct Options {
  std::string data;
  std::string y, w, baseline, restricted;
  std::string penalty = "l1";
  std::string weight_matrix;
  std::optional<double> C;
  std::string c_grid;
  double alpha = 0.05;
  std::string criterion = "flci";
  std::optional<double> sigma;
  std::optional<double> lind_cap;
  std::uint64_t seed = 20240101;
  std::string out;
  std::string format = "json";
  double null_value = 0.0;
  std::string config;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    auto b = item.find_first_not_of(" \t\r");
    auto e = item.find_last_not_of(" \t\r");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::string> csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileError, "cannot read '" + path + "'");
  std::string line;
  std::getline(in, line);
  return split(line, ',');
}

// Comma-separated names; a trailing '*' matches every column with that prefix.
std::vector<std::string> select_columns(const std::string& sel, const std::vector<std::string>& header) {
  std::vector<std::string> out;
  for (const auto& item : split(sel, ',')) {
    if (!item.empty() && item.back() == '*') {
      std::string prefix = item.substr(0, item.size() - 1);
      bool any = false;
      for (const auto& h : header) {
        if (h.rfind(prefix, 0) == 0) {
          out.push_back(h);
          any = true;
        }
      }
      if (!any) fail(ErrorKind::SchemaError, "no column matches '" + item + "'");
    } else {
      out.push_back(item);
    }
  }
  return out;
}

Matrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileError, "cannot read '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    auto cells = split(line, ',');
    if (cells.empty()) continue;
    std::vector<double> row;
    try {
      for (const auto& c : cells) row.push_back(std::stod(c));
    } catch (const std::exception&) {
      if (rows.empty()) continue;  // header line
      fail(ErrorKind::SchemaError, "weight matrix has a non-numeric cell");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorKind::DimensionMismatch, "weight matrix rows differ in length");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::SchemaError, "weight matrix is empty");
  Matrix M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

std::vector<double> parse_grid(const std::string& g) {
  auto parts = split(g, ':');
  if (parts.size() != 3) fail(ErrorKind::InvalidArgument, "C grid must look like a:b:step");
  double a, b, step;
  try {
    a = std::stod(parts[0]);
    b = std::stod(parts[1]);
    step = std::stod(parts[2]);
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidArgument, "C grid has a non-numeric entry");
  }
  if (!(step > 0.0) || !(b >= a) || a < 0.0) fail(ErrorKind::InvalidArgument, "C grid needs 0 <= a <= b and step > 0");
  std::vector<double> out;
  const long count = std::lround(std::floor((b - a) / step + 1e-9));
  for (long i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

PenaltySpec penalty_spec(const Options& o) {
  std::optional<Matrix> M;
  if (!o.weight_matrix.empty()) M = read_matrix(o.weight_matrix);
  if (o.penalty == "l1") return PenaltySpec::lp(1.0, M);
  if (o.penalty == "l2") return PenaltySpec::l2(M);
  if (M) fail(ErrorKind::InvalidArgument, "a weight matrix cannot be combined with the predictor norm");
  return PenaltySpec::predictor_norm();
}

Dataset load(const Options& o) {
  if (o.data.empty()) fail(ErrorKind::InvalidArgument, "--data is required");
  if (o.y.empty() || o.w.empty() || o.restricted.empty())
    fail(ErrorKind::InvalidArgument, "--y, --w and --restricted are required");
  auto header = csv_header(o.data);
  ColumnSchema schema;
  schema.outcome = o.y;
  schema.treatment = o.w;
  schema.baseline = select_columns(o.baseline, header);
  schema.restricted = select_columns(o.restricted, header);
  Dataset d = load_dataset(o.data, schema);
  if (o.sigma) {
    if (!(*o.sigma > 0.0)) fail(ErrorKind::InvalidArgument, "--sigma must be positive");
    d.sigma2 = *o.sigma * *o.sigma;
  }
  return d;
}

double require_C(const Options& o) {
  if (!o.C) fail(ErrorKind::InvalidArgument, "--C is required");
  if (!(*o.C >= 0.0)) fail(ErrorKind::InvalidArgument, "--C must be nonnegative");
  return *o.C;
}

Criterion criterion(const Options& o) { return o.criterion == "mse" ? Criterion::MSE : Criterion::FLCI; }

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* kReportCsvHeader =
    "criterion,beta_hat,ci_lo,ci_hi,maxbias,bbar,sd_used,sd_homo,sd_robust,cv,lambda,t_lambda,lindeberg,C,alpha\n";

std::string report_csv_row(const InferenceReport& r) {
  std::string s(to_string(r.criterion));
  for (double v : {r.beta_hat, r.ci_lo, r.ci_hi, r.maxbias, r.bbar, r.sd_used, r.sd_homo, r.sd_robust, r.cv,
                   r.lambda_chosen, r.t_chosen, r.lind, r.C, r.alpha})
    s += "," + fmt(v);
  return s + "\n";
}

std::string penalty_name(const Options& o) { return o.penalty; }

std::string run_estimate(const Options& o) {
  Dataset d = load(o);
  double C = require_C(o);
  BiasAwareAnalysis an(d, penalty_spec(o));
  auto [mse, flci] = an.reports(C, o.alpha, o.lind_cap);
  if (o.format == "csv") return kReportCsvHeader + report_csv_row(mse) + report_csv_row(flci);
  Json j = envelope("estimate");
  j["penalty"] = penalty_name(o);
  j["n"] = d.n();
  j["k1"] = d.k1();
  j["k2"] = d.k2();
  j["criterion"] = o.criterion;
  Json reps;
  reps["mse"] = to_json(mse);
  reps["flci"] = to_json(flci);
  j["reports"] = std::move(reps);
  return dump_json(j) + "\n";
}

std::string run_sensitivity(const Options& o) {
  Dataset d = load(o);
  if (o.c_grid.empty()) fail(ErrorKind::InvalidArgument, "--C-grid is required");
  BiasAwareAnalysis an(d, penalty_spec(o));
  Breakdown b = breakdown_C(an, o.alpha, o.null_value, parse_grid(o.c_grid), o.lind_cap);
  if (o.format == "csv") {
    std::string s = "C,excludes_null,beta_hat,ci_lo,ci_hi,maxbias,sd_used,lambda\n";
    for (const auto& r : b.rows)
      s += fmt(r.C) + "," + (r.excludes_null ? "1" : "0") + "," + fmt(r.flci.beta_hat) + "," + fmt(r.flci.ci_lo) +
           "," + fmt(r.flci.ci_hi) + "," + fmt(r.flci.maxbias) + "," + fmt(r.flci.sd_used) + "," +
           fmt(r.flci.lambda_chosen) + "\n";
    return s;
  }
  Json j = envelope("sensitivity");
  j["penalty"] = penalty_name(o);
  j["null"] = o.null_value;
  j.update(to_json(b));
  return dump_json(j) + "\n";
}

std::string run_lower_c(const Options& o) {
  Dataset d = load(o);
  PenaltySpec spec = penalty_spec(o);
  CLowerOptions opt;
  opt.seed = o.seed;
  CLowerMode mode = CLowerMode::KnownSigmaMC;
  if (!d.sigma2) {
    mode = CLowerMode::ModerateDeviations;
    opt.residuals = default_initial_residuals(d, spec).residuals;
  }
  CLowerCI c = lower_ci_C(d, spec, o.alpha, mode, opt);
  if (o.format == "csv") return "c_hat,lambda_star_alpha,mode,alpha\n" + fmt(c.c_hat) + "," +
                                fmt(c.lambda_star_alpha) + "," + std::string(to_string(c.mode)) + "," +
                                fmt(c.alpha) + "\n";
  Json j = envelope("lower-c");
  j["penalty"] = penalty_name(o);
  j.update(to_json(c));
  return dump_json(j) + "\n";
}

std::string run_efficiency(const Options& o) {
  Dataset d = load(o);
  double C = require_C(o);
  BiasAwareAnalysis an(d, penalty_spec(o));
  double sigma = std::sqrt(an.sigma2());
  EfficiencyReport e = efficiency_report(an.design(), an.penalty(), C, o.alpha, sigma);
  if (o.format == "csv") {
    std::string s = "delta,omega,omega_prime\n";
    for (const auto& p : e.modulus_samples) s += fmt(p.delta) + "," + fmt(p.omega) + "," + fmt(p.omega_prime) + "\n";
    return s;
  }
  Json j = envelope("efficiency");
  j["penalty"] = penalty_name(o);
  j["C"] = C;
  j.update(to_json(e));
  return dump_json(j) + "\n";
}

std::string run_r2curve(const Options& o) {
  Dataset d = load(o);
  if (o.c_grid.empty()) fail(ErrorKind::InvalidArgument, "--C-grid is required");
  auto curve = r2_curve(d, penalty_spec(o), parse_grid(o.c_grid));
  if (o.format == "csv") {
    std::string s = "C,r2\n";
    for (const auto& [c, r2] : curve) s += fmt(c) + "," + fmt(r2) + "\n";
    return s;
  }
  Json j = envelope("r2curve");
  j["penalty"] = penalty_name(o);
  j["curve"] = r2_curve_json(curve);
  return dump_json(j) + "\n";
}

std::string run_simulate(const Options& o) {
  if (o.config.empty()) fail(ErrorKind::InvalidArgument, "--config is required");
  ExperimentConfig cfg = load_experiment_config(o.config);
  if (o.C) cfg.C_assumed = *o.C;
  Json j = envelope("simulate");
  j["kind"] = cfg.kind;
  j["seed"] = cfg.dgp.seed;
  std::ostringstream csv;
  if (cfg.kind == "coverage") {
    CoverageOptions opt;
    opt.criterion = criterion(o);
    opt.lind_cap = o.lind_cap;
    opt.double_lasso = cfg.double_lasso;
    CoverageSummary s = coverage_experiment(cfg.dgp, cfg.C_assumed, cfg.alpha, cfg.reps, opt);
    if (o.format == "csv") {
      auto tmp = std::filesystem::temp_directory_path() / ("biasaware_records_" + std::to_string(cfg.dgp.seed) + ".csv");
      write_records_csv(s, tmp);
      std::ifstream in(tmp);
      csv << in.rdbuf();
      std::filesystem::remove(tmp);
      return csv.str();
    }
    j["summary"] = to_json(s);
  } else if (cfg.kind == "rate") {
    auto cells = rate_experiment(cfg.dgp, cfg.n_grid, cfg.k_grid, cfg.C_assumed, cfg.alpha, cfg.reps);
    if (o.format == "csv") {
      csv << "n,k2,rate,mean_length,se_length,reps\n";
      for (const auto& c : cells)
        csv << c.n << ',' << c.k2 << ',' << fmt(c.rate) << ',' << fmt(c.mean_length) << ',' << fmt(c.se_length) << ','
            << c.reps << '\n';
      return csv.str();
    }
    Json rows = Json::array();
    for (const auto& c : cells) rows.push_back(to_json(c));
    j["cells"] = std::move(rows);
  } else {
    LowerCSummary s = lower_c_experiment(cfg.dgp, cfg.alpha, cfg.reps);
    if (o.format == "csv") {
      csv << "rep,c_hat,noise_stat,event,min_slack\n";
      for (const auto& r : s.records)
        csv << r.rep << ',' << fmt(r.c_hat) << ',' << fmt(r.noise_stat) << ',' << (r.event ? 1 : 0) << ','
            << fmt(r.event ? r.min_slack : 0.0) << '\n';
      return csv.str();
    }
    j["summary"] = to_json(s);
  }
  return dump_json(j) + "\n";
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.out, std::ios::binary);
  if (!out) fail(ErrorKind::FileError, "cannot write '" + o.out + "'");
  out << text;
}

void add_data_flags(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.data, "CSV file with a header row")->check(CLI::ExistingFile);
  sub->add_option("--y", o.y, "outcome column");
  sub->add_option("--w", o.w, "treatment column");
  sub->add_option("--baseline", o.baseline, "unrestricted controls: comma list, 'prefix*' allowed");
  sub->add_option("--restricted", o.restricted, "restricted controls: comma list, 'prefix*' allowed");
  sub->add_option("--penalty", o.penalty, "penalty on the restricted coefficients")
      ->check(CLI::IsMember({"l1", "l2", "predictor-l2"}))
      ->capture_default_str();
  sub->add_option("--weight-matrix", o.weight_matrix, "CSV matrix M for ||M gamma||_p")->check(CLI::ExistingFile);
  sub->add_option("--sigma", o.sigma, "known error sd (idealized mode)");
}

void add_common_flags(CLI::App* sub, Options& o) {
  sub->add_option("--alpha", o.alpha, "1 - confidence level")->check(CLI::Range(1e-6, 0.499999))->capture_default_str();
  sub->add_option("--criterion", o.criterion, "selection criterion")
      ->check(CLI::IsMember({"flci", "mse"}))
      ->capture_default_str();
  sub->add_option("--lind-cap", o.lind_cap, "upper bound on max_i a_i^2 / sum_j a_j^2");
  sub->add_option("--seed", o.seed, "seed for Monte Carlo steps")->capture_default_str();
  sub->add_option("--out", o.out, "output file (default stdout)");
  sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Bias-aware inference for a treatment coefficient with regularized controls"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  auto* est = app.add_subcommand("estimate", "MSE- and FLCI-optimal estimates and CIs at one C");
  add_data_flags(est, o);
  add_common_flags(est, o);
  est->add_option("--C", o.C, "bound on Pen(gamma)")->required();

  auto* sens = app.add_subcommand("sensitivity", "FLCI over a C grid and the breakdown value");
  add_data_flags(sens, o);
  add_common_flags(sens, o);
  sens->add_option("--C-grid", o.c_grid, "a:b:step")->required();
  sens->add_option("--null", o.null_value, "null value for the breakdown C")->capture_default_str();

  auto* lowc = app.add_subcommand("lower-c", "lower confidence bound for C (known sigma: Monte Carlo; else moderate deviations, l1 only)");
  add_data_flags(lowc, o);
  add_common_flags(lowc, o);

  auto* eff = app.add_subcommand("efficiency", "efficiency of the FLCI and MSE estimators at C");
  add_data_flags(eff, o);
  add_common_flags(eff, o);
  eff->add_option("--C", o.C, "bound on Pen(gamma)")->required();

  auto* sim = app.add_subcommand("simulate", "Monte Carlo experiment from a key=value config");
  sim->add_option("--config", o.config, "experiment config file")->required()->check(CLI::ExistingFile);
  sim->add_option("--C", o.C, "overrides the config's C");
  add_common_flags(sim, o);

  auto* r2 = app.add_subcommand("r2curve", "R^2 of the outcome regression under Pen(gamma) <= C");
  add_data_flags(r2, o);
  add_common_flags(r2, o);
  r2->add_option("--C-grid", o.c_grid, "a:b:step")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::string text;
    if (est->parsed()) text = run_estimate(o);
    else if (sens->parsed()) text = run_sensitivity(o);
    else if (lowc->parsed()) text = run_lower_c(o);
    else if (eff->parsed()) text = run_efficiency(o);
    else if (sim->parsed()) text = run_simulate(o);
    else text = run_r2curve(o);
    emit(o, text);
    return 0;
  } catch (const Error& e) {
    if (o.format == "json") std::cerr << dump_json(error_json(e.kind(), e.what())) << "\n";
    else std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    if (o.format == "json") std::cerr << dump_json(error_json(ErrorKind::ConvergenceFailure, e.what())) << "\n";
    else std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
