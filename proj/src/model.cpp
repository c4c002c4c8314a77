#include "biasaware/model.hpp"

#include "biasaware/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace biasaware {

namespace {

bool all_finite(const Matrix& m) { return m.array().isFinite().all(); }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  while (true) {
    auto pos = rest.find(',');
    out.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

double parse_cell(const std::string& cell, Index row, const std::string& column) {
  const std::string where = "row " + std::to_string(row + 2) + ", column '" + column + "'";
  if (cell.empty()) fail(ErrorKind::NonFiniteValue, "missing value at " + where);
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    // from_chars accepts "nan"/"inf" spellings, so anything left is not a number.
    fail(ErrorKind::NonFiniteValue, "unparseable value '" + cell + "' at " + where);
  }
  if (!std::isfinite(value)) fail(ErrorKind::NonFiniteValue, "non-finite value '" + cell + "' at " + where);
  return value;
}

}  // namespace

void Dataset::validate() const {
  const Index nn = y.size();
  if (nn < 2) fail(ErrorKind::InvalidArgument, "need at least two observations");
  if (w.size() != nn) fail(ErrorKind::DimensionMismatch, "w has length " + std::to_string(w.size()));
  if (Z1.rows() != nn && Z1.cols() > 0) fail(ErrorKind::DimensionMismatch, "Z1 row count differs from n");
  if (Z2.rows() != nn && Z2.cols() > 0) fail(ErrorKind::DimensionMismatch, "Z2 row count differs from n");
  if (Z1.cols() >= nn) fail(ErrorKind::InvalidArgument, "k1 must be smaller than n");
  if (!all_finite(y) || !all_finite(w) || !all_finite(Z1) || !all_finite(Z2)) {
    fail(ErrorKind::NonFiniteValue, "dataset contains non-finite values");
  }
  if (w.cwiseAbs().maxCoeff() == 0.0) fail(ErrorKind::InvalidArgument, "w is identically zero");
  if (sigma2 && !(*sigma2 >= 0.0 && std::isfinite(*sigma2))) {
    fail(ErrorKind::InvalidArgument, "sigma2 must be a finite nonnegative number");
  }
}

Dataset load_dataset(const std::filesystem::path& path, const ColumnSchema& schema) {
  if (schema.restricted.empty()) fail(ErrorKind::SchemaError, "no restricted controls declared (nothing to penalize)");
  if (schema.outcome.empty() || schema.treatment.empty()) {
    fail(ErrorKind::SchemaError, "outcome and treatment columns are required");
  }
  {
    std::set<std::string> seen;
    auto claim = [&](const std::string& name) {
      if (!seen.insert(name).second) fail(ErrorKind::SchemaError, "column '" + name + "' used more than once");
    };
    claim(schema.outcome);
    claim(schema.treatment);
    for (const auto& c : schema.baseline) claim(c);
    for (const auto& c : schema.restricted) claim(c);
  }

  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileError, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::FileError, "'" + path.string() + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  std::map<std::string, Index> col_of;
  for (Index j = 0; j < static_cast<Index>(header.size()); ++j) {
    if (!col_of.emplace(header[j], j).second) fail(ErrorKind::SchemaError, "duplicate header column '" + header[j] + "'");
  }
  auto lookup = [&](const std::string& name) {
    auto it = col_of.find(name);
    if (it == col_of.end()) fail(ErrorKind::SchemaError, "unknown column '" + name + "'");
    return it->second;
  };

  std::vector<std::vector<double>> rows;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::SchemaError, "row " + std::to_string(row + 2) + " has " + std::to_string(cells.size()) +
                                       " cells, header has " + std::to_string(header.size()));
    }
    std::vector<double> vals(cells.size());
    for (size_t j = 0; j < cells.size(); ++j) vals[j] = parse_cell(cells[j], row, header[j]);
    rows.push_back(std::move(vals));
    ++row;
  }

  const Index nn = static_cast<Index>(rows.size());
  auto column = [&](Index j) {
    Vector v(nn);
    for (Index i = 0; i < nn; ++i) v(i) = rows[i][j];
    return v;
  };
  auto block = [&](const std::vector<std::string>& names) {
    Matrix m(nn, static_cast<Index>(names.size()));
    for (Index c = 0; c < m.cols(); ++c) m.col(c) = column(lookup(names[c]));
    return m;
  };

  Dataset d;
  d.y = column(lookup(schema.outcome));
  d.w = column(lookup(schema.treatment));
  d.Z1 = block(schema.baseline);
  d.Z2 = block(schema.restricted);
  d.y_name = schema.outcome;
  d.w_name = schema.treatment;
  d.baseline_names = schema.baseline;
  d.restricted_names = schema.restricted;
  d.validate();
  return d;
}

void write_dataset_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FileError, "cannot write '" + path.string() + "'");
  auto name_or = [](const std::vector<std::string>& names, Index j, const char* prefix) {
    return j < static_cast<Index>(names.size()) ? names[j] : prefix + std::to_string(j + 1);
  };
  out << d.y_name << ',' << d.w_name;
  for (Index j = 0; j < d.k1(); ++j) out << ',' << name_or(d.baseline_names, j, "b");
  for (Index j = 0; j < d.k2(); ++j) out << ',' << name_or(d.restricted_names, j, "z");
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < d.n(); ++i) {
    out << d.y(i) << ',' << d.w(i);
    for (Index j = 0; j < d.k1(); ++j) out << ',' << d.Z1(i, j);
    for (Index j = 0; j < d.k2(); ++j) out << ',' << d.Z2(i, j);
    out << '\n';
  }
}

PenaltySpec PenaltySpec::l1() { return lp(1.0); }

PenaltySpec PenaltySpec::l2(std::optional<Matrix> M) { return lp(2.0, std::move(M)); }

PenaltySpec PenaltySpec::lp(double p, std::optional<Matrix> M) {
  if (!(p >= 1.0)) fail(ErrorKind::InvalidArgument, "penalty exponent must satisfy p >= 1");
  PenaltySpec s;
  s.kind = PenaltyKind::Lp;
  s.p = p;
  s.M = std::move(M);
  return s;
}

PenaltySpec PenaltySpec::predictor_norm() {
  PenaltySpec s;
  s.kind = PenaltyKind::PredictorNorm;
  s.p = 2.0;
  return s;
}

double PenaltySpec::q() const { return conjugate_exponent(kind == PenaltyKind::PredictorNorm ? 2.0 : p); }

double conjugate_exponent(double p) {
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

double lp_norm(const Vector& v, double p) {
  if (v.size() == 0) return 0.0;
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return scale * std::pow((v.cwiseAbs() / scale).array().pow(p).sum(), 1.0 / p);
}

CanonicalDesign canonicalize(const Dataset& d) {
  d.validate();
  CanonicalDesign c;
  c.w_t = d.w;
  c.Z2_t = d.Z2;
  c.y_t = d.y;
  if (d.k1() == 0) return c;

  Eigen::BDCSVD<Matrix> svd(d.Z1, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double tol = kRankTolerance * s(0);
  Index rank = 0;
  for (Index j = 0; j < s.size(); ++j) rank += s(j) > tol ? 1 : 0;
  if (rank < d.k1()) {
    fail(ErrorKind::RankDeficientBaseline,
         "baseline controls have rank " + std::to_string(rank) + " < " + std::to_string(d.k1()));
  }
  const Matrix U = svd.matrixU().leftCols(rank);
  auto residualize = [&U](auto& x) { x -= U * (U.transpose() * x); };
  residualize(c.w_t);
  residualize(c.y_t);
  if (c.Z2_t.cols() > 0) c.Z2_t -= U * (U.transpose() * c.Z2_t);
  c.proj_rank = rank;
  return c;
}

double penalty_value(const PenaltySpec& spec, const Vector& gamma2, const CanonicalDesign& design) {
  if (gamma2.size() != design.k2()) {
    fail(ErrorKind::DimensionMismatch, "gamma2 has length " + std::to_string(gamma2.size()) + ", expected " +
                                           std::to_string(design.k2()));
  }
  if (spec.kind == PenaltyKind::PredictorNorm) {
    return (design.Z2_t * gamma2).norm() / std::sqrt(static_cast<double>(design.n()));
  }
  if (spec.M) {
    if (spec.M->cols() != gamma2.size()) fail(ErrorKind::DimensionMismatch, "weight matrix does not match gamma2");
    return lp_norm(*spec.M * gamma2, spec.p);
  }
  return lp_norm(gamma2, spec.p);
}

namespace {

Matrix invert_weight(const Matrix& M) {
  if (M.rows() != M.cols()) fail(ErrorKind::SingularWeightMatrix, "weight matrix must be square");
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= kRankTolerance * s(0)) {
    fail(ErrorKind::SingularWeightMatrix, "weight matrix is not invertible");
  }
  return M.inverse();
}

}  // namespace

double dual_norm(const PenaltySpec& spec, const Vector& v) {
  if (spec.kind != PenaltyKind::Lp) {
    fail(ErrorKind::InvalidArgument, "dual_norm(spec, v) needs the design for the predictor norm");
  }
  const double q = spec.q();
  if (!spec.M) return lp_norm(v, q);
  if (spec.M->rows() != v.size()) fail(ErrorKind::DimensionMismatch, "weight matrix does not match v");
  return lp_norm(invert_weight(*spec.M).transpose() * v, q);
}

Penalty::Penalty(const PenaltySpec& spec, const CanonicalDesign& design) : spec_(spec), k2_(design.k2()) {
  const Index k2 = design.k2();
  if (spec.kind == PenaltyKind::PredictorNorm) {
    p_ = 2.0;
    q_ = 2.0;
    identity_ = false;
    Z2_ = design.Z2_t;
    const double n = static_cast<double>(design.n());
    Eigen::BDCSVD<Matrix> svd(design.Z2_t, Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    // Eigenvalues s^2/n of Z2'Z2/n below the floor are treated as null directions.
    const double floor = 1e-12 * (s.size() ? s(0) * s(0) : 0.0);
    Index r = 0;
    while (r < s.size() && s(r) * s(r) > floor && s(r) > 0.0) ++r;
    if (r == 0) fail(ErrorKind::SingularWeightMatrix, "restricted controls are identically zero");
    W_ = svd.matrixV().leftCols(r) * (std::sqrt(n) * s.head(r).cwiseInverse()).asDiagonal();
    M_ = svd.matrixV().leftCols(r) * (s.head(r) / std::sqrt(n)).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
    return;
  }
  p_ = spec.p;
  q_ = conjugate_exponent(p_);
  if (spec.M) {
    if (spec.M->rows() != k2 || spec.M->cols() != k2) {
      fail(ErrorKind::DimensionMismatch, "weight matrix must be k2 x k2");
    }
    identity_ = false;
    M_ = *spec.M;
    W_ = invert_weight(M_);
  }
}

double Penalty::value(const Vector& gamma2) const {
  if (spec_.kind == PenaltyKind::PredictorNorm) {
    if (gamma2.size() != Z2_.cols()) fail(ErrorKind::DimensionMismatch, "gamma2 length mismatch");
    return (Z2_ * gamma2).norm() / std::sqrt(static_cast<double>(Z2_.rows()));
  }
  if (identity_) return lp_norm(gamma2, p_);
  if (gamma2.size() != M_.cols()) fail(ErrorKind::DimensionMismatch, "gamma2 length mismatch");
  return lp_norm(M_ * gamma2, p_);
}

double Penalty::dual(const Vector& v) const {
  if (identity_) return lp_norm(v, q_);
  if (v.size() != W_.rows()) fail(ErrorKind::DimensionMismatch, "dual norm argument length mismatch");
  return lp_norm(W_.transpose() * v, q_);
}

Matrix Penalty::whiten(const Matrix& Z) const { return identity_ ? Z : Matrix(Z * W_); }

Vector Penalty::unwhiten(const Vector& u) const { return identity_ ? u : Vector(W_ * u); }

Index Penalty::whitened_dim() const { return identity_ ? k2_ : W_.cols(); }

}  // namespace biasaware
