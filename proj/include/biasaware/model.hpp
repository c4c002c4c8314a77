#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace biasaware {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Regression data Y = w*beta + Z1*gamma1 + Z2*gamma2 + eps.
///
/// Z1 holds the unrestricted baseline controls (may have zero columns) and Z2
/// the controls whose coefficients are bounded by the penalty.
struct Dataset {
  Vector y;
  Vector w;
  Matrix Z1;
  Matrix Z2;
  std::optional<double> sigma2;  // known error variance (idealized mode)

  std::string y_name = "y";
  std::string w_name = "w";
  std::vector<std::string> baseline_names;
  std::vector<std::string> restricted_names;

  Index n() const { return y.size(); }
  Index k1() const { return Z1.cols(); }
  Index k2() const { return Z2.cols(); }

  /// Throws on shape mismatch, non-finite cells, n < 2, k1 >= n or w == 0.
  void validate() const;
};

struct ColumnSchema {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> baseline;
  std::vector<std::string> restricted;
};

Dataset load_dataset(const std::filesystem::path& path, const ColumnSchema& schema);

/// Writes a dataset as CSV with the column names it carries.
void write_dataset_csv(const Dataset& d, const std::filesystem::path& path);

enum class PenaltyKind { Lp, PredictorNorm };

/// Pen(gamma2) = ||M gamma2||_p, or ||Z2_t gamma2 / sqrt(n)||_2 for the
/// predictor norm. An empty `M` means the identity.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Lp;
  double p = 1.0;
  std::optional<Matrix> M;
  std::vector<Index> restricted_indices;

  static PenaltySpec l1();
  static PenaltySpec l2(std::optional<Matrix> M = std::nullopt);
  static PenaltySpec lp(double p, std::optional<Matrix> M = std::nullopt);
  static PenaltySpec predictor_norm();

  /// Hoelder conjugate of p (infinity for p == 1).
  double q() const;
  bool is_l1() const { return kind == PenaltyKind::Lp && p == 1.0; }
  bool is_l2_family() const {
    return kind == PenaltyKind::PredictorNorm || (kind == PenaltyKind::Lp && p == 2.0);
  }
};

/// The restricted problem after projecting the baseline controls out of
/// w, Z2 and y. Any weight vector built from these residuals is orthogonal
/// to Z1.
struct CanonicalDesign {
  Vector w_t;
  Matrix Z2_t;
  Vector y_t;
  Index proj_rank = 0;

  Index n() const { return w_t.size(); }
  Index k2() const { return Z2_t.cols(); }
};

/// Relative singular-value tolerance used for every rank decision.
inline constexpr double kRankTolerance = 1e-10;

CanonicalDesign canonicalize(const Dataset& d);

/// ||v||_p for p in [1, inf]; p = +inf gives the max norm.
double lp_norm(const Vector& v, double p);

/// Hoelder conjugate exponent.
double conjugate_exponent(double p);

double penalty_value(const PenaltySpec& spec, const Vector& gamma2, const CanonicalDesign& design);

/// Norm dual to gamma -> ||M gamma||_p, i.e. sup { v'gamma : ||M gamma||_p <= 1 }.
/// Only defined for the Lp kind; use Penalty::dual for the predictor norm.
double dual_norm(const PenaltySpec& spec, const Vector& v);

/// A penalty bound to a design. Resolves the predictor norm into an l2 norm
/// with weight (Z2_t'Z2_t/n)^{1/2} and caches the inverse weight so that
/// whitening and dual norms are cheap.
class Penalty {
 public:
  Penalty(const PenaltySpec& spec, const CanonicalDesign& design);

  const PenaltySpec& spec() const { return spec_; }
  double p() const { return p_; }
  double q() const { return q_; }
  bool is_l1() const { return p_ == 1.0 && identity_; }
  bool identity_weight() const { return identity_; }

  double value(const Vector& gamma2) const;
  double dual(const Vector& v) const;

  /// Z * W where W maps whitened coordinates u to gamma = W u, so that
  /// Pen(W u) = ||u||_p on the range of W.
  Matrix whiten(const Matrix& Z) const;
  Vector unwhiten(const Vector& u) const;
  Index whitened_dim() const;

 private:
  PenaltySpec spec_;
  double p_ = 1.0;
  double q_ = 0.0;
  bool identity_ = true;
  Matrix M_;      // weight (Lp kind)
  Matrix W_;      // M^{-1}, or V_r * diag(sqrt(n)/s) for the predictor norm
  Index k2_ = 0;
  Matrix Z2_;     // predictor norm evaluates ||Z2 gamma|| / sqrt(n) directly
};

}  // namespace biasaware
