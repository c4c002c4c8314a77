#include "biasaware/solvers.hpp"

#include "biasaware/errors.hpp"
#include "biasaware/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace biasaware::solvers {

namespace {


constexpr double kInf = std::numeric_limits<double>::infinity();

// g >= 0 solving g + mu * p * g^(p-1) = a for a > 0, p > 1.
double shrink_coordinate(double a, double mu, double p) {
  double lo = 0.0, hi = a;
  double g = a / (1.0 + mu * p * std::pow(a, p - 2.0));
  if (!(g > lo && g < hi)) g = 0.5 * a;
  for (int it = 0; it < 100; ++it) {
    double gp = std::pow(g, p - 1.0);
    double h = g + mu * p * gp - a;
    if (h > 0) hi = g; else lo = g;
    if (std::abs(h) <= 1e-15 * a || hi - lo <= 1e-16 * a) break;
    double dh = 1.0 + mu * p * (p - 1.0) * gp / g;
    double next = g - h / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    g = next;
  }
  return g;
}

Vector project_l1(const Vector& v, double radius) {
  Vector a = v.cwiseAbs();
  if (a.sum() <= radius) return v;
  std::vector<double> sorted(a.data(), a.data() + a.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cum += sorted[i];
    double candidate = (cum - radius) / static_cast<double>(i + 1);
    if (i + 1 == sorted.size() || sorted[i + 1] <= candidate) {
      theta = candidate;
      break;
    }
  }
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    double m = std::max(a[i] - theta, 0.0);
    out[i] = v[i] >= 0 ? m : -m;
  }
  return out;
}

Vector project_lp_general(const Vector& v, double p, double radius) {
  Vector a = v.cwiseAbs();
  double target = std::pow(radius, p);
  auto mass = [&](double mu) {
    double s = 0.0;
    for (Index i = 0; i < a.size(); ++i)
      if (a[i] > 0) s += std::pow(shrink_coordinate(a[i], mu, p), p);
    return s;
  };
  double hi = 1.0;
  while (mass(hi) > target) hi *= 4.0;
  double lo = hi / 4.0;
  while (lo > 1e-300 && mass(lo) <= target) lo /= 4.0;
  double mu = find_root([&](double m) { return mass(m) - target; }, lo, hi, 1e-13);
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    double g = a[i] > 0 ? shrink_coordinate(a[i], mu, p) : 0.0;
    out[i] = v[i] >= 0 ? g : -g;
  }
  double nrm = lp_norm(out, p);
  if (nrm > radius) out *= radius / nrm;
  return out;
}

// Gradient oracle for f(x) = ||b - A x||^2 that uses the Gram matrix when it is smaller.
struct LeastSquares {
  const Matrix& A;
  const Vector& b;
  bool use_gram;
  Matrix G;
  Vector Atb;
  double btb;

  LeastSquares(const Matrix& A_, const Vector& b_) : A(A_), b(b_), use_gram(A_.cols() <= A_.rows()) {
    if (use_gram) G = A.transpose() * A;
    Atb = A.transpose() * b;
    btb = b.squaredNorm();
  }
  Vector grad(const Vector& x) const {
    if (use_gram) return 2.0 * (G * x - Atb);
    return 2.0 * (A.transpose() * (A * x - b));
  }
  double value(const Vector& x) const { return (b - A * x).squaredNorm(); }
};

}  // namespace

Vector project_lp_ball(const Vector& v, double p, double radius) {
  if (p < 1.0) fail(ErrorKind::InvalidArgument, "projection needs p >= 1");
  if (radius <= 0.0) return Vector::Zero(v.size());
  if (std::isinf(p)) return v.cwiseMax(-radius).cwiseMin(radius);
  if (p == 1.0) return project_l1(v, radius);
  double nrm = lp_norm(v, p);
  if (nrm <= radius) return v;
  if (p == 2.0) return v * (radius / nrm);
  return project_lp_general(v, p, radius);
}

double spectral_norm_sq(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Index m = std::min(A.rows(), A.cols());
  if (m <= 1500) {
    Matrix G = A.cols() <= A.rows() ? Matrix(A.transpose() * A) : Matrix(A * A.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
    return std::max(es.eigenvalues().maxCoeff(), 0.0);
  }
  Vector x = Vector::Ones(A.cols()).normalized();
  double est = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vector y = A.transpose() * (A * x);
    double nrm = y.norm();
    if (nrm == 0.0) return 0.0;
    if (std::abs(nrm - est) <= 1e-10 * nrm) {
      est = nrm;
      break;
    }
    est = nrm;
    x = y / nrm;
  }
  return 1.05 * est;
}

FirstOrderResult constrained_least_squares(const Matrix& A, const Vector& b, double p, double radius,
                                           const Vector* warm, const FirstOrderOptions& opt) {
  FirstOrderResult res;
  const Index k = A.cols();
  LeastSquares ls(A, b);
  const double q = conjugate_exponent(p);
  if (radius <= 0.0 || k == 0) {
    res.x = Vector::Zero(k);
    res.objective = ls.btb;
    res.converged = true;
    return res;
  }
  double L = 2.0 * spectral_norm_sq(A);
  if (L <= 0.0) L = 1.0;
  Vector x = warm && warm->size() == k ? project_lp_ball(*warm, p, radius) : Vector::Zero(k);
  Vector y = x;
  double t = 1.0;
  const double floor = 1e-12 * std::max(ls.btb, 1e-300);
  for (int it = 1; it <= opt.max_iter; ++it) {
    Vector xn = project_lp_ball(y - ls.grad(y) / L, p, radius);
    if ((y - xn).dot(xn - x) > 0.0) t = 1.0;
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / tn) * (xn - x);
    x = std::move(xn);
    t = tn;
    if (it % 10 == 0 || it == opt.max_iter) {
      Vector g = ls.grad(x);
      double f = ls.value(x);
      double gap = g.dot(x) + radius * lp_norm(g, q);
      res.iterations = it;
      res.gap = gap;
      res.objective = f;
      if (gap <= opt.rel_gap * std::max(f, floor)) {
        res.converged = true;
        break;
      }
    }
  }
  res.x = x;
  return res;
}

FirstOrderResult penalized_least_squares(const Matrix& A, const Vector& b, double p, double mu,
                                         const Vector* warm, const FirstOrderOptions& opt) {
  FirstOrderResult res;
  const Index k = A.cols();
  LeastSquares ls(A, b);
  const double q = conjugate_exponent(p);
  double L = 2.0 * spectral_norm_sq(A);
  if (L <= 0.0 || k == 0) {
    res.x = Vector::Zero(k);
    res.objective = ls.btb;
    res.converged = true;
    return res;
  }
  auto prox = [&](const Vector& z, double s) -> Vector { return z - project_lp_ball(z, q, s); };
  Vector x = warm && warm->size() == k ? *warm : Vector::Zero(k);
  Vector y = x;
  double t = 1.0;
  const double floor = 1e-12 * std::max(ls.btb, 1e-300);
  for (int it = 1; it <= opt.max_iter; ++it) {
    Vector xn = prox(y - ls.grad(y) / L, mu / L);
    if ((y - xn).dot(xn - x) > 0.0) t = 1.0;
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / tn) * (xn - x);
    x = std::move(xn);
    t = tn;
    if (it % 10 == 0 || it == opt.max_iter) {
      Vector r = b - A * x;
      double f = r.squaredNorm() + mu * lp_norm(x, p);
      double dn = lp_norm(Vector(2.0 * (A.transpose() * r)), q);
      Vector theta = dn > mu ? Vector(r * (mu / dn)) : r;
      double dual = 2.0 * theta.dot(b) - theta.squaredNorm();
      res.iterations = it;
      res.gap = f - dual;
      res.objective = f;
      if (res.gap <= opt.rel_gap * std::max(f, floor)) {
        res.converged = true;
        break;
      }
    }
  }
  res.x = x;
  return res;
}

namespace {

// Upper-triangular R with R'R equal to the Gram matrix of the active columns.
class ActiveCholesky {
 public:
  explicit ActiveCholesky(Index cap) : R_(Matrix::Zero(cap, cap)) {}

  Index size() const { return m_; }

  // Returns false if the new column is (numerically) in the span of the active ones.
  bool add(const Vector& cross, double self) {
    Vector rho = Vector::Zero(m_);
    if (m_ > 0) rho = R_.topLeftCorner(m_, m_).transpose().triangularView<Eigen::Lower>().solve(cross);
    double d2 = self - rho.squaredNorm();
    if (!(d2 > 1e-10 * self)) return false;
    R_.block(0, m_, m_, 1) = rho;
    R_(m_, m_) = std::sqrt(d2);
    ++m_;
    return true;
  }

  void remove(Index pos) {
    for (Index j = pos; j + 1 < m_; ++j) R_.col(j) = R_.col(j + 1);
    R_.col(m_ - 1).setZero();
    for (Index j = pos; j + 1 < m_; ++j) {
      double a = R_(j, j), b = R_(j + 1, j);
      double r = std::hypot(a, b);
      if (r == 0.0) continue;
      double c = a / r, s = b / r;
      for (Index col = j; col + 1 < m_; ++col) {
        double x = R_(j, col), y = R_(j + 1, col);
        R_(j, col) = c * x + s * y;
        R_(j + 1, col) = -s * x + c * y;
      }
      R_(j + 1, j) = 0.0;
    }
    R_.row(m_ - 1).setZero();
    --m_;
  }

  Vector solve(const Vector& v) const {
    auto R = R_.topLeftCorner(m_, m_);
    Vector z = R.transpose().triangularView<Eigen::Lower>().solve(v);
    return R.triangularView<Eigen::Upper>().solve(z);
  }

 private:
  Matrix R_;
  Index m_ = 0;
};

}  // namespace

LassoHomotopy lasso_homotopy(const Matrix& A, const Vector& b, double lambda_end) {
  LassoHomotopy h;
  const Index n = A.rows(), k = A.cols();
  if (k == 0) fail(ErrorKind::InvalidArgument, "lasso path needs at least one column");
  Vector colsq = A.colwise().squaredNorm().transpose();
  Vector c = 2.0 * (A.transpose() * b);
  Index jmax = 0;
  for (Index j = 1; j < k; ++j)
    if (std::abs(c[j]) > std::abs(c[jmax])) jmax = j;
  double lambda = std::abs(c[jmax]);
  h.lambda_max = lambda;
  const double btb = b.squaredNorm();
  h.knots.push_back({lambda, Vector::Zero(k), {}});
  lambda_end = std::max(lambda_end, 0.0);
  if (lambda == 0.0 || lambda_end >= lambda) return h;

  ActiveCholesky chol(std::min(n, k) + 1);
  std::vector<Index> active;
  std::vector<double> sign;
  std::vector<char> in_active(k, 0), excluded(k, 0);
  // Columns sitting on the boundary after leaving, with the sign they left with.
  std::vector<std::pair<Index, double>> boundary;
  auto on_boundary = [&](Index j) {
    for (const auto& [col, sg] : boundary)
      if (col == j) return true;
    return false;
  };
  const double tie_tol = 1e-10;
  const double gamma_tol = 1e-13 * h.lambda_max;

  auto gather = [&](const Vector& full) {
    Vector out(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) out[i] = full[active[i]];
    return out;
  };
  auto active_matrix = [&]() {
    Matrix M(n, active.size());
    for (std::size_t i = 0; i < active.size(); ++i) M.col(i) = A.col(active[i]);
    return M;
  };
  std::vector<Index> fresh;
  auto try_add = [&](Index j, double sgn) {
    if (static_cast<Index>(active.size()) >= n) {
      excluded[j] = 1;
      return false;
    }
    Vector cross(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) cross[i] = A.col(active[i]).dot(A.col(j));
    if (colsq[j] <= 0.0 || !chol.add(cross, colsq[j])) {
      excluded[j] = 1;
      return false;
    }
    active.push_back(j);
    sign.push_back(sgn);
    in_active[j] = 1;
    fresh.push_back(j);
    return true;
  };

  try_add(jmax, c[jmax] > 0 ? 1.0 : -1.0);
  Vector Atb = A.transpose() * b;
  Vector beta_a = Vector::Zero(active.size());

  // Enter every other variable tied at the boundary, lowest index first.
  auto add_ties = [&](const Vector& corr, double lam) {
    for (Index j = 0; j < k; ++j) {
      if (in_active[j] || excluded[j] || on_boundary(j)) continue;
      if (std::abs(corr[j]) >= lam * (1.0 - tie_tol)) try_add(j, corr[j] > 0 ? 1.0 : -1.0);
    }
  };
  add_ties(c, lambda);
  beta_a = Vector::Zero(active.size());

  const int max_steps = static_cast<int>(50 * std::min(n, k) + 1000);
  for (int step = 0; step < max_steps; ++step) {
    if (active.empty()) {
      fail(ErrorKind::DegeneratePath, "lasso homotopy lost its active set");
    }
    Vector s = Eigen::Map<const Vector>(sign.data(), sign.size());
    Vector d = chol.solve(s);
    // A column entered at zero must move in the direction of its sign.
    for (bool again = true; again && active.size() > 1;) {
      again = false;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (d[i] * sign[i] >= 0.0 || std::find(fresh.begin(), fresh.end(), active[i]) == fresh.end()) continue;
        boundary.emplace_back(active[i], sign[i]);
        in_active[active[i]] = 0;
        chol.remove(static_cast<Index>(i));
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(i));
        sign.erase(sign.begin() + static_cast<std::ptrdiff_t>(i));
        s = Eigen::Map<const Vector>(sign.data(), sign.size());
        beta_a = chol.solve(gather(Atb) - 0.5 * lambda * s);
        d = chol.solve(s);
        again = true;
        break;
      }
    }
    fresh.clear();
    Matrix Aa = active_matrix();
    Vector Ad = Aa * d;
    Vector u = A.transpose() * Ad;
    Vector r = b - Aa * beta_a;
    c = 2.0 * (A.transpose() * r);

    double gamma = lambda - lambda_end;
    int event = 0;  // 0 end, 1 entry, 2 drop
    Index who = -1;
    for (Index j = 0; j < k; ++j) {
      if (in_active[j] || excluded[j]) continue;
      double g1 = (1.0 - u[j]) != 0.0 ? (lambda - c[j]) / (1.0 - u[j]) : kInf;
      double g2 = (1.0 + u[j]) != 0.0 ? (lambda + c[j]) / (1.0 + u[j]) : kInf;
      // A column that just left sits on the boundary with its old sign; only
      // re-entry with the other sign is an event.
      for (const auto& [col, sg] : boundary)
        if (col == j) (sg > 0.0 ? g1 : g2) = kInf;
      double g = kInf;
      if (g1 > gamma_tol) g = std::min(g, g1);
      if (g2 > gamma_tol) g = std::min(g, g2);
      if (g < gamma) {
        gamma = g;
        event = 1;
        who = j;
      }
    }
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (beta_a[i] * d[i] < 0.0) {
        double g = -2.0 * beta_a[i] / d[i];
        if (g > gamma_tol && g < gamma) {
          gamma = g;
          event = 2;
          who = static_cast<Index>(i);
        }
      }
    }
    double new_lambda = event == 0 ? lambda_end : lambda - gamma;
    boundary.clear();

    if (event == 2) {
      Index pos = who;
      Index col = active[pos];
      boundary.emplace_back(col, sign[pos]);
      chol.remove(pos);
      active.erase(active.begin() + pos);
      sign.erase(sign.begin() + pos);
      in_active[col] = 0;
      std::fill(excluded.begin(), excluded.end(), 0);
    }
    lambda = new_lambda;
    Vector sa = Eigen::Map<const Vector>(sign.data(), sign.size());
    beta_a = chol.solve(gather(Atb) - 0.5 * lambda * sa);

    Vector beta = Vector::Zero(k);
    for (std::size_t i = 0; i < active.size(); ++i) beta[active[i]] = beta_a[i];
    Vector resid = b - A * beta;
    if (resid.squaredNorm() <= 1e-24 * btb) {
      h.truncated = true;
      h.note = "residual reached zero; path truncated at the last valid knot";
      break;
    }
    h.knots.push_back({lambda, beta, active});

    if (event == 0) break;
    Vector cn = 2.0 * (A.transpose() * resid);
    if (event == 1) {
      try_add(who, cn[who] > 0 ? 1.0 : -1.0);
    }
    add_ties(cn, lambda);
    if (active.size() != static_cast<std::size_t>(beta_a.size())) {
      beta_a = chol.solve(gather(Atb) - 0.5 * lambda * Eigen::Map<const Vector>(sign.data(), sign.size()));
    }
    if (lambda <= lambda_end) break;
  }
  return h;
}

Vector lasso_at(const LassoHomotopy& h, double lambda) {
  const auto& ks = h.knots;
  if (lambda >= ks.front().lambda) return ks.front().beta;
  if (lambda <= ks.back().lambda) return ks.back().beta;
  auto it = std::lower_bound(ks.begin(), ks.end(), lambda,
                             [](const LassoKnot& kn, double lam) { return kn.lambda > lam; });
  const LassoKnot& hi = *(it - 1);
  const LassoKnot& lo = *it;
  double th = (hi.lambda - lambda) / (hi.lambda - lo.lambda);
  return (1.0 - th) * hi.beta + th * lo.beta;
}

RidgeSvd::RidgeSvd(const Matrix& A, const Vector& b) {
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Index r = 0;
  double s0 = s.size() ? s[0] : 0.0;
  while (r < s.size() && s[r] > kRankTolerance * s0) ++r;
  s_ = s.head(r);
  U_ = svd.matrixU().leftCols(r);
  V_ = svd.matrixV().leftCols(r);
  c_ = U_.transpose() * b;
  full_rank_ = r == A.cols();
}

Vector RidgeSvd::coef(double lambda) const {
  Vector f = s_.array() / (s_.array().square() + lambda);
  return V_ * (f.array() * c_.array()).matrix();
}

Vector RidgeSvd::fitted(double lambda) const {
  Vector f = s_.array().square() / (s_.array().square() + lambda);
  return U_ * (f.array() * c_.array()).matrix();
}

double RidgeSvd::coef_norm(double lambda) const {
  Vector f = s_.array() / (s_.array().square() + lambda);
  return (f.array() * c_.array()).matrix().norm();
}

double RidgeSvd::trace_scale() const {
  if (V_.rows() == 0) return 1.0;
  return s_.squaredNorm() / static_cast<double>(V_.rows());
}

}  // namespace biasaware::solvers
