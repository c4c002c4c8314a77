#include "biasaware/diagnostics.hpp"

#include "../helpers.hpp"
#include "../oracles.hpp"

#include <doctest.h>

using namespace biasaware;
using testutil::error_kind;

namespace {

// Y and Z2 with (w, Z1) projected out by a dense least-squares solve.
std::pair<Vector, Matrix> partial_out(const Dataset& d) {
  Matrix X1(d.n(), 1 + d.k1());
  X1 << d.w, d.Z1;
  Matrix N = oracle::complement_basis(X1, d.n());
  Matrix P = N * N.transpose();
  return {P * d.y, P * d.Z2};
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("outcome regression with an l1 penalty matches coordinate descent") {
    Dataset d = testutil::random_dataset(40, 2, 8, 3);
    d.y += d.Z2.col(0) - 0.5 * d.Z2.col(3);
    auto [yp, Xp] = partial_out(d);
    for (double lam : {0.5, 0.1, 0.01}) {
      OutcomeFit f = outcome_regression(d, PenaltySpec::l1(), lam);
      Vector ref = oracle::cd_lasso(Xp, yp, 40.0 * lam);
      CHECK((f.theta2_hat - ref).norm() < 1e-8);
      // (beta, gamma1) are the least squares fit of Y - Z2 theta2 on (w, Z1).
      Matrix X1(40, 3);
      X1 << d.w, d.Z1;
      Vector t1 = X1.colPivHouseholderQr().solve(Vector(d.y - d.Z2 * f.theta2_hat));
      CHECK((f.theta1_hat - t1).norm() < 1e-10);
      CHECK((f.residuals - (d.y - X1 * t1 - d.Z2 * f.theta2_hat)).norm() < 1e-10);
    }
  }

  TEST_CASE("outcome regression with an l2 penalty satisfies its optimality condition") {
    Dataset d = testutil::random_dataset(40, 1, 6, 4);
    d.y += d.Z2.col(1);
    auto [yp, Xp] = partial_out(d);
    OutcomeFit f = outcome_regression(d, PenaltySpec::l2(), 0.05);
    REQUIRE(f.theta2_hat.norm() > 0.0);
    Vector g = 2.0 * Xp.transpose() * (yp - Xp * f.theta2_hat) / 40.0;
    CHECK((g - 0.05 * f.theta2_hat / f.theta2_hat.norm()).norm() < 1e-9);
  }

  TEST_CASE("outcome regression limits") {
    Dataset d = testutil::random_dataset(30, 2, 5, 8);
    OutcomeFit big = outcome_regression(d, PenaltySpec::l1(), 1e6);
    CHECK(big.theta2_hat.norm() == 0.0);
    Matrix X1(30, 3);
    X1 << d.w, d.Z1;
    CHECK((big.theta1_hat - X1.colPivHouseholderQr().solve(d.y)).norm() < 1e-10);
    OutcomeFit tiny = outcome_regression(d, PenaltySpec::l1(), 1e-12);
    Matrix X(30, 8);
    X << d.w, d.Z1, d.Z2;
    Vector ols = X.colPivHouseholderQr().solve(d.y);
    CHECK((tiny.theta2_hat - ols.tail(5)).norm() < 1e-6);
    CHECK(error_kind([&] { outcome_regression(d, PenaltySpec::l1(), 0.0); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("soft-thresholding for one orthogonal column") {
    Dataset d;
    d.w = Vector::Zero(4);
    d.w << 1, 1, 0, 0;
    d.Z1 = Matrix(4, 0);
    d.Z2 = Matrix::Zero(4, 1);
    d.Z2 << 0, 0, 1, -1;
    d.y = Vector::Zero(4);
    d.y << 2, 2, 3, -3;
    // Objective ||y - X theta||^2 + 4 lam |g| with ||z||^2 = 2 and z'y = 6: g = max(3 - lam, 0).
    for (double lam : {0.5, 2.0, 4.0}) {
      OutcomeFit f = outcome_regression(d, PenaltySpec::l1(), lam);
      CHECK(f.theta2_hat[0] == doctest::Approx(std::max(3.0 - lam, 0.0)).epsilon(1e-12));
      CHECK(f.theta1_hat[0] == doctest::Approx(2.0).epsilon(1e-12));
    }
  }

  TEST_CASE("R-squared curve") {
    Dataset d = testutil::random_dataset(60, 2, 10, 9);
    d.y += d.Z2 * Vector::LinSpaced(10, -1, 1);
    for (const auto& spec : {PenaltySpec::l1(), PenaltySpec::l2()}) {
      auto curve = r2_curve(d, spec, {0.0, 0.1, 0.5, 1.0, 5.0, 100.0});
      double tss = (d.y.array() - d.y.mean()).square().sum();
      Matrix X1(60, 3);
      X1 << d.w, d.Z1;
      double r0 = 1.0 - (d.y - X1 * X1.colPivHouseholderQr().solve(d.y)).squaredNorm() / tss;
      CHECK(curve.front().second == doctest::Approx(r0).epsilon(1e-10));
      for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second >= curve[i - 1].second - 1e-12);
      Matrix X(60, 13);
      X << d.w, d.Z1, d.Z2;
      double rfull = 1.0 - (d.y - X * X.colPivHouseholderQr().solve(d.y)).squaredNorm() / tss;
      CHECK(curve.back().second == doctest::Approx(rfull).epsilon(1e-9));
      CHECK(curve.back().second <= 1.0);
    }
    CHECK(error_kind([&] { r2_curve(d, PenaltySpec::l1(), {1.0, 0.5}); }) == ErrorKind::InvalidArgument);
    CHECK(error_kind([&] { r2_curve(d, PenaltySpec::l1(), {-1.0}); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("breakdown value") {
    Dataset d = testutil::random_dataset(120, 1, 10, 12, 1.0);
    BiasAwareAnalysis an(d, PenaltySpec::l1());
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(0.05 * i);
    Breakdown b = breakdown_C(an, 0.05, 0.0, grid);
    REQUIRE(b.rows.size() == grid.size());
    CHECK(b.rows.front().excludes_null);
    REQUIRE(b.c_star.has_value());
    std::size_t first_in = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!b.rows[i].excludes_null) {
        first_in = i;
        break;
      }
    if (first_in < grid.size()) {
      CHECK(*b.c_star == grid[first_in - 1]);
    } else {
      CHECK(*b.c_star == grid.back());
    }
    // A null inside the C = 0 interval breaks down immediately.
    double center = b.rows.front().flci.beta_hat;
    Breakdown b0 = breakdown_C(an, 0.05, center, grid);
    CHECK(!b0.c_star.has_value());
    CHECK(error_kind([&] { breakdown_C(an, 0.05, 0.0, {1.0, 0.5}); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("moderate deviations critical value") {
    Matrix X = Matrix::Ones(2, 1);
    Vector e = Vector::Constant(2, 1.0 / std::sqrt(2.0));
    CHECK(moderate_deviations_lambda(X, e, 0.05) == doctest::Approx(1.959963984540054).epsilon(1e-10));
    // Two identical columns: each tail gets alpha / 2.
    Matrix X2 = Matrix::Ones(2, 2);
    CHECK(moderate_deviations_lambda(X2, e, 0.05) == doctest::Approx(2.241402727604947).epsilon(1e-10));
    CHECK(error_kind([&] { moderate_deviations_lambda(X, Vector::Ones(3), 0.05); }) == ErrorKind::DimensionMismatch);
  }

  TEST_CASE("known-sigma critical value for one column") {
    std::mt19937_64 rng(5);
    Matrix X = oracle::random_matrix(50, 1, rng);
    double lam = known_sigma_lambda(X, 4.0, std::numeric_limits<double>::infinity(), 0.05, 200000, 3);
    double ref = 1.959963984540054 * 2.0 * 2.0 * X.norm() / 50.0;
    CHECK(lam == doctest::Approx(ref).epsilon(0.01));
    CHECK(known_sigma_lambda(X, 4.0, 2.0, 0.05, 1000, 9) == known_sigma_lambda(X, 4.0, 2.0, 0.05, 1000, 9));
  }

  TEST_CASE("lower bound for C") {
    Dataset d = testutil::random_dataset(80, 2, 12, 17);
    Vector g2 = Vector::Zero(12);
    g2[0] = 1.0;
    g2[5] = -0.8;
    Matrix X1(80, 3);
    X1 << d.w, d.Z1;
    // Noiseless outcome: the bound cannot exceed the true penalty.
    d.y = X1 * Vector::Constant(3, 0.5) + d.Z2 * g2;
    d.sigma2 = 1.0;
    CLowerCI ci = lower_ci_C(d, PenaltySpec::l1(), 0.05, CLowerMode::KnownSigmaMC, {std::nullopt, 1, 20000});
    CHECK(ci.c_hat > 0.0);
    CHECK(ci.c_hat <= 1.8 + 1e-10);
    PartialledOutcome po(d, PenaltySpec::l1());
    CHECK(c_hat_from_path(po, 1e9) == 0.0);
    Dataset u = d;
    u.sigma2.reset();
    CHECK(error_kind([&] { lower_ci_C(u, PenaltySpec::l1(), 0.05, CLowerMode::KnownSigmaMC); }) == ErrorKind::MissingSigma);
    CHECK(error_kind([&] { lower_ci_C(u, PenaltySpec::l1(), 0.05, CLowerMode::ModerateDeviations); }) ==
          ErrorKind::MissingResiduals);
    CLowerOptions opt;
    opt.residuals = Vector::Ones(80);
    CLowerCI md = lower_ci_C(u, PenaltySpec::l1(), 0.05, CLowerMode::ModerateDeviations, opt);
    CHECK(md.c_hat <= 1.8 + 1e-10);
  }

  TEST_CASE("double lasso limits") {
    Dataset d = testutil::random_dataset(50, 2, 6, 23);
    CanonicalDesign cd = canonicalize(d);
    DoubleLassoResult big = double_lasso_zz(d, 1e12, 1e12, 0.05);
    CHECK(big.beta_lasso == 0.0);
    CHECK(big.beta_zz == doctest::Approx(cd.w_t.dot(cd.y_t) / cd.w_t.squaredNorm()).epsilon(1e-12));
    CHECK(big.ci_hi - big.ci_lo == doctest::Approx(2 * 1.959963984540054 * big.sd).epsilon(1e-12));

    Dataset clean = d;
    Matrix X(50, 3);
    X << d.w, d.Z1;
    clean.y = X * Vector::Constant(3, 1.5) + d.Z2.col(2) * 0.7;
    DoubleLassoResult e = double_lasso_zz(clean, 1.0, 1e-9, 0.05);
    CHECK(e.beta_zz == doctest::Approx(1.5).epsilon(1e-7));
    CHECK(error_kind([&] { double_lasso_zz(d, 0.0, 1.0, 0.05); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("rate functional and K_n") {
    CHECK(rate_functional(2.0, 4, 16) == doctest::Approx(0.5));
    CHECK(rate_functional(std::numeric_limits<double>::infinity(), 55, 16) ==
          doctest::Approx(std::sqrt(std::log(55.0)) / 4.0));
    CHECK(rate_functional(4.0, 16, 100) == doctest::Approx(0.2));
    CHECK(default_K_n(1000) == doctest::Approx(2.0 * std::sqrt(std::log(std::log(1000.0))) + 1.0));
    CHECK(default_K_n(2) == default_K_n(3));
  }

  TEST_CASE("initial residuals") {
    Dataset d = testutil::random_dataset(100, 2, 20, 31);
    InitialResidualFit f = default_initial_residuals(d, PenaltySpec::l1());
    auto [yp, Xp] = partial_out(d);
    double n = 100.0;
    double sx = (Xp.colwise().norm() / std::sqrt(n)).maxCoeff();
    double expect = 2.0 * default_K_n(100) * std::sqrt(std::log(20.0)) / 10.0 * (yp.norm() / 10.0) * sx;
    CHECK(f.lambda0 == doctest::Approx(expect).epsilon(1e-12));
    CHECK(f.lambda_final > 0.0);
    CHECK(f.residuals.size() == 100);
    Matrix X1(100, 3);
    X1 << d.w, d.Z1;
    CHECK((X1.transpose() * f.residuals).norm() < 1e-9 * f.residuals.norm() * X1.norm());
    InitialResidualFit g = default_initial_residuals(d, PenaltySpec::l2());
    CHECK(g.lambda_final == g.lambda0);
  }
}
