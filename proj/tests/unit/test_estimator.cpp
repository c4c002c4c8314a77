#include "biasaware/estimator.hpp"

#include "../helpers.hpp"
#include "../oracles.hpp"

#include <doctest.h>

using namespace biasaware;
using testutil::error_kind;

TEST_SUITE("estimator") {
  TEST_CASE("t = 0 gives the short regression") {
    Dataset d = testutil::random_dataset(30, 2, 5, 1);
    CanonicalDesign cd = canonicalize(d);
    Penalty pen(PenaltySpec::l1(), cd);
    SolutionPath p = lasso_path(cd);
    LinearEstimator e = weights_from_path(p.points.front(), cd, pen, 1.0);
    LinearEstimator s = short_regression(cd, pen, 1.0);
    CHECK((e.a - s.a).norm() < 1e-14 * s.a.norm());
    CHECK(e.bbar == doctest::Approx(s.bbar).epsilon(1e-12));
    CHECK(e.bbar == doctest::Approx((cd.Z2_t.transpose() * s.a).cwiseAbs().maxCoeff()).epsilon(1e-10));
  }

  TEST_CASE("unit variance example") {
    CanonicalDesign cd;
    cd.w_t = Vector::Ones(4);
    cd.Z2_t = Matrix::Zero(4, 1);
    cd.Z2_t(0, 0) = 1.0;
    cd.Z2_t(1, 0) = -1.0;
    cd.y_t = Vector::Zero(4);
    Penalty pen(PenaltySpec::l2(), cd);
    LinearEstimator s = short_regression(cd, pen, 4.0);
    CHECK(s.V_homo == doctest::Approx(1.0));
    CHECK(s.bbar == 0.0);
    CHECK(s.lind == doctest::Approx(0.25));
  }

  TEST_CASE("long regression") {
    Dataset d = testutil::random_dataset(25, 3, 6, 4);
    CanonicalDesign cd = canonicalize(d);
    LinearEstimator l = long_regression(cd, 1.0);
    Matrix X(25, 10);
    X << d.w, d.Z1, d.Z2;
    Vector ref = oracle::ols_weights(X, 0);
    CHECK((l.a - ref).norm() < 1e-10 * ref.norm());
    CHECK(l.bbar == 0.0);

    Dataset full = testutil::random_dataset(8, 1, 7, 4);
    CHECK(error_kind([&] { long_regression(canonicalize(full), 1.0); }) == ErrorKind::CollinearDesign);
  }

  TEST_CASE("applying weights") {
    LinearEstimator e;
    e.a = Vector::Ones(3) / 3.0;
    Vector y(3);
    y << 1, 2, 6;
    CHECK(apply(e, y) == doctest::Approx(3.0));
    CHECK(error_kind([&] { apply(e, Vector::Ones(2)); }) == ErrorKind::DimensionMismatch);
  }

  TEST_CASE("weights satisfy the normalization and bias certificate along the path") {
    Dataset d = testutil::random_dataset(60, 2, 25, 19);
    CanonicalDesign cd = canonicalize(d);
    std::mt19937_64 rng(4);
    for (const auto& spec : {PenaltySpec::l1(), PenaltySpec::l2(), PenaltySpec::predictor_norm(), PenaltySpec::lp(1.5)}) {
      Penalty pen(spec, cd);
      SolutionPath p = solution_path(cd, pen);
      for (const auto& pp : p.points) {
        LinearEstimator e = weights_from_path(pp, cd, pen, 1.0);
        CHECK(e.a.dot(cd.w_t) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(e.a.dot(d.w) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK((d.Z1.transpose() * e.a).norm() < 1e-10);
        // Worst-case bias equals the dual norm of Z2'a.
        double dn = pen.dual(cd.Z2_t.transpose() * e.a);
        CHECK(std::abs(e.bbar - dn) <= 1e-6 * std::max(dn, 1e-3));
        // No gamma with Pen <= 1 produces more bias.
        for (int k = 0; k < 5; ++k) {
          Vector g = oracle::random_vector(cd.k2(), rng);
          g /= pen.value(g);
          CHECK(std::abs(e.a.dot(cd.Z2_t * g)) <= e.bbar * (1 + 1e-6) + 1e-9 * e.a.norm() * (cd.Z2_t * g).norm());
        }
      }
    }
  }

  TEST_CASE("bias and variance trade off monotonically") {
    Dataset d = testutil::random_dataset(60, 1, 20, 3);
    CanonicalDesign cd = canonicalize(d);
    for (const auto& spec : {PenaltySpec::l1(), PenaltySpec::l2()}) {
      Penalty pen(spec, cd);
      SolutionPath p = solution_path(cd, pen);
      double prev_b = std::numeric_limits<double>::infinity(), prev_v = 0.0;
      for (const auto& pp : p.points) {
        LinearEstimator e = weights_from_path(pp, cd, pen, 1.0);
        CHECK(e.bbar <= prev_b * (1 + 1e-9) + 1e-12);
        CHECK(e.V_homo >= prev_v * (1 - 1e-9));
        prev_b = e.bbar;
        prev_v = e.V_homo;
      }
    }
  }

  TEST_CASE("path weights attain the minimum variance at their bias level") {
    std::mt19937_64 rng(77);
    const Index n = 14;
    Matrix Z1 = Matrix::Ones(n, 1);
    Matrix Z2 = oracle::random_matrix(n, 4, rng);
    Vector w = oracle::random_vector(n, rng) + Z2.col(0);
    Dataset d;
    d.Z1 = Z1;
    d.Z2 = Z2;
    d.w = w;
    d.y = Vector::Zero(n);
    CanonicalDesign cd = canonicalize(d);
    for (const auto& spec : {PenaltySpec::l1(), PenaltySpec::l2()}) {
      Penalty pen(spec, cd);
      SolutionPath p = solution_path(cd, pen);
      double q = spec.is_l1() ? std::numeric_limits<double>::infinity() : 2.0;
      int checked = 0;
      for (std::size_t i = 1; i + 1 < p.points.size(); i += std::max<std::size_t>(1, p.points.size() / 6)) {
        LinearEstimator e = weights_from_path(p.points[i], cd, pen, 1.0);
        if (e.bbar < 1e-6) continue;
        double ref = oracle::min_variance_at_bias(Z1, Z2, w, q, e.bbar);
        CHECK(e.a.squaredNorm() == doctest::Approx(ref).epsilon(1e-6));
        ++checked;
      }
      CHECK(checked >= 2);
    }
  }

  TEST_CASE("ridge blend limits") {
    Dataset d = testutil::random_dataset(30, 1, 8, 5);
    CanonicalDesign cd = canonicalize(d);
    CHECK(ridge_blend(cd, 0.0).omega_weight == 0.0);
    CHECK(ridge_blend(cd, std::numeric_limits<double>::infinity()).omega_weight == 1.0);
    CHECK(error_kind([&] { ridge_blend(cd, -1.0); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("predictor-norm ridge equals the blend of short and long regressions") {
    Dataset d = testutil::random_dataset(30, 2, 8, 15);
    CanonicalDesign cd = canonicalize(d);
    Penalty pen(PenaltySpec::predictor_norm(), cd);
    LinearEstimator s = short_regression(cd, pen, 1.0), l = long_regression(cd, 1.0);
    double bs = apply(s, cd.y_t), bl = apply(l, cd.y_t);
    for (double lam : {0.3, 3.0, 30.0, 300.0}) {
      SolutionPath p = ridge_path(cd, pen, {lam});
      LinearEstimator e = weights_from_path(p.points[0], cd, pen, 1.0);
      RidgeBlend b = ridge_blend(cd, lam);
      CHECK(apply(e, cd.y_t) == doctest::Approx(b.omega_weight * bs + (1 - b.omega_weight) * bl).epsilon(1e-10));
    }
  }

  TEST_CASE("zero denominator") {
    CanonicalDesign cd;
    cd.w_t = Vector::Zero(3);
    cd.Z2_t = Matrix::Identity(3, 1);
    cd.y_t = Vector::Zero(3);
    Penalty pen(PenaltySpec::l1(), cd);
    CHECK(error_kind([&] { short_regression(cd, pen, 1.0); }) == ErrorKind::ZeroDenominator);
  }
}
