#include "biasaware/pathsolver.hpp"

#include "../helpers.hpp"
#include "../oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace biasaware;
using testutil::error_kind;

namespace {

CanonicalDesign design_of(const Dataset& d) { return canonicalize(d); }

CanonicalDesign raw_design(const Matrix& Z, const Vector& w) {
  CanonicalDesign cd;
  cd.Z2_t = Z;
  cd.w_t = w;
  cd.y_t = Vector::Zero(w.size());
  return cd;
}

}  // namespace

TEST_SUITE("pathsolver") {
  TEST_CASE("ridge on orthonormal columns halves the projection") {
    Matrix Z = Matrix::Zero(4, 2);
    Z(0, 0) = 1.0;
    Z(1, 1) = 1.0;
    Vector w(4);
    w << 2, -4, 1, 1;
    CanonicalDesign cd = raw_design(Z, w);
    SolutionPath p = ridge_path(cd, Penalty(PenaltySpec::l2(), cd), {1.0});
    REQUIRE(p.points.size() == 1);
    CHECK(p.points[0].pi_star[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.points[0].pi_star[1] == doctest::Approx(-2.0).epsilon(1e-14));
  }

  TEST_CASE("ridge at large weight goes to zero and matches a dense solve") {
    std::mt19937_64 rng(3);
    Matrix Z = oracle::random_matrix(4, 2, rng);
    Vector w = oracle::random_vector(4, rng);
    CanonicalDesign cd = raw_design(Z, w);
    Penalty pen(PenaltySpec::l2(), cd);
    SolutionPath p = ridge_path(cd, pen, {1e12, 0.7});
    CHECK(p.points.front().pi_star.norm() < 1e-10);
    Vector ref = oracle::dense_ridge(Z, Matrix::Identity(2, 2), w, 0.7);
    CHECK((p.points.back().pi_star - ref).norm() < 1e-12 * std::max(1.0, ref.norm()));

    Matrix M(2, 2);
    M << 2, 1, 0, 1;
    SolutionPath pm = ridge_path(cd, M, {0.7});
    Vector refm = oracle::dense_ridge(Z, M, w, 0.7);
    CHECK((pm.points[0].pi_star - refm).norm() < 1e-11 * std::max(1.0, refm.norm()));
  }

  TEST_CASE("singular ridge weight matrix") {
    std::mt19937_64 rng(5);
    CanonicalDesign cd = raw_design(oracle::random_matrix(6, 2, rng), oracle::random_vector(6, rng));
    Matrix M = Matrix::Ones(2, 2);
    CHECK(error_kind([&] { ridge_path(cd, M, {1.0}); }) == ErrorKind::SingularSystem);
  }

  TEST_CASE("lasso with one column soft-thresholds") {
    Matrix Z = Matrix::Zero(3, 1);
    Z(0, 0) = 1.0;
    Vector w(3);
    w << 3, 1, 1;
    CanonicalDesign cd = raw_design(Z, w);
    SolutionPath p = lasso_path(cd);
    // lambda_max = 2 z'w = 6; pi(lambda) = 3 - lambda / 2.
    CHECK(p.points.front().lambda == doctest::Approx(6.0));
    CHECK(p.points.front().pi_star[0] == 0.0);
    CHECK(p.evaluate(2.0).pi_star[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(p.evaluate(10.0).pi_star[0] == 0.0);
  }

  TEST_CASE("lasso path matches coordinate descent") {
    std::mt19937_64 rng(17);
    Matrix Z = oracle::random_matrix(6, 3, rng);
    Vector w = oracle::random_vector(6, rng) + Z.col(0);
    CanonicalDesign cd = raw_design(Z, w);
    SolutionPath p = lasso_path(cd);
    double lmax = p.points.front().lambda;
    for (double frac : {0.9, 0.5, 0.2, 0.05, 0.001}) {
      double lam = frac * lmax;
      Vector ref = oracle::cd_lasso(Z, w, lam);
      CHECK((p.evaluate(lam).pi_star - ref).norm() < 1e-8);
    }
    // Full column rank: the path ends at the least squares fit.
    Vector ls = Z.colPivHouseholderQr().solve(w);
    CHECK(p.points.back().lambda == 0.0);
    CHECK((p.points.back().pi_star - ls).norm() < 1e-9);
  }

  TEST_CASE("lasso KKT holds at knots and between them") {
    Dataset d = testutil::random_dataset(40, 2, 15, 21);
    CanonicalDesign cd = design_of(d);
    SolutionPath p = lasso_path(cd);
    double scale = p.points.front().lambda;
    for (const auto& pp : p.points) CHECK(lasso_kkt(pp, cd, scale).ok(1e-8));
    for (std::size_t i = 0; i + 1 < p.points.size(); ++i) {
      double lam = 0.5 * (p.points[i].lambda + p.points[i + 1].lambda);
      CHECK(lasso_kkt(p.evaluate(lam), cd, scale).ok(1e-8));
    }
  }

  TEST_CASE("lasso KKT with integer controls, ties and more columns than rows") {
    Dataset d = testutil::random_dataset(7, 1, 110, 9540);
    for (Index j = 0; j < d.Z2.cols(); ++j)
      for (Index i = 0; i < d.n(); ++i) d.Z2(i, j) = std::round(d.Z2(i, j));
    CanonicalDesign cd = design_of(d);
    SolutionPath p = lasso_path(cd);
    double scale = p.points.front().lambda;
    for (const auto& pp : p.points) CHECK(lasso_kkt(pp, cd, scale).ok(1e-8));
    for (std::size_t i = 0; i + 1 < p.points.size(); ++i) {
      double lam = 0.5 * (p.points[i].lambda + p.points[i + 1].lambda);
      CHECK(lasso_kkt(p.evaluate(lam), cd, scale).ok(1e-8));
    }
  }

  TEST_CASE("rss is nondecreasing in lambda and the frontier is convex in t") {
    Dataset d = testutil::random_dataset(50, 1, 20, 8);
    CanonicalDesign cd = design_of(d);
    for (const auto& spec : {PenaltySpec::l1(), PenaltySpec::l2()}) {
      Penalty pen(spec, cd);
      SolutionPath p = solution_path(cd, pen);
      const auto& pts = p.points;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        CHECK(pts[i + 1].t_lambda >= pts[i].t_lambda - 1e-12);
        CHECK(pts[i + 1].rss <= pts[i].rss * (1 + 1e-12));
      }
      // Convexity of rss as a function of t on the constrained frontier.
      for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        double t0 = pts[i - 1].t_lambda, t1 = pts[i].t_lambda, t2 = pts[i + 1].t_lambda;
        if (t2 - t0 < 1e-9 * std::max(1.0, t2)) continue;
        double interp = pts[i - 1].rss + (pts[i + 1].rss - pts[i - 1].rss) * (t1 - t0) / (t2 - t0);
        CHECK(pts[i].rss <= interp + 1e-9 * pts[0].rss);
      }
    }
  }

  TEST_CASE("constrained path at t = 0 and against the closed-form paths") {
    std::mt19937_64 rng(9);
    Matrix Z = oracle::random_matrix(12, 4, rng);
    Vector w = oracle::random_vector(12, rng) + Z.col(1);
    CanonicalDesign cd = raw_design(Z, w);

    PathPoint zero = constrained_point(cd, Penalty(PenaltySpec::lp(1.5), cd), 0.0);
    CHECK(zero.pi_star.norm() == 0.0);
    CHECK(zero.rss == doctest::Approx(w.squaredNorm()));

    SolutionPath ridge = ridge_path(cd, Penalty(PenaltySpec::l2(), cd), {3.0});
    double t2 = ridge.points[0].pi_star.norm();
    GenericOptions tight;
    tight.rel_gap = 1e-14;
    PathPoint g2 = constrained_point(cd, Penalty(PenaltySpec::l2(), cd), t2, tight);
    CHECK((g2.pi_star - ridge.points[0].pi_star).norm() < 1e-6);

    SolutionPath lasso = lasso_path(cd);
    PathPoint lp = lasso.evaluate(0.3 * lasso.points.front().lambda);
    PathPoint g1 = constrained_point(cd, Penalty(PenaltySpec::l1(), cd), lp.t_lambda, tight);
    CHECK((g1.pi_star - lp.pi_star).norm() < 1e-6);
  }

  TEST_CASE("generic path for p = 3 is monotone") {
    Dataset d = testutil::random_dataset(30, 1, 6, 12);
    CanonicalDesign cd = design_of(d);
    SolutionPath p = solution_path(cd, Penalty(PenaltySpec::lp(3.0), cd));
    CHECK(p.kind == PathKind::Generic);
    CHECK(p.points.front().t_lambda == 0.0);
    for (std::size_t i = 0; i + 1 < p.points.size(); ++i) CHECK(p.points[i + 1].rss <= p.points[i].rss * (1 + 1e-7));
  }

  TEST_CASE("modulus without controls is linear") {
    // One restricted control orthogonal to w: pi = 0 everywhere, so the
    // constrained problem never moves and omega = 2C/t at every t.
    Matrix Z = Matrix::Zero(3, 1);
    Z(2, 0) = 1.0;
    Vector w(3);
    w << 1, 1, 0;
    CanonicalDesign cd = raw_design(Z, w);
    PathPoint pp = constrained_point(cd, Penalty(PenaltySpec::l2(), cd), 0.5);
    CHECK(pp.rss == doctest::Approx(2.0));
    ModulusPoint m = modulus_from_path(pp, 1.0, cd);
    CHECK(m.omega == doctest::Approx(4.0));
    CHECK(m.delta == doctest::Approx(4.0 * std::sqrt(2.0)));
    CHECK(m.omega / m.delta == doctest::Approx(1.0 / w.norm()));
    CHECK(m.omega_prime == doctest::Approx(1.0 / w.norm()));
  }

  TEST_CASE("modulus scales with C and matches a nested bisection") {
    std::mt19937_64 rng(31);
    Matrix Z = oracle::random_matrix(5, 2, rng);
    Vector w = oracle::random_vector(5, rng) + 0.8 * Z.col(0);
    CanonicalDesign cd = raw_design(Z, w);
    SolutionPath p = ridge_path(cd, Penalty(PenaltySpec::l2(), cd), {10.0, 2.0, 0.5, 0.1});
    for (const auto& pp : p.points) {
      ModulusPoint m1 = modulus_from_path(pp, 1.0, cd);
      ModulusPoint m2 = modulus_from_path(pp, 2.0, cd);
      CHECK(m2.omega == doctest::Approx(2.0 * m1.omega).epsilon(1e-14));
      CHECK(m2.delta == doctest::Approx(2.0 * m1.delta).epsilon(1e-14));
      double ref = oracle::modulus_l2(Z, w, 1.0, m1.delta);
      CHECK(m1.omega == doctest::Approx(ref).epsilon(1e-7));
    }
  }

  TEST_CASE("modulus is concave and its slope matches omega prime") {
    Dataset d = testutil::random_dataset(40, 1, 10, 14);
    CanonicalDesign cd = design_of(d);
    for (const auto& spec : {PenaltySpec::l1(), PenaltySpec::l2()}) {
      SolutionPath p = solution_path(cd, Penalty(spec, cd));
      std::vector<ModulusPoint> ms;
      for (const auto& pp : p.points)
        if (pp.t_lambda > 0.0) ms.push_back(modulus_from_path(pp, 1.0, cd));
      std::sort(ms.begin(), ms.end(), [](auto& a, auto& b) { return a.delta < b.delta; });
      for (std::size_t i = 0; i + 1 < ms.size(); ++i) {
        if (ms[i + 1].delta - ms[i].delta < 1e-9) continue;
        double slope = (ms[i + 1].omega - ms[i].omega) / (ms[i + 1].delta - ms[i].delta);
        CHECK(slope <= ms[i].omega_prime * (1 + 1e-8) + 1e-12);
        CHECK(slope >= ms[i + 1].omega_prime * (1 - 1e-8) - 1e-12);
      }
    }
  }

  TEST_CASE("perfect fit truncates the path") {
    // w lies in the span of Z2: the residual vanishes at the end of the path.
    std::mt19937_64 rng(2);
    Matrix Z = oracle::random_matrix(8, 3, rng);
    Vector w = Z * Vector::Ones(3);
    CanonicalDesign cd = raw_design(Z, w);
    SolutionPath p = lasso_path(cd);
    CHECK(p.truncated);
    for (const auto& pp : p.points) CHECK(pp.rss > 0.0);
    SolutionPath r = ridge_path(cd, Penalty(PenaltySpec::l2(), cd), default_ridge_grid(cd, Penalty(PenaltySpec::l2(), cd)));
    CHECK(r.truncated);
  }

  TEST_CASE("modulus errors") {
    Matrix Z = Matrix::Identity(3, 1);
    Vector w = Vector::Ones(3);
    CanonicalDesign cd = raw_design(Z, w);
    PathPoint pp = constrained_point(cd, Penalty(PenaltySpec::l2(), cd), 0.0);
    CHECK(error_kind([&] { modulus_from_path(pp, 1.0, cd); }) == ErrorKind::ZeroPenaltySolution);
  }

  TEST_CASE("path csv has one line per point") {
    Dataset d = testutil::random_dataset(20, 1, 4, 6);
    CanonicalDesign cd = design_of(d);
    SolutionPath p = lasso_path(cd);
    std::ostringstream os;
    write_path_csv(p, os);
    auto s = os.str();
    CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) == p.points.size() + 1);
  }
}
