#include "biasaware/efficiency.hpp"

#include "biasaware/inference.hpp"

#include "../helpers.hpp"
#include "../oracles.hpp"

#include <doctest.h>

using namespace biasaware;
using testutil::error_kind;

namespace {

std::vector<ModulusPoint> linear_modulus(double slope, double dmin, double dmax, int count) {
  std::vector<ModulusPoint> m;
  for (int i = 0; i < count; ++i) {
    double d = dmin * std::pow(dmax / dmin, static_cast<double>(i) / (count - 1));
    m.push_back({d, slope * d, slope});
  }
  return m;
}

}  // namespace

TEST_SUITE("efficiency") {
  TEST_CASE("linear modulus gives the no-controls efficiency") {
    const double z = boost::math::quantile(boost::math::normal(), 0.95);
    const double ref = oracle::no_controls_numerator(z) / (2.0 * oracle::cv_bisection(0.0, 0.05));
    CHECK(ref == doctest::Approx(0.84989).epsilon(1e-5));
    for (double slope : {0.3, 1.0, 4.0}) {
      KappaFlciDetail det;
      double k = kappa_flci(linear_modulus(slope, 1e-3, 40.0, 30), 0.05, 1.0, &det);
      CHECK(k == doctest::Approx(ref).epsilon(1e-9));
      CHECK(det.extension_mass < 1e-6);
    }
    // A single far sample pins the same line.
    CHECK(kappa_flci(linear_modulus(1.0, 30.0, 30.0, 1), 0.05) == doctest::Approx(ref).epsilon(1e-9));
  }

  TEST_CASE("affine minimax risk") {
    for (double tau : {0.1, 0.5, 1.0, 3.0})
      for (double sigma : {0.5, 1.0, 2.0})
        CHECK(rho_affine(tau, sigma) == doctest::Approx(oracle::rho_affine_brute(tau, sigma)).epsilon(1e-6));
    CHECK(rho_affine(std::numeric_limits<double>::infinity(), 2.0) == 4.0);
  }

  TEST_CASE("nonlinear minimax bounds") {
    for (double tau : {0.2, 0.7, 1.5, 3.0, 6.0}) {
      MinimaxRiskBounds b = rho_nonlinear_bounds(tau, 1.0);
      CHECK(b.lower <= b.upper);
      CHECK(b.upper <= rho_affine(tau, 1.0) * (1 + 1e-12));
      CHECK(b.upper >= 0.8 * rho_affine(tau, 1.0));
      CHECK(b.lower >= 0.8 * rho_affine(tau, 1.0) * (1 - 1e-12));
      MinimaxRiskBounds b2 = rho_nonlinear_bounds(2.0 * tau, 2.0);
      CHECK(b2.upper == doctest::Approx(4.0 * b.upper).epsilon(1e-6));
    }
    // Small tau: the two-point prior at +-tau is least favorable and all bounds coincide.
    MinimaxRiskBounds s = rho_nonlinear_bounds(0.2, 1.0);
    CHECK(s.lower == doctest::Approx(s.upper).epsilon(1e-3));
  }

  TEST_CASE("bracket on a linear modulus") {
    auto [lo, hi] = kappa_mse_bracket(linear_modulus(1.0, 0.05, 20.0, 40), 1.0);
    CHECK(lo <= hi);
    CHECK(hi <= 1.0 + 1e-12);
    CHECK(hi >= 0.8);
    CHECK(lo >= 0.8 * (1 - 1e-12));
  }

  TEST_CASE("efficiency on random designs") {
    Dataset d = testutil::random_dataset(80, 2, 20, 41);
    CanonicalDesign cd = canonicalize(d);
    const double frozen_kappa[] = {0.913443500952, 0.856831960244};
    const double frozen_hi[] = {0.992129441451, 1.0};
    int which = 0;
    for (const auto& spec : {PenaltySpec::l1(), PenaltySpec::l2()}) {
      Penalty pen(spec, cd);
      EfficiencyReport r = efficiency_report(cd, pen, 1.0, 0.05);
      CHECK(r.kappa_flci == doctest::Approx(frozen_kappa[which]).epsilon(1e-8));
      CHECK(r.kappa_mse_hi == doctest::Approx(frozen_hi[which]).epsilon(1e-6));
      ++which;
      CHECK(r.kappa_flci >= 0.717);
      CHECK(r.kappa_flci <= 1.0);
      CHECK(r.kappa_mse_lo <= r.kappa_mse_hi);
      CHECK(r.kappa_mse_hi >= 0.8);
      CHECK(r.kappa_mse_hi <= 1.0 + 1e-12);
      // Scaling C is the same as scaling sigma inversely.
      EfficiencyReport r2 = efficiency_report(cd, pen, 2.0, 0.05, 1.0);
      EfficiencyReport r3 = efficiency_report(cd, pen, 1.0, 0.05, 0.5);
      CHECK(r2.kappa_flci == doctest::Approx(r3.kappa_flci).epsilon(1e-6));
    }
  }

  TEST_CASE("errors") {
    CHECK(error_kind([] { kappa_flci({}, 0.05); }) == ErrorKind::InsufficientModulusRange);
    CHECK(error_kind([] { kappa_flci(linear_modulus(1.0, 1e-3, 0.01, 5), 0.05); }) ==
          ErrorKind::InsufficientModulusRange);
    CHECK(error_kind([] { kappa_flci(linear_modulus(1.0, 1e-3, 10.0, 5), 0.05, 0.0); }) == ErrorKind::NonpositiveSd);
  }
}
