#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <doctest.h>

#include "cuspgeo/analysis.hpp"

using namespace cuspgeo;
using std::numbers::pi;

namespace {

// Roots of lambda^2 + (2k-1) lambda + k(k-1) a / 2, ordered by real part, then imaginary.
std::array<std::complex<double>, 2> char_roots(int k, double a) {
  const double n = 2 * k - 1, q = 0.5 * k * (k - 1) * a;
  const std::complex<double> s = std::sqrt(std::complex<double>(n * n - 4 * q, 0.0));
  return {(-n + s) / 2.0, (-n - s) / 2.0};
}

std::pair<CuspMetric, CriticalPointSet> offset(double c) {
  auto m = metric_from_boundary_curve(presets::offset_circle(c), 2);
  auto cps = find_critical_points(m);
  return {std::move(m), std::move(cps)};
}

}  // namespace

TEST_CASE("eigenvalues match the characteristic polynomial") {
  for (int k : {2, 3, 4}) {
    for (double a : {-4.0, -0.5, 0.0, 1.0, 2.0, 3.5, 10.0}) {
      const auto e = eigen_data(k, a);
      const auto want = char_roots(k, a);
      CHECK(e.lambda1 == std::complex<double>(1.0, 0.0));
      const bool match = (std::abs(e.lambda2 - want[0]) < 1e-12 && std::abs(e.lambda3 - want[1]) < 1e-12) ||
                         (std::abs(e.lambda2 - want[1]) < 1e-12 && std::abs(e.lambda3 - want[0]) < 1e-12);
      CHECK(match);
      CHECK(std::abs(e.lambda2 + e.lambda3 + double(2 * k - 1)) < 1e-12);
    }
  }
  CHECK(eigen_data(2, 1.0).regime == Regime::real_node);
  CHECK(eigen_data(2, 2.25).regime == Regime::critically_damped);
  CHECK(eigen_data(2, 3.0).regime == Regime::spiral);
  // lambda2 is the slow one in the real regime
  CHECK(eigen_data(2, -4.0).lambda2.real() == doctest::Approx(1.0));
}

TEST_CASE("threshold a_k") {
  for (int k = 2; k <= 6; ++k) {
    const double n = 2 * k - 1;
    CHECK(a_k(k) == doctest::Approx(n * n / (2.0 * k * (k - 1))).epsilon(1e-15));
    // the discriminant vanishes there
    CHECK(std::abs(n * n - 2.0 * k * (k - 1) * a_k(k)) < 1e-12);
  }
}

TEST_CASE("rational detection and linearizability labels") {
  const auto r = detect_rational(-0.75);
  REQUIRE(r);
  CHECK((*r)[0] == -3);
  CHECK((*r)[1] == 4);
  CHECK_FALSE(detect_rational(pi));
  CHECK_FALSE(detect_rational(std::sqrt(2.0)));
  CHECK(eigen_data(2, 2.0, 1.0, true).label == Linearizability::resonant_a_equals_2);
  // a = 5/4: lambda2 = -1/2, lambda3 = -5/2
  CHECK(eigen_data(2, 1.25, 1.0, true).label == Linearizability::C1);
  CHECK(eigen_data(2, 1.0, 1.0, true).label == Linearizability::C2);
  CHECK(eigen_data(2, 3.0, 1.0, true).label == Linearizability::not_applicable);
}

TEST_CASE("resonance relations") {
  const auto e = eigen_data(2, 1.0);
  const std::array<std::complex<double>, 3> lam{e.lambda1, e.lambda2, e.lambda3};
  const auto rel = resonance_relations(lam, 8);
  // 3 lambda1 + lambda2 + lambda3 = 0, shifted onto lambda2
  CHECK(std::find(rel.begin(), rel.end(), Resonance{2, 3, 2, 1}) != rel.end());
  for (const auto& x : rel) {
    const auto lhs = double(x.a1) * lam[0] + double(x.a2) * lam[1] + double(x.a3) * lam[2];
    CHECK(std::abs(lhs - lam[std::size_t(x.i - 1)]) < 1e-9);
  }
}

TEST_CASE("critical points of the offset circle") {
  const auto [metric, cps] = offset(2.0);
  CHECK(cps.morse());
  REQUIRE(cps.points.size() == 2);
  CHECK(cps.num_maxima() == 1);
  CHECK(cps.points[0].type == CriticalType::maximum);
  CHECK(std::abs(std::remainder(cps.points[0].phi0, 2 * pi)) < 1e-10);
  CHECK(cps.points[1].phi0 == doctest::Approx(pi).epsilon(1e-10));
  CHECK(cps.points[0].a == doctest::Approx(-4.0).epsilon(1e-8));
  CHECK(cps.points[1].a == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(cps.points[0].S_value == doctest::Approx(9.0).epsilon(1e-10));

  const auto circle = metric_from_boundary_curve(presets::circle(1.0), 2);
  const auto cc = find_critical_points(circle);
  CHECK(cc.constant_S);
  CHECK(cc.points.empty());
}

TEST_CASE("default barrier near the circle") {
  {
    const auto [metric, cps] = offset(1.05);
    const auto b = check_barrier(metric, cps.points[0], cps.points[1]);
    CHECK(b.all_pass());
    CHECK(b.cond_b.margin > 0.0);
  }
  {
    const auto [metric, cps] = offset(1.2);
    const auto b = check_barrier(metric, cps.points[0], cps.points[1]);
    CHECK_FALSE(b.cond_b.pass);
    CHECK(b.cond_b.margin < 0.0);
  }
  const auto [metric, cps] = offset(1.05);
  CHECK_THROWS_AS(check_barrier(metric, cps.points[1], cps.points[0]), PreconditionError);
}

TEST_CASE("convexity bound") {
  const auto ell = metric_from_boundary_curve(presets::ellipse(2.0, 1.0), 2);
  const auto c = convexity_S_bound(*ell.curve());
  CHECK(c.bound_satisfied);
  CHECK(c.sup_Spp_direct < 2.0);
  CHECK(c.max_discrepancy < 1e-6);
  const auto off = metric_from_boundary_curve(presets::offset_circle(2.0), 2);
  CHECK(convexity_S_bound(*off.curve()).sup_Spp_direct == doctest::Approx(4.0).epsilon(1e-8));
}
