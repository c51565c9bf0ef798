#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <boost/math/special_functions/ellint_2.hpp>
#include <doctest.h>

#include "cuspgeo/analysis.hpp"
#include "cuspgeo/metric.hpp"

using namespace cuspgeo;
using std::numbers::pi;

TEST_CASE("offset circle gives S = c^2 + 1 + 2c cos phi") {
  for (double c : {1.05, 2.0}) {
    const auto metric = metric_from_boundary_curve(presets::offset_circle(c), 2);
    CHECK(metric.length() == doctest::Approx(2 * pi).epsilon(1e-12));
    for (double phi : {0.0, 0.5, 2.0, pi, 5.0}) {
      const auto s = eval_S(metric, phi);
      CHECK(s[0] == doctest::Approx(c * c + 1 + 2 * c * std::cos(phi)).epsilon(1e-10));
      CHECK(s[1] == doctest::Approx(-2 * c * std::sin(phi)).scale(1).epsilon(1e-9));
      CHECK(s[2] == doctest::Approx(-2 * c * std::cos(phi)).scale(1).epsilon(1e-8));
    }
    CHECK(metric.warnings.empty());
  }
}

TEST_CASE("ellipse perimeter against the complete elliptic integral") {
  const double a = 2.0, b = 1.0;
  const auto metric = metric_from_boundary_curve(presets::ellipse(a, b), 2);
  const double e = std::sqrt(1 - b * b / (a * a));
  CHECK(metric.length() == doctest::Approx(4 * a * boost::math::ellint_2(e)).epsilon(1e-11));
  CHECK(metric.curve()->max_speed_error < 1e-8);
  // S ranges over [b^2, a^2]
  CHECK(metric.sup_S() == doctest::Approx(a * a).epsilon(1e-9));
  CHECK(metric.inf_S() == doctest::Approx(b * b).epsilon(1e-9));
}

TEST_CASE("metric tensor components") {
  const auto metric = make_model_metric(3, BoundaryFunction(2 * pi, 1.0, {0.5}, {}),
                                        BoundaryFunction(2 * pi, 2.0, {0.0, 0.25}, {}));
  const double r = 0.3, phi = 1.2;
  const double S = 1.0 + 0.5 * std::cos(phi), C = 2.0 + 0.25 * std::cos(2 * phi);
  const auto g = metric_tensor(metric, r, phi);
  CHECK(g.g_rr == doctest::Approx(1 - 6 * std::pow(r, 4) * S));
  CHECK(g.g_rr_minus_one == doctest::Approx(-6 * std::pow(r, 4) * S));
  CHECK(g.g_phiphi == doctest::Approx(std::pow(r, 6) * C));
  CHECK(g.g_rphi == 0.0);
  // g_rr vanishes at (1 / (k(k-1) sup S))^(1/m)
  CHECK(metric.validity_radius() == doctest::Approx(std::pow(1.0 / (6 * 1.5), 0.25)).epsilon(1e-9));
  CHECK(metric.domain_radius() < metric.validity_radius());
}

TEST_CASE("curve files") {
  const auto path = std::filesystem::temp_directory_path() / "cuspgeo_circle_curve.csv";
  {
    std::ofstream os(path);
    os.precision(17);
    os << "x,y\n";
    for (int j = 0; j <= 400; ++j)
      os << 3 * std::cos(2 * pi * j / 400) << ',' << 3 * std::sin(2 * pi * j / 400) << '\n';
  }
  const auto metric = metric_from_boundary_curve(read_curve_csv(path.string()), 2);
  CHECK(metric.constant_S());
  CHECK(metric.length() == doctest::Approx(6 * pi).epsilon(1e-9));
  CHECK(metric.sup_S() == doctest::Approx(9.0).epsilon(1e-9));
  std::filesystem::remove(path);

  CHECK_THROWS_AS(read_curve_csv("/nonexistent/curve.csv"), std::invalid_argument);
}

TEST_CASE("self-intersecting curves are rejected") {
  EmbeddedBoundaryCurve eight;
  eight.param = [](double s) {
    return std::vector<double>{std::sin(2 * pi * s), std::sin(4 * pi * s)};
  };
  CHECK_THROWS_AS(metric_from_boundary_curve(eight, 2), std::invalid_argument);
}

TEST_CASE("curvature identity for the circle") {
  const auto metric = metric_from_boundary_curve(presets::circle(2.0), 2);
  const auto c = convexity_S_bound(*metric.curve());
  CHECK(c.max_discrepancy < 1e-8);
  CHECK(std::abs(c.sup_Spp_direct) < 1e-8);
  CHECK(c.bound_satisfied);
}
