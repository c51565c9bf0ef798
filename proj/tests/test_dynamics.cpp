#include <cmath>
#include <numbers>
#include <sstream>

#include <doctest.h>

#include "cuspgeo/dynamics.hpp"
#include "cuspgeo/expmap.hpp"
#include "cuspgeo/extrapolation.hpp"

using namespace cuspgeo;
using std::numbers::pi;

namespace {

CuspMetric offset_model(int k, double c) {
  return make_model_metric(k, BoundaryFunction(2 * pi, c * c + 1, {2 * c}, {}),
                           BoundaryFunction::constant(1.0, 2 * pi));
}

// Geodesic Hamiltonian in the original coordinates (r, phi, p_r, p_phi).
double hamiltonian(const CuspMetric& metric, const std::array<double, 4>& z) {
  const auto g = metric_tensor(metric, z[0], z[1]);
  return 0.5 * (z[2] * z[2] / g.g_rr + z[3] * z[3] / g.g_phiphi);
}

}  // namespace

TEST_CASE("Dormand-Prince dense output") {
  using V = ode::Vec<double, 2>;
  auto f = [](double, const V& y) { return V{y[1], -y[0]}; };
  ode::Options<double> opt;
  opt.rtol = opt.atol = 1e-12;
  double worst = 0.0;
  const auto st = ode::integrate<double, 2>(f, 0.0, V{1.0, 0.0}, 10.0, opt,
                                            [&](const ode::DenseStep<double, 2>& s, const V&, const V&) {
                                              const double tm = s.t0 + 0.37 * s.h;
                                              worst = std::max(worst, std::abs(s(tm)[0] - std::cos(tm)));
                                              return true;
                                            });
  CHECK(st == ode::Status::reached_end);
  CHECK(worst < 1e-9);
}

TEST_CASE("extrapolation integrator in extended precision") {
  using V = ode::Vec<Quad, 2>;
  auto f = [](Quad, const V& y) { return V{y[1], -y[0]}; };
  ode::Options<Quad> opt;
  opt.rtol = Quad(1e-30);
  opt.atol = Quad(1e-32);
  opt.h_min = Quad(1e-20);
  V last{1, 0};
  const auto st = ode::integrate_extrapolated<Quad, 2>(f, Quad(0), V{1, 0}, Quad(3), opt, {},
                                                        [&](Quad, const V& y) {
                                                          last = y;
                                                          return true;
                                                        });
  CHECK(st == ode::Status::reached_end);
  CHECK(abs(last[0] - cos(Quad(3))) < Quad(1e-28));
  CHECK(abs(last[1] + sin(Quad(3))) < Quad(1e-28));
}

TEST_CASE("energy shell") {
  const auto metric = offset_model(2, 2.0);
  for (double r : {0.0, 1e-3, 0.05}) {
    const double xi = shell_xi(metric, r, 0.8, 1.5);
    CHECK(energy(metric, {r, 0.8, xi, 1.5}) == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK(shell_xi(metric, 0.0, 1.0, 7.0) == 1.0);
  CHECK_THROWS_AS(shell_xi(metric, 0.1, 0.0, 1e4), DomainError);
  CHECK_THROWS_AS(energy(metric, {1.0, 0.0, 1.0, 0.0}), DomainError);
}

TEST_CASE("rescaled field is r times the Hamiltonian field") {
  for (int k : {2, 3}) {
    const auto metric = offset_model(k, 1.3);
    const int n = metric.n();
    for (const PhasePoint p : {PhasePoint{0.05, 0.4, 0.6, 1.2}, PhasePoint{0.12, 2.9, -0.3, -0.7}}) {
      const double rn = std::pow(p.r, n);
      const std::array<double, 4> z{p.r, p.phi, p.xi, p.theta * rn};
      std::array<double, 4> dH;
      for (int i = 0; i < 4; ++i) {
        const double h = 1e-6 * std::max(1e-3, std::abs(z[i]));
        auto a = z, b = z;
        a[i] += h;
        b[i] -= h;
        dH[i] = (hamiltonian(metric, a) - hamiltonian(metric, b)) / (2 * h);
      }
      const double rdot = p.r * dH[2], phidot = p.r * dH[3];
      const double prdot = -p.r * dH[0], pphidot = -p.r * dH[1];
      const double thdot = (pphidot - n * std::pow(p.r, n - 1) * rdot * p.theta) / rn;
      const auto v = rescaled_field(metric, p);
      CHECK(v[0] == doctest::Approx(rdot).epsilon(1e-7));
      CHECK(v[1] == doctest::Approx(phidot).epsilon(1e-7));
      CHECK(v[2] == doctest::Approx(prdot).epsilon(1e-7));
      CHECK(v[3] == doctest::Approx(thdot).epsilon(1e-6));
    }
  }
}

TEST_CASE("boundary restriction") {
  const auto metric = offset_model(2, 2.0);
  const BoundaryState b{1.1, 0.4};
  const auto v = rescaled_field(metric, {0.0, b.phi, 1.0, b.theta});
  const auto w = boundary_field(metric, b);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == doctest::Approx(w[0]));
  CHECK(v[3] == doctest::Approx(w[1]));
  // phi' = theta / C, theta' = -k(k-1) S_phi / 2 - 3 theta
  CHECK(w[0] == doctest::Approx(0.4));
  CHECK(w[1] == doctest::Approx(-0.5 * 2 * (-4 * std::sin(1.1)) - 3 * 0.4));
}

TEST_CASE("damped boundary flow settles at the minimum") {
  const auto metric = offset_model(2, 2.0);
  const auto tr = integrate(metric, BoundaryState{1.0, 0.0}, {0.0, 60.0});
  CHECK(tr.kind == TrajectoryKind::boundary);
  CHECK(std::abs(tr.y.back()[Trajectory::PHI] - pi) < 1e-6);
  double prev = 1e300;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double e = boundary_energy(metric, {tr.y[i][Trajectory::PHI], tr.y[i][Trajectory::THETA]});
    CHECK(e <= prev + 1e-12);
    prev = e;
  }
}

TEST_CASE("phase trajectory queries") {
  const auto metric = offset_model(2, 1.05);
  const PhasePoint p{1e-3, 2.0, shell_xi(metric, 1e-3, 2.0, 0.2), 0.2};
  const auto tr = integrate(metric, p, {0.0, 5.0});
  CHECK(tr.max_energy_drift < 1e-9);
  const auto t = tr.t_at_r(2e-3);
  REQUIRE(t);
  CHECK(tr.at(*t)[Trajectory::R] == doctest::Approx(2e-3).epsilon(1e-10));
  const auto s = tr.at_tau(5e-4);
  REQUIRE(s);
  CHECK((*s)[Trajectory::TAU] == doctest::Approx(5e-4).epsilon(1e-10));
  CHECK_FALSE(tr.t_at_r(10.0));
}

TEST_CASE("trajectory CSV round trip") {
  const auto metric = offset_model(2, 2.0);
  const auto tr = integrate(metric, PhasePoint{0.01, 0.5, shell_xi(metric, 0.01, 0.5, 0.0), 0.0},
                            {0.0, 1.0});
  std::stringstream ss;
  write_csv(ss, metric, tr);
  CHECK(ss.str().rfind("t,tau,r,phi,xi,theta,energy\n", 0) == 0);
  const auto rows = read_trajectory_csv(ss);
  REQUIRE(rows.size() == tr.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i][0] == tr.t[i]);
    CHECK(rows[i][1] == tr.y[i][Trajectory::TAU]);
    CHECK(rows[i][2] == tr.y[i][Trajectory::R]);
    CHECK(rows[i][5] == tr.y[i][Trajectory::THETA]);
  }
}
