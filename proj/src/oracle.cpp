#include "cuspgeo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cuspgeo/format.hpp"

namespace cuspgeo {

namespace {

constexpr double kStep = 1e-6;

double speed2(const CuspMetric& metric, const std::array<double, 4>& y) {
  const auto g = metric_tensor(metric, y[0], y[1]);
  return g.g_rr * y[2] * y[2] + g.g_phiphi * y[3] * y[3];
}

}  // namespace

Christoffel christoffel_fd(const CuspMetric& metric, double r, double phi) {
  const double hr = kStep * r, hp = kStep;
  if (!(r > 0.0)) throw DomainError("christoffel_fd: r must be positive");
  if (!(r + 2.0 * hr < metric.validity_radius()))
    throw DomainError("christoffel_fd: too close to the validity radius");
  const auto g = metric_tensor(metric, r, phi);
  const auto gr_p = metric_tensor(metric, r + hr, phi), gr_m = metric_tensor(metric, r - hr, phi);
  const auto gp_p = metric_tensor(metric, r, phi + hp), gp_m = metric_tensor(metric, r, phi - hp);
  // differences of g_rr - 1 avoid cancellation against the leading 1
  const double drr_r = (gr_p.g_rr_minus_one - gr_m.g_rr_minus_one) / (2.0 * hr);
  const double drr_p = (gp_p.g_rr_minus_one - gp_m.g_rr_minus_one) / (2.0 * hp);
  const double dpp_r = (gr_p.g_phiphi - gr_m.g_phiphi) / (2.0 * hr);
  const double dpp_p = (gp_p.g_phiphi - gp_m.g_phiphi) / (2.0 * hp);
  const double irr = 1.0 / g.g_rr, ipp = 1.0 / g.g_phiphi;
  Christoffel c;
  c.r_rr = 0.5 * irr * drr_r;
  c.r_rphi = 0.5 * irr * drr_p;
  c.r_phiphi = -0.5 * irr * dpp_r;
  c.phi_rr = -0.5 * ipp * drr_p;
  c.phi_rphi = 0.5 * ipp * dpp_r;
  c.phi_phiphi = 0.5 * ipp * dpp_p;
  return c;
}

std::array<double, 4> DirectCurve::at(double t) const {
  if (steps.empty()) return y.front();
  const bool fwd = tau.back() >= tau.front();
  std::size_t i;
  if (fwd) {
    if (t <= tau.front()) return y.front();
    if (t >= tau.back()) return y.back();
    i = std::size_t(std::upper_bound(tau.begin(), tau.end(), t) - tau.begin()) - 1;
  } else {
    if (t >= tau.front()) return y.front();
    if (t <= tau.back()) return y.back();
    i = std::size_t(std::upper_bound(tau.begin(), tau.end(), t, std::greater<double>()) -
                    tau.begin()) - 1;
  }
  return steps[std::min(i, steps.size() - 1)](t);
}

DirectCurve integrate_geodesic_direct(const CuspMetric& metric, const DirectGeodesicState& start,
                                      std::array<double, 2> tau_span, const DirectOptions& opt) {
  if (!(start.r >= opt.r_min)) throw PreconditionError("direct geodesic: start below r_min");
  using V4 = ode::Vec<double, 4>;
  DirectCurve out;
  const V4 y0{start.r, start.phi, start.rdot, start.phidot};
  const double s0 = speed2(metric, y0);
  if (std::abs(s0 - 1.0) > 1e-8) throw PreconditionError("direct geodesic: start not unit speed");
  out.tau.push_back(tau_span[0]);
  out.y.push_back(y0);
  auto f = [&](double, const V4& y) {
    const auto c = christoffel_fd(metric, y[0], y[1]);
    const double a = y[2], b = y[3];
    return V4{a, b, -(c.r_rr * a * a + 2.0 * c.r_rphi * a * b + c.r_phiphi * b * b),
              -(c.phi_rr * a * a + 2.0 * c.phi_rphi * a * b + c.phi_phiphi * b * b)};
  };
  auto obs = [&](const ode::DenseStep<double, 4>& s, const V4& y, const V4&) {
    if (y[0] < opt.r_min) {
      out.truncated = true;
      return false;
    }
    out.steps.push_back(s);
    out.tau.push_back(s.t1());
    out.y.push_back(y);
    out.max_speed_drift = std::max(out.max_speed_drift, std::abs(speed2(metric, y) - s0));
    return true;
  };
  ode::Options<double> o;
  o.rtol = o.atol = opt.tol;
  const auto status = ode::integrate<double, 4>(f, tau_span[0], y0, tau_span[1], o, obs);
  if (status == ode::Status::step_underflow || status == ode::Status::nonfinite)
    throw NumericalError("direct geodesic: integration failed");
  return out;
}

DirectGeodesicState direct_state(const CuspMetric& metric, const PhasePoint& p) {
  if (!(p.r > 0.0)) throw DomainError("direct_state: r must be positive");
  const auto g = metric_tensor(metric, p.r, p.phi);
  return {p.r, p.phi, p.xi / g.g_rr, p.theta / (p.r * metric.C()(p.phi))};
}

double compare(const Trajectory& traj, const DirectCurve& direct, int samples) {
  if (traj.empty() || direct.tau.empty()) throw PreconditionError("compare: empty input");
  const double a0 = traj.y.front()[Trajectory::TAU], a1 = traj.tau_end();
  const double b0 = std::min(direct.tau_begin(), direct.tau_end());
  const double b1 = std::max(direct.tau_begin(), direct.tau_end());
  const double lo = std::max(a0, b0), hi = std::min(a1, b1);
  if (!(hi > lo)) throw PreconditionError("compare: tau ranges do not overlap");
  samples = std::max(samples, 2);
  std::vector<std::array<double, 4>> rows;  // r_traj, phi_traj, r_direct, phi_direct
  double r_mean = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = lo + (hi - lo) * i / (samples - 1);
    const auto s = traj.at_tau(t);
    if (!s) continue;
    const auto d = direct.at(t);
    rows.push_back({(*s)[Trajectory::R], (*s)[Trajectory::PHI], d[0], d[1]});
    r_mean += (*s)[Trajectory::R];
  }
  if (rows.empty()) throw PreconditionError("compare: tau ranges do not overlap");
  r_mean /= double(rows.size());
  double dev = 0.0;
  for (const auto& w : rows) dev = std::max(dev, std::hypot(w[0] - w[2], (w[1] - w[3]) * r_mean));
  return dev;
}

void write_csv(std::ostream& os, const DirectCurve& curve) {
  os << "tau,r,phi,rdot,phidot\n";
  for (std::size_t i = 0; i < curve.tau.size(); ++i) {
    const auto& y = curve.y[i];
    os << num(curve.tau[i]) << ',' << num(y[0]) << ',' << num(y[1]) << ',' << num(y[2]) << ','
       << num(y[3]) << '\n';
  }
}

}  // namespace cuspgeo
