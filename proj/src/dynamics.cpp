#include "cuspgeo/dynamics.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "cuspgeo/format.hpp"

namespace cuspgeo {

namespace {

void check_radius(const CuspMetric& metric, double r) {
  if (r < 0.0) throw DomainError("r must be nonnegative");
  if (!(r < metric.validity_radius())) throw DomainError("r outside the validity radius");
}

// Root of g on [a, b] given a sign change. The dense output reproduces the step endpoints only
// to rounding, so a target equal to a stored sample may miss the bracket by an ulp.
template <class G>
double bracket_root(G&& g, double a, double b) {
  double fa = g(a), fb = g(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) return std::abs(fa) < std::abs(fb) ? a : b;
  std::uintmax_t it = 100;
  auto res = boost::math::tools::toms748_solve(g, a, b, fa, fb,
                                               boost::math::tools::eps_tolerance<double>(52), it);
  return 0.5 * (res.first + res.second);
}

}  // namespace

std::string to_string(StopReason s) {
  switch (s) {
    case StopReason::time_limit: return "time-limit";
    case StopReason::left_domain: return "left-domain";
    case StopReason::converged_to_singular_point: return "converged-to-singular-point";
    case StopReason::step_failure: return "step-failure";
  }
  return "unknown";
}

Trajectory::State Trajectory::at(double time) const {
  if (steps.empty()) return y.front();
  const bool fwd = t.back() >= t.front();
  std::size_t i;
  if (fwd) {
    if (time <= t.front()) return y.front();
    if (time >= t.back()) return y.back();
    i = std::size_t(std::upper_bound(t.begin(), t.end(), time) - t.begin()) - 1;
  } else {
    if (time >= t.front()) return y.front();
    if (time <= t.back()) return y.back();
    i = std::size_t(std::upper_bound(t.begin(), t.end(), time, std::greater<double>()) -
                    t.begin()) - 1;
  }
  i = std::min(i, steps.size() - 1);
  return steps[i](time);
}

std::optional<double> Trajectory::t_at_tau(double tau) const {
  if (y.empty()) return std::nullopt;
  if (tau == y.front()[TAU]) return t.front();
  if (kind == TrajectoryKind::phase && !steps.empty()) {
    if (tau < y.front()[TAU] || tau > y.back()[TAU]) return std::nullopt;
    // tau is nondecreasing: first sample with tau >= target closes the bracket
    const auto it = std::lower_bound(y.begin() + 1, y.end(), tau,
                                     [](const State& s, double v) { return s[TAU] < v; });
    const std::size_t i = std::size_t(it - y.begin()) - 1;
    const auto& s = steps[i];
    return bracket_root([&](double x) { return s.component(x, TAU) - tau; }, t[i], t[i + 1]);
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double a = y[i][TAU], b = y[i + 1][TAU];
    if ((a - tau) * (b - tau) <= 0.0 && a != b) {
      const auto& s = steps[i];
      return bracket_root([&](double x) { return s.component(x, TAU) - tau; }, t[i], t[i + 1]);
    }
  }
  return std::nullopt;
}

std::optional<Trajectory::State> Trajectory::at_tau(double tau) const {
  auto tt = t_at_tau(tau);
  if (!tt) return std::nullopt;
  return at(*tt);
}

std::optional<double> Trajectory::t_at_r(double level) const {
  if (y.empty()) return std::nullopt;
  if (y.front()[R] >= level) return t.front();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (y[i + 1][R] >= level) {
      const auto& s = steps[i];
      return bracket_root([&](double x) { return s.component(x, R) - level; }, t[i], t[i + 1]);
    }
  }
  return std::nullopt;
}

double energy(const CuspMetric& metric, const PhasePoint& p) {
  check_radius(metric, p.r);
  const auto b = metric.local<double>(p.phi);
  const double kk1 = metric.kk1();
  const double rm = detail::ipow(p.r, metric.m());
  const double D = 1.0 - kk1 * rm * b.S;
  const double G = 0.5 * kk1 * b.S * p.xi * p.xi / D + 0.5 * p.theta * p.theta * b.invC;
  return 0.5 * p.xi * p.xi + rm * G;
}

double shell_xi(const CuspMetric& metric, double r, double phi, double theta) {
  check_radius(metric, r);
  const auto b = metric.local<double>(phi);
  const double rm = detail::ipow(r, metric.m());
  const double D = 1.0 - metric.kk1() * rm * b.S;
  const double q = D * (1.0 - rm * theta * theta * b.invC);
  if (q < 0.0) throw DomainError("no point of the energy shell with this (r, phi, theta)");
  return std::sqrt(q);
}

std::array<double, 4> rescaled_field(const CuspMetric& metric, const PhasePoint& p) {
  check_radius(metric, p.r);
  return rescaled_field_raw(metric, p);
}

std::array<double, 2> boundary_field(const CuspMetric& metric, const BoundaryState& s) {
  const auto b = metric.local<double>(s.phi);
  return {b.invC * s.theta, -0.5 * metric.kk1() * b.S_p - metric.n() * s.theta -
                                0.5 * b.invC_p * s.theta * s.theta};
}

double boundary_energy(const CuspMetric& metric, const BoundaryState& s) {
  const auto b = metric.local<double>(s.phi);
  return 0.5 * metric.kk1() * b.S + 0.5 * b.invC * s.theta * s.theta;
}

Trajectory integrate(const CuspMetric& metric, const PhasePoint& start,
                     std::array<double, 2> t_span, const IntegrateOptions& opt) {
  check_radius(metric, start.r);
  if (!(opt.tol > 0.0)) throw std::invalid_argument("integrate: tol must be positive");
  Trajectory tr;
  tr.kind = TrajectoryKind::phase;
  const double e0 = energy(metric, start);
  tr.t.push_back(t_span[0]);
  tr.y.push_back({start.r, start.phi, start.xi, start.theta, opt.tau_start});
  tr.max_energy_drift = std::abs(e0 - 0.5);

  using V5 = ode::Vec<double, 5>;
  auto f = [&](double, const V5& y) {
    const auto v = rescaled_field_raw<double>(metric, {y[0], y[1], y[2], y[3]});
    return V5{v[0], v[1], v[2], v[3], y[0]};
  };
  ode::Options<double> o;
  o.rtol = o.atol = opt.tol;
  int quiet = 0;
  StopReason reason = StopReason::time_limit;
  auto obs = [&](const ode::DenseStep<double, 5>& s, const V5& y, const V5& dy) {
    tr.steps.push_back(s);
    tr.t.push_back(s.t1());
    tr.y.push_back(y);
    const double e = energy(metric, {y[0], y[1], y[2], y[3]});
    tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(e - 0.5));
    if (std::abs(e - e0) > opt.energy_abort) {
      reason = StopReason::step_failure;
      return false;
    }
    if (opt.check_domain && y[0] > metric.domain_radius()) {
      reason = StopReason::left_domain;
      return false;
    }
    const double speed = std::sqrt(dy[0] * dy[0] + dy[1] * dy[1] + dy[2] * dy[2] + dy[3] * dy[3]);
    quiet = speed < opt.singular_threshold ? quiet + 1 : 0;
    if (quiet >= opt.singular_steps) {
      reason = StopReason::converged_to_singular_point;
      return false;
    }
    if (y[4] >= opt.tau_stop) {
      reason = StopReason::time_limit;
      return false;
    }
    return true;
  };
  const auto status = ode::integrate<double, 5>(f, t_span[0], tr.y.front(), t_span[1], o, obs);
  if (status == ode::Status::step_underflow || status == ode::Status::nonfinite ||
      status == ode::Status::max_steps)
    reason = StopReason::step_failure;
  tr.stop = reason;
  return tr;
}

Trajectory integrate(const CuspMetric& metric, const BoundaryState& start,
                     std::array<double, 2> t_span, const IntegrateOptions& opt) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("integrate: tol must be positive");
  Trajectory tr;
  tr.kind = TrajectoryKind::boundary;
  tr.t.push_back(t_span[0]);
  tr.y.push_back({0.0, start.phi, 1.0, start.theta, 0.0});

  using V2 = ode::Vec<double, 2>;
  auto f = [&](double, const V2& y) {
    const auto v = boundary_field(metric, {y[0], y[1]});
    return V2{v[0], v[1]};
  };
  ode::Options<double> o;
  o.rtol = o.atol = opt.tol;
  int quiet = 0;
  StopReason reason = StopReason::time_limit;
  auto obs = [&](const ode::DenseStep<double, 2>& s, const V2& y, const V2& dy) {
    ode::DenseStep<double, 5> e;
    e.t0 = s.t0;
    e.h = s.h;
    for (int j = 0; j < 5; ++j) {
      e.c[j][Trajectory::PHI] = s.c[j][0];
      e.c[j][Trajectory::THETA] = s.c[j][1];
    }
    e.c[0][Trajectory::XI] = 1.0;
    e.c[1][Trajectory::XI] = 0.0;
    tr.steps.push_back(e);
    tr.t.push_back(s.t1());
    tr.y.push_back({0.0, y[0], 1.0, y[1], 0.0});
    quiet = std::hypot(dy[0], dy[1]) < opt.singular_threshold ? quiet + 1 : 0;
    if (quiet >= opt.singular_steps) {
      reason = StopReason::converged_to_singular_point;
      return false;
    }
    return true;
  };
  V2 y0{start.phi, start.theta};
  const auto status = ode::integrate<double, 2>(f, t_span[0], y0, t_span[1], o, obs);
  if (status == ode::Status::step_underflow || status == ode::Status::nonfinite ||
      status == ode::Status::max_steps)
    reason = StopReason::step_failure;
  tr.stop = reason;
  return tr;
}

void write_csv(std::ostream& os, const CuspMetric& metric, const Trajectory& tr) {
  os << "t,tau,r,phi,xi,theta,energy\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& y = tr.y[i];
    const double e = tr.kind == TrajectoryKind::boundary
                         ? boundary_energy(metric, {y[Trajectory::PHI], y[Trajectory::THETA]})
                         : energy(metric, tr.point(i));
    os << num(tr.t[i]) << ',' << num(y[Trajectory::TAU]) << ',' << num(y[Trajectory::R]) << ','
       << num(y[Trajectory::PHI]) << ',' << num(y[Trajectory::XI]) << ','
       << num(y[Trajectory::THETA]) << ',' << num(e) << '\n';
  }
}

std::vector<std::array<double, 7>> read_trajectory_csv(std::istream& is) {
  std::vector<std::array<double, 7>> rows;
  std::string line;
  if (!std::getline(is, line)) return rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 7> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int j = 0; j < 7; ++j) {
      if (!std::getline(ss, cell, ',')) throw std::invalid_argument("trajectory CSV: short row");
      const char* b = cell.data();
      auto res = std::from_chars(b, b + cell.size(), row[j]);
      if (res.ec != std::errc()) throw std::invalid_argument("trajectory CSV: bad number");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cuspgeo
