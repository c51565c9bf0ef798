#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cuspgeo/metric.hpp"
#include "cuspgeo/ode.hpp"

namespace cuspgeo {

/// Rescaled phase point; theta = eta / r^{2k-1}.
template <class T>
struct BasicPhasePoint {
  T r = 0, phi = 0, xi = 1, theta = 0;
};
using PhasePoint = BasicPhasePoint<double>;

struct BoundaryState {
  double phi = 0.0, theta = 0.0;
};

enum class StopReason { time_limit, left_domain, converged_to_singular_point, step_failure };
enum class TrajectoryKind { phase, boundary };

std::string to_string(StopReason s);

/// Samples (t, state) of an integral curve, state = (r, phi, xi, theta, tau), plus the
/// dense output of every accepted step. Boundary trajectories carry r = 0, xi = 1, tau = 0.
struct Trajectory {
  using State = std::array<double, 5>;
  enum : std::size_t { R = 0, PHI = 1, XI = 2, THETA = 3, TAU = 4 };

  TrajectoryKind kind = TrajectoryKind::phase;
  std::vector<double> t;
  std::vector<State> y;
  std::vector<ode::DenseStep<double, 5>> steps;
  StopReason stop = StopReason::time_limit;
  std::string label;
  double max_energy_drift = 0.0;

  // shooting metadata
  bool warning = false;
  double richardson_deviation = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  double t_begin() const { return t.front(); }
  double t_end() const { return t.back(); }
  double tau_end() const { return y.back()[TAU]; }
  PhasePoint point(std::size_t i) const { return {y[i][R], y[i][PHI], y[i][XI], y[i][THETA]}; }

  /// Dense-output state at time t (clamped to the sampled range).
  State at(double time) const;
  /// Time at which tau reaches `tau` (tau is monotone along phase trajectories).
  std::optional<double> t_at_tau(double tau) const;
  std::optional<State> at_tau(double tau) const;
  /// First time r reaches `level`.
  std::optional<double> t_at_r(double level) const;
};

struct IntegrateOptions {
  double tol = 1e-10;
  double tau_start = 0.0;  ///< tau at the initial point
  double tau_stop = std::numeric_limits<double>::infinity();  ///< stop once tau passes this
  double energy_abort = 1e-6;
  bool check_domain = true;
  double singular_threshold = 1e-13;
  int singular_steps = 10;
};

double energy(const CuspMetric& metric, const PhasePoint& p);

/// xi >= 0 solving E = 1/2 at (r, phi, theta); throws DomainError if none exists.
double shell_xi(const CuspMetric& metric, double r, double phi, double theta);

/// Rescaled field without domain checks; used inside integrators.
template <class T>
std::array<T, 4> rescaled_field_raw(const CuspMetric& metric, const BasicPhasePoint<T>& p);

std::array<double, 4> rescaled_field(const CuspMetric& metric, const PhasePoint& p);
std::array<double, 2> boundary_field(const CuspMetric& metric, const BoundaryState& b);
double boundary_energy(const CuspMetric& metric, const BoundaryState& b);

Trajectory integrate(const CuspMetric& metric, const PhasePoint& start,
                     std::array<double, 2> t_span, const IntegrateOptions& opt = {});
Trajectory integrate(const CuspMetric& metric, const BoundaryState& start,
                     std::array<double, 2> t_span, const IntegrateOptions& opt = {});

/// CSV with columns t,tau,r,phi,xi,theta,energy (boundary trajectories: energy is E-boundary).
void write_csv(std::ostream& os, const CuspMetric& metric, const Trajectory& traj);
/// Parses a CSV written by write_csv back into rows of 7 numbers.
std::vector<std::array<double, 7>> read_trajectory_csv(std::istream& is);

// ---------------------------------------------------------------------------

namespace detail {
template <class T>
T ipow(T x, int e) {
  T y = 1;
  for (int i = 0; i < e; ++i) y *= x;
  return y;
}
}  // namespace detail

/// Field with the boundary data at p.phi supplied by the caller; S_pp is not used.
template <class T>
std::array<T, 4> rescaled_field_local(const CuspMetric& metric, const BoundaryLocal<T>& b,
                                      const BasicPhasePoint<T>& p) {
  const T kk1 = T(metric.kk1());
  const int m = metric.m(), n = metric.n();
  const T rm = detail::ipow(p.r, m);
  const T invD = T(1) / (T(1) - kk1 * rm * b.S);
  const T xi2 = p.xi * p.xi;
  const T G = T(0.5) * kk1 * b.S * xi2 * invD + T(0.5) * p.theta * p.theta * b.invC;
  const T G_xi = kk1 * b.S * p.xi * invD;
  const T G_th = p.theta * b.invC;
  const T rG_r = T(0.5) * kk1 * kk1 * T(m) * b.S * b.S * xi2 * rm * invD * invD;
  const T G_phi =
      T(0.5) * kk1 * xi2 * b.S_p * invD * invD + T(0.5) * p.theta * p.theta * b.invC_p;
  return {p.r * (p.xi + rm * G_xi), G_th, rm * (-T(m) * G - rG_r + T(n) * p.theta * G_th),
          -(G_phi + T(n) * p.xi * p.theta + T(n) * rm * p.theta * G_xi)};
}

template <class T>
std::array<T, 4> rescaled_field_raw(const CuspMetric& metric, const BasicPhasePoint<T>& p) {
  return rescaled_field_local(metric, metric.local<T>(p.phi), p);
}

}  // namespace cuspgeo
