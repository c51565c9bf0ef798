#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cuspgeo/dynamics.hpp"

namespace cuspgeo {

/// Position and velocity with respect to arc length.
struct DirectGeodesicState {
  double r = 0.0, phi = 0.0, rdot = 0.0, phidot = 0.0;
};

struct Christoffel {
  double r_rr = 0.0, r_rphi = 0.0, r_phiphi = 0.0;
  double phi_rr = 0.0, phi_rphi = 0.0, phi_phiphi = 0.0;
};

/// Central differences of metric_tensor: step 1e-6 * r in r and 1e-6 in phi.
Christoffel christoffel_fd(const CuspMetric& metric, double r, double phi);

struct DirectCurve {
  std::vector<double> tau;
  std::vector<std::array<double, 4>> y;  ///< (r, phi, rdot, phidot)
  std::vector<ode::DenseStep<double, 4>> steps;
  bool truncated = false;  ///< stopped because r fell below r_min
  double max_speed_drift = 0.0;

  std::array<double, 4> at(double t) const;
  double tau_begin() const { return tau.front(); }
  double tau_end() const { return tau.back(); }
};

struct DirectOptions {
  double tol = 1e-12;
  double r_min = 1e-4;
};

/// Geodesic equation in (r, phi) with finite-difference Christoffel symbols. tau_span may run
/// backward.
DirectCurve integrate_geodesic_direct(const CuspMetric& metric, const DirectGeodesicState& start,
                                      std::array<double, 2> tau_span,
                                      const DirectOptions& opt = {});

/// Unit-speed velocity of the geodesic through a phase point: rdot = xi / g_rr,
/// phidot = theta / (r C).
DirectGeodesicState direct_state(const CuspMetric& metric, const PhasePoint& p);

/// Max over a common tau grid of |(dr, dphi * r_scale)|, r_scale the mean r of traj on the grid.
double compare(const Trajectory& traj, const DirectCurve& direct, int samples = 400);

/// CSV with columns tau,r,phi,rdot,phidot.
void write_csv(std::ostream& os, const DirectCurve& curve);

}  // namespace cuspgeo
