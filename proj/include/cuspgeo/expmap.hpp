#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/float128.hpp>

#include "cuspgeo/analysis.hpp"
#include "cuspgeo/dynamics.hpp"

namespace cuspgeo {

/// Direction cos(alpha) nu2_hat + sin(alpha) v1 in (r, phi, theta) coordinates, where v1 = d/dr
/// and nu2_hat is the normalized real eigenvector (0, 1, lambda2 C) of the boundary linearization.
std::array<double, 3> fan_direction(const CuspMetric& metric, const CriticalPoint& cp,
                                    double alpha);

struct ShootOptions {
  double tol = 1e-10;
  double tau_stop = std::numeric_limits<double>::infinity();
  double t_max = 200.0;
  bool richardson = true;
};

/// Geodesic (or boundary trajectory when the r-component vanishes) leaving the singular point
/// above `cp`, launched at distance eps along `direction` = (r, phi, theta) components.
/// tau starts at the launch radius. richardson_deviation compares with the launch at eps / 2
/// on the same linear orbit; `warning` is set when it exceeds 1e-4.
Trajectory shoot_unstable(const CuspMetric& metric, const CriticalPoint& cp,
                          const std::array<double, 3>& direction, double eps = 1e-6,
                          const ShootOptions& opt = {});

/// 113-bit binary floating point. Backward integration toward the boundary amplifies errors
/// transverse to the unstable manifold, so points used for backward checks are carried in it.
using Quad = boost::multiprecision::float128;
using PrecisePoint = BasicPhasePoint<Quad>;

/// Point at radius r_target on the fan geodesic with angle alpha, computed in Quad.
/// For minima alpha is ignored and the v1 geodesic is used.
PrecisePoint shoot_to_radius(const CuspMetric& metric, const CriticalPoint& cp, double alpha,
                             double eps, double r_target);

// ---------------------------------------------------------------------------

enum class HeteroclinicKind { monotone_convergence, spiral_convergence, passes_through };
std::string to_string(HeteroclinicKind k);

struct HeteroclinicReport {
  HeteroclinicKind kind = HeteroclinicKind::monotone_convergence;
  int side = 1;
  double phi_max = 0.0;
  double phi_min = 0.0;         ///< adjacent minimum, unwrapped in the direction of travel
  double t_origin = 0.0;        ///< launch time of the midpoint passage; times below are relative
  std::vector<double> crossings;  ///< times of phi = phi_min crossings
  int crossings_by_t10 = 0;
  double last_interval = std::numeric_limits<double>::quiet_NaN();
  double theta_at_min = std::numeric_limits<double>::quiet_NaN();  ///< first crossing
  double energy_first_crossing = std::numeric_limits<double>::quiet_NaN();
  double energy_next_max = std::numeric_limits<double>::quiet_NaN();
  double energy_final_minus_min = std::numeric_limits<double>::quiet_NaN();
  Trajectory trajectory;
};

/// Follows the boundary unstable trajectory of a maximum on the side +-nu2 and classifies it.
/// Time is measured from the moment the trajectory is halfway between the maximum and the
/// adjacent minimum.
HeteroclinicReport classify_heteroclinic(const CuspMetric& metric, const CriticalPoint& max_cp,
                                         int side, double t_max = 60.0);

// ---------------------------------------------------------------------------

struct AtlasGeodesic {
  double label = 0.0;
  int source = -1;  ///< index into ExpAtlas::critical, -1 for constant S
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double u = std::numeric_limits<double>::quiet_NaN();  ///< log10 tan(alpha / 2)
  double phi_start = 0.0;
  Trajectory traj;
};

struct AtlasOptions {
  double eps = 1e-6;
  double tol = 1e-10;
  double u_range = 10.0;  ///< fan sampled in u = log10 tan(alpha / 2) over [-u_range, u_range]
  int seeds = 16;
  int batch = 8;
  std::vector<double> refine_levels{1e-3, 1e-2};
  double min_du = 1e-3;
  bool richardson = true;
  int threads = 0;  ///< 0: CUSPGEO_THREADS or hardware concurrency
};

struct ExpAtlas {
  bool constant_S = false;
  double label_period = 1.0;  ///< number of maxima (1 for constant S)
  double tau0 = 0.05;
  double eps = 1e-6;
  double length = 0.0;
  std::vector<CriticalPoint> critical;
  std::vector<AtlasGeodesic> geodesics;  ///< sorted by label
  std::vector<std::string> warnings;
};

ExpAtlas build_atlas(const CuspMetric& metric, double tau0 = 0.05, int fan_size = 64,
                     const AtlasOptions& opt = {});

struct ExpValue {
  double r = 0.0, phi = 0.0;
  double label_used = 0.0;
  double gap = 0.0;  ///< |q - label_used| on the label circle
  bool exact = false;
};

ExpValue exp_eval(const ExpAtlas& atlas, double q, double tau);

struct Crossing {
  double q_a = 0.0, q_b = 0.0;
  double r = 0.0, phi = 0.0;
  double residual = 0.0;  ///< |phi_a - phi_b| at the reported point
  bool located = true;
};

struct InjectivityLevel {
  double r = 0.0;
  bool skipped = false;
  std::string note;
  int reached = 0;
  int order_violations = 0;
  int near_coincidences = 0;
  double winding = 0.0;
  double min_gap = 0.0;
  std::vector<Crossing> crossings;
};

struct InjectivityReport {
  std::vector<InjectivityLevel> levels;
  bool injective = true;
  bool order_preserved = true;
  std::optional<double> smallest_crossing_r;
  std::string verdict() const { return injective ? "injective" : "crossings-found"; }
};

/// phi-distance below which two geodesics are not resolved at a level.
inline constexpr double kCrossingTol = 1e-7;

InjectivityReport injectivity_report(const ExpAtlas& atlas, const std::vector<double>& r_levels);

struct SurjectivityGrid {
  double r_min = 1e-3, r_max = 1e-2;
  int n_r = 32, n_phi = 32;
};

struct SurjectivityReport {
  SurjectivityGrid grid;
  double fraction = 0.0;
  std::vector<std::array<int, 2>> uncovered;  ///< (i_r, i_phi)
};

SurjectivityReport surjectivity_report(const ExpAtlas& atlas, const SurjectivityGrid& grid);

enum class BackwardVerdict { converged, not_converged, inconclusive };
std::string to_string(BackwardVerdict v);

struct BackwardCheck {
  BackwardVerdict verdict = BackwardVerdict::inconclusive;
  double phi = 0.0;  ///< boundary point approached (closest approach)
  double r = 0.0;
  double residual_S_phi = 0.0, residual_theta = 0.0;
  int nearest = -1;  ///< index into find_critical_points(metric).points
  double nearest_phi0 = std::numeric_limits<double>::quiet_NaN();
  double t_end = 0.0;
  std::string note;
};

struct BackwardOptions {
  double r_exit = 0.0;  ///< 0: min(domain radius, 1e-2)
  double t_budget = 400.0;
  double r_stop = 1e-40;
  double residual_stop = 1e-10;
  double rtol = 1e-30;
  double atol = 1e-32;  ///< above the rounding floor of the field near critical points
  double h_max = 0.25;  ///< bounds how far the closest approach can fall between steps
  int columns = 10;  ///< extrapolation columns
};

BackwardCheck backward_start_check(const CuspMetric& metric, const PrecisePoint& p,
                                   const BackwardOptions& opt = {});
BackwardCheck backward_start_check(const CuspMetric& metric, const PhasePoint& p,
                                   const BackwardOptions& opt = {});

struct DiscontinuityProbe {
  double label = 0.0;
  double phi_at_label = 0.0, phi_left = 0.0, phi_right = 0.0;
  bool jump = false;
};

/// Compares gamma_q(tau) as q approaches each integer label from both sides.
std::vector<DiscontinuityProbe> discontinuity_probe(const ExpAtlas& atlas, double tau);

/// phi wrapped to (-L/2, L/2].
double wrap_centered(double x, double L);

int thread_count(int requested = 0);

}  // namespace cuspgeo
