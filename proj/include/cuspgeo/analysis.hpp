#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "cuspgeo/metric.hpp"

namespace cuspgeo {

enum class CriticalType { maximum, minimum, degenerate };
enum class Regime { real_node, critically_damped, spiral };
enum class Linearizability { C2, C1, resonant_a_equals_2, not_applicable };

std::string to_string(CriticalType t);
std::string to_string(Regime r);
std::string to_string(Linearizability l);

struct CriticalPoint {
  double phi0 = 0.0;
  CriticalType type = CriticalType::degenerate;
  double S_value = 0.0;
  double a = 0.0;  ///< S_phiphi / C at phi0
  bool constant_S_flag = false;
};

/// Critical points in cyclic order, starting at a maximum when there is one.
/// For constant S the list is empty and `constant_S` is set.
struct CriticalPointSet {
  bool constant_S = false;
  std::vector<CriticalPoint> points;

  bool morse() const;
  std::size_t num_maxima() const;
};

CriticalPointSet find_critical_points(const CuspMetric& metric);

struct EigenData {
  std::complex<double> lambda1{1.0, 0.0};
  std::complex<double> lambda2, lambda3;
  /// Eigenvectors in the (d/dphi, d/dtheta) plane.
  std::array<std::complex<double>, 2> nu2, nu3;
  Regime regime = Regime::real_node;
  double a = 0.0;
  double a_k = 0.0;
  Linearizability label = Linearizability::not_applicable;
  std::optional<std::array<long long, 2>> lambda2_rational;  ///< (p, q) when detected
};

double a_k(int k);

/// Eigen-structure of the linearized field at a critical point with Hessian ratio a.
EigenData eigen_data(int k, double a, double C = 1.0, bool is_minimum = false);
EigenData eigen_data(const CuspMetric& metric, const CriticalPoint& cp);

/// Continued-fraction rational detection: denominator <= max_den, |x - p/q| < tol
/// and |x - p/q| q^2 < quality.
std::optional<std::array<long long, 2>> detect_rational(double x, long long max_den = 1000000,
                                                        double tol = 1e-9,
                                                        double quality = 1e-6);

struct Resonance {
  int i;
  int a1, a2, a3;
  bool operator==(const Resonance&) const = default;
};

std::vector<Resonance> resonance_relations(const std::array<std::complex<double>, 3>& lambda,
                                           int degree_bound, double tol = 1e-9);

struct BarrierCondition {
  bool pass = false;
  double margin = 0.0;  ///< positive iff the condition holds
};

struct BarrierReport {
  double phi_max = 0.0, phi_min = 0.0;
  int orientation = 1;  ///< +1: the minimum is reached in the +phi direction
  double width = 0.0;
  BarrierCondition cond_a, cond_c, cond_b, cond_b_strict_at_min;
  double worst_x_a = 0.0, worst_x_b = 0.0;  ///< offsets from phi_max of the worst margins
  int grid = 0;
  std::string barrier_used;

  bool all_pass() const {
    return cond_a.pass && cond_c.pass && cond_b.pass && cond_b_strict_at_min.pass;
  }
};

/// Barrier test on the interval from a maximum to an adjacent minimum. `f` is a
/// function of the oriented offset x = sigma (phi - phi_max); the default barrier is
/// f = -(k(k-1)/(2k-1)) dS/dx.
BarrierReport check_barrier(const CuspMetric& metric, const CriticalPoint& from_max,
                            const CriticalPoint& to_min, const BoundaryFunction* f = nullptr,
                            int grid = 4096);

struct ConvexityReport {
  double sup_Spp_direct = 0.0;
  double sup_Spp_curvature = 0.0;
  double max_discrepancy = 0.0;
  double max_speed_error = 0.0;
  bool bound_satisfied = false;
};

ConvexityReport convexity_S_bound(const EmbeddedBoundaryCurve& curve);
ConvexityReport convexity_S_bound(const ArcLengthCurve& curve);

}  // namespace cuspgeo
