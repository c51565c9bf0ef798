#pragma once

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cuspgeo/errors.hpp"
#include "cuspgeo/fourier.hpp"

namespace cuspgeo {

/// Closed curve in R^d, either as a sample list (last sample repeats the first)
/// or as a callback periodic in s with period 1.
struct EmbeddedBoundaryCurve {
  std::vector<std::vector<double>> samples;
  std::function<std::vector<double>(double)> param;
  int dim = 2;
};

/// Arc-length reparametrization u(phi), phi in [0, L).
struct ArcLengthCurve {
  double length = 0.0;
  std::vector<BoundaryFunction> u;
  double fit_residual = 0.0;
  bool fit_converged = true;
  double max_speed_error = 0.0;  ///< max | |u_phi| - 1 | at the resample points
};

/// S, its derivatives and C at one boundary point.
template <class T>
struct BoundaryLocal {
  T S, S_p, S_pp;
  T C, C_p;
  T invC, invC_p;
};

struct MetricTensor {
  double g_rr = 1.0;
  double g_rphi = 0.0;
  double g_phiphi = 0.0;
  double g_rr_minus_one = 0.0;  ///< -k(k-1) r^{2k-2} S, kept separately to avoid cancellation
};

/// Order-k model cusp metric g = (1 - k(k-1) r^{2k-2} S) dr^2 + r^{2k} C dphi^2.
class CuspMetric {
 public:
  CuspMetric(int k, BoundaryFunction S, BoundaryFunction C);

  int k() const { return k_; }
  const BoundaryFunction& S() const { return S_; }
  const BoundaryFunction& C() const { return C_; }
  double length() const { return S_.period(); }

  double kk1() const { return double(k_) * (k_ - 1); }
  int m() const { return 2 * k_ - 2; }
  int n() const { return 2 * k_ - 1; }

  double sup_S() const { return sup_S_; }
  double inf_S() const { return inf_S_; }
  bool constant_S() const { return constant_S_; }
  bool constant_C() const { return constant_C_; }

  /// g_rr > 0 for r < validity_radius.
  double validity_radius() const { return r_valid_; }
  /// Integration domain, g_rr >= 1/2.
  double domain_radius() const { return r_domain_; }

  template <class T>
  BoundaryLocal<T> local(T phi) const;

  const std::optional<ArcLengthCurve>& curve() const { return curve_; }
  void attach_curve(ArcLengthCurve c) { curve_ = std::move(c); }

  std::vector<std::string> warnings;

 private:
  int k_;
  BoundaryFunction S_, C_;
  double sup_S_ = 0.0, inf_S_ = 0.0;
  bool constant_S_ = false, constant_C_ = false;
  double r_valid_ = std::numeric_limits<double>::infinity();
  double r_domain_ = std::numeric_limits<double>::infinity();
  std::optional<ArcLengthCurve> curve_;
};

CuspMetric make_model_metric(int k, BoundaryFunction S, BoundaryFunction C);

ArcLengthCurve arc_length_parametrize(const EmbeddedBoundaryCurve& curve, double tol = 1e-10);
CuspMetric metric_from_boundary_curve(const EmbeddedBoundaryCurve& curve, int k);

std::array<double, 3> eval_S(const CuspMetric& metric, double phi);
MetricTensor metric_tensor(const CuspMetric& metric, double r, double phi);

/// Reads a curve from CSV: one header row, one sample per row, one column per coordinate.
EmbeddedBoundaryCurve read_curve_csv(const std::string& path);

namespace presets {
EmbeddedBoundaryCurve circle(double R);
/// Unit circle centred at (c, 0); the first point is (c + 1, 0).
EmbeddedBoundaryCurve offset_circle(double c);
EmbeddedBoundaryCurve ellipse(double a, double b);
}  // namespace presets

template <class T>
BoundaryLocal<T> CuspMetric::local(T phi) const {
  const auto s = S_.eval<T>(phi);
  BoundaryLocal<T> b;
  b.S = s[0];
  b.S_p = s[1];
  b.S_pp = s[2];
  if (constant_C_) {
    b.C = T(C_.mean());
    b.C_p = 0;
  } else {
    const auto c = C_.eval<T>(phi);
    b.C = c[0];
    b.C_p = c[1];
  }
  b.invC = T(1) / b.C;
  b.invC_p = -b.C_p * b.invC * b.invC;
  return b;
}

}  // namespace cuspgeo
