#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <numbers>
#include <vector>

#include <boost/math/constants/constants.hpp>

namespace cuspgeo {

/// Real trigonometric polynomial of period L:
///   f(x) = a0 + sum_{n=1}^{N} a_n cos(n w x) + b_n sin(n w x),  w = 2 pi / L.
class BoundaryFunction {
 public:
  BoundaryFunction() = default;
  BoundaryFunction(double period, double mean, std::vector<double> cos_coef,
                   std::vector<double> sin_coef);

  static BoundaryFunction constant(double value, double period);

  /// Coefficients from M uniform samples f(j L / M), j = 0..M-1, truncated to `degree`.
  static BoundaryFunction from_samples(const std::vector<double>& values, double period,
                                       int degree);

  struct Fit;
  /// Adaptive fit of a smooth periodic callback; degree doubles from `min_degree`
  /// until the off-grid residual drops below `tol` or `max_degree` is hit.
  static Fit fit(const std::function<double(double)>& f, double period, double tol = 1e-10,
                 int min_degree = 64, int max_degree = 1024);

  double period() const { return period_; }
  int degree() const { return static_cast<int>(a_.size()); }
  double mean() const { return a0_; }
  const std::vector<double>& cos_coef() const { return a_; }
  const std::vector<double>& sin_coef() const { return b_; }

  /// Value and first three derivatives.
  template <class T>
  std::array<T, 4> eval(T x) const;

  double operator()(double x) const { return eval<double>(x)[0]; }

  /// Integral of f over [0, x].
  double integral(double x) const;

  BoundaryFunction derivative() const;
  BoundaryFunction operator*(const BoundaryFunction& other) const;
  BoundaryFunction operator+(const BoundaryFunction& other) const;
  BoundaryFunction scaled(double s) const;

  /// Drop trailing coefficient pairs below rel * (largest coefficient magnitude).
  void trim(double rel = 1e-14);

  /// Min and max over a uniform grid.
  std::array<double, 2> sampled_range(int n = 4096) const;

 private:
  double period_ = 2.0 * std::numbers::pi;
  double a0_ = 0.0;
  std::vector<double> a_;
  std::vector<double> b_;
};

struct BoundaryFunction::Fit {
  BoundaryFunction fn;
  double residual = 0.0;
  bool converged = true;
};

/// Global maximum over one period: grid scan followed by Brent refinement.
/// Returns (argmax, max).
std::array<double, 2> periodic_max(const BoundaryFunction& f, int grid = 4096);

/// Repeated evaluation of value and first derivative in type T, coefficients converted once.
/// Harmonics with both coefficients at most `drop` in magnitude are omitted; the rotation
/// then advances by the gcd of the remaining harmonic numbers.
template <class T>
class SeriesEvaluator {
 public:
  explicit SeriesEvaluator(const BoundaryFunction& f, double drop = 0.0)
      : w_(T(2) * boost::math::constants::pi<T>() / T(f.period())), a0_(f.mean()) {
    int top = 0;
    for (int n = 1; n <= f.degree(); ++n) {
      if (std::max(std::abs(f.cos_coef()[n - 1]), std::abs(f.sin_coef()[n - 1])) <= drop) continue;
      step_ = std::gcd(step_, n);
      top = n;
    }
    if (top == 0) return;
    for (int n = step_; n <= top; n += step_) {
      a_.push_back(T(f.cos_coef()[n - 1]));
      b_.push_back(T(f.sin_coef()[n - 1]));
      nw_.push_back(T(n) * w_);
    }
  }

  std::array<T, 2> operator()(T x) const {
    using std::cos;
    using std::sin;
    if (a_.empty()) return {a0_, T(0)};
    const T c1 = cos(T(step_) * w_ * x), s1 = sin(T(step_) * w_ * x);
    T c = 1, s = 0, f0 = a0_, f1 = 0;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      const T cn = c * c1 - s * s1;
      s = s * c1 + c * s1;
      c = cn;
      f0 += a_[i] * c + b_[i] * s;
      f1 += nw_[i] * (b_[i] * c - a_[i] * s);
    }
    return {f0, f1};
  }

  std::size_t terms() const { return a_.size(); }

 private:
  T w_, a0_;
  int step_ = 0;
  std::vector<T> a_, b_, nw_;
};

template <class T>
std::array<T, 4> BoundaryFunction::eval(T x) const {
  using std::cos;
  using std::sin;
  const T w = T(2) * boost::math::constants::pi<T>() / T(period_);
  const T c1 = cos(w * x), s1 = sin(w * x);
  T c = 1, s = 0;
  T f0 = a0_, f1 = 0, f2 = 0, f3 = 0;
  for (std::size_t i = 0; i < a_.size(); ++i) {
    const T cn = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = cn;
    const T nw = T(i + 1) * w;
    const T ac = T(a_[i]) * c + T(b_[i]) * s;   // f_n
    const T as = T(b_[i]) * c - T(a_[i]) * s;   // f_n' / nw
    f0 += ac;
    f1 += nw * as;
    f2 -= nw * nw * ac;
    f3 -= nw * nw * nw * as;
  }
  return {f0, f1, f2, f3};
}

}  // namespace cuspgeo
