#include "cuspgeo/fourier.hpp"

#include <algorithm>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

namespace cuspgeo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

BoundaryFunction::BoundaryFunction(double period, double mean, std::vector<double> cos_coef,
                                   std::vector<double> sin_coef)
    : period_(period), a0_(mean), a_(std::move(cos_coef)), b_(std::move(sin_coef)) {
  if (!(period_ > 0.0)) throw std::invalid_argument("BoundaryFunction: period must be positive");
  if (a_.size() != b_.size()) {
    const std::size_t n = std::max(a_.size(), b_.size());
    a_.resize(n, 0.0);
    b_.resize(n, 0.0);
  }
}

BoundaryFunction BoundaryFunction::constant(double value, double period) {
  return BoundaryFunction(period, value, {}, {});
}

BoundaryFunction BoundaryFunction::from_samples(const std::vector<double>& values, double period,
                                                int degree) {
  const int m = static_cast<int>(values.size());
  if (m < 1) throw std::invalid_argument("BoundaryFunction: no samples");
  degree = std::min(degree, (m - 1) / 2);
  std::vector<double> ct(m), st(m);
  for (int j = 0; j < m; ++j) {
    ct[j] = std::cos(kTwoPi * j / m);
    st[j] = std::sin(kTwoPi * j / m);
  }
  double a0 = 0.0;
  for (double v : values) a0 += v;
  a0 /= m;
  std::vector<double> a(degree), b(degree);
  for (int n = 1; n <= degree; ++n) {
    double sa = 0.0, sb = 0.0;
    long idx = 0;
    for (int j = 0; j < m; ++j) {
      sa += values[j] * ct[idx];
      sb += values[j] * st[idx];
      idx += n;
      if (idx >= m) idx -= m;
    }
    a[n - 1] = 2.0 * sa / m;
    b[n - 1] = 2.0 * sb / m;
  }
  return BoundaryFunction(period, a0, std::move(a), std::move(b));
}

BoundaryFunction::Fit BoundaryFunction::fit(const std::function<double(double)>& f,
                                            double period, double tol, int min_degree,
                                            int max_degree) {
  Fit out;
  for (int n = min_degree;; n *= 2) {
    n = std::min(n, max_degree);
    const int m = 4 * n;
    std::vector<double> v(m);
    for (int j = 0; j < m; ++j) v[j] = f(period * j / m);
    BoundaryFunction g = from_samples(v, period, n);
    double res = 0.0, scale = 0.0;
    for (int j = 0; j < m; ++j) {
      const double x = period * (j + 0.5) / m;
      const double fx = f(x);
      res = std::max(res, std::abs(g(x) - fx));
      scale = std::max(scale, std::abs(fx));
    }
    g.trim();
    out.fn = std::move(g);
    out.residual = res;
    out.converged = res < tol * std::max(1.0, scale);
    if (out.converged || n >= max_degree) return out;
  }
}

double BoundaryFunction::integral(double x) const {
  const double w = kTwoPi / period_;
  double s = a0_ * x;
  for (std::size_t i = 0; i < a_.size(); ++i) {
    const double nw = (i + 1) * w;
    s += (a_[i] * std::sin(nw * x) - b_[i] * (std::cos(nw * x) - 1.0)) / nw;
  }
  return s;
}

BoundaryFunction BoundaryFunction::derivative() const {
  const double w = kTwoPi / period_;
  std::vector<double> a(a_.size()), b(b_.size());
  for (std::size_t i = 0; i < a_.size(); ++i) {
    const double nw = (i + 1) * w;
    a[i] = nw * b_[i];
    b[i] = -nw * a_[i];
  }
  return BoundaryFunction(period_, 0.0, std::move(a), std::move(b));
}

BoundaryFunction BoundaryFunction::operator*(const BoundaryFunction& o) const {
  if (std::abs(period_ - o.period_) > 1e-12 * period_)
    throw std::invalid_argument("BoundaryFunction: period mismatch");
  // complex form: f = sum_{n} c_n e^{i n w x}, c_n = (a_n - i b_n)/2 for n > 0
  const int n1 = degree(), n2 = o.degree(), n = n1 + n2;
  auto coeffs = [](const BoundaryFunction& f, int deg) {
    std::vector<std::array<double, 2>> c(2 * deg + 1, {0.0, 0.0});
    c[deg] = {f.a0_, 0.0};
    for (int i = 1; i <= f.degree(); ++i) {
      c[deg + i] = {0.5 * f.a_[i - 1], -0.5 * f.b_[i - 1]};
      c[deg - i] = {0.5 * f.a_[i - 1], 0.5 * f.b_[i - 1]};
    }
    return c;
  };
  const auto c1 = coeffs(*this, n1), c2 = coeffs(o, n2);
  std::vector<std::array<double, 2>> c(2 * n + 1, {0.0, 0.0});
  for (int i = -n1; i <= n1; ++i)
    for (int j = -n2; j <= n2; ++j) {
      const auto& x = c1[n1 + i];
      const auto& y = c2[n2 + j];
      auto& z = c[n + i + j];
      z[0] += x[0] * y[0] - x[1] * y[1];
      z[1] += x[0] * y[1] + x[1] * y[0];
    }
  std::vector<double> a(n), b(n);
  for (int i = 1; i <= n; ++i) {
    a[i - 1] = 2.0 * c[n + i][0];
    b[i - 1] = -2.0 * c[n + i][1];
  }
  BoundaryFunction out(period_, c[n][0], std::move(a), std::move(b));
  out.trim(0.0);
  return out;
}

BoundaryFunction BoundaryFunction::operator+(const BoundaryFunction& o) const {
  if (std::abs(period_ - o.period_) > 1e-12 * period_)
    throw std::invalid_argument("BoundaryFunction: period mismatch");
  const std::size_t n = std::max(a_.size(), o.a_.size());
  std::vector<double> a(n, 0.0), b(n, 0.0);
  for (std::size_t i = 0; i < a_.size(); ++i) a[i] += a_[i], b[i] += b_[i];
  for (std::size_t i = 0; i < o.a_.size(); ++i) a[i] += o.a_[i], b[i] += o.b_[i];
  return BoundaryFunction(period_, a0_ + o.a0_, std::move(a), std::move(b));
}

BoundaryFunction BoundaryFunction::scaled(double s) const {
  std::vector<double> a(a_), b(b_);
  for (auto& x : a) x *= s;
  for (auto& x : b) x *= s;
  return BoundaryFunction(period_, s * a0_, std::move(a), std::move(b));
}

void BoundaryFunction::trim(double rel) {
  double scale = std::abs(a0_);
  for (std::size_t i = 0; i < a_.size(); ++i)
    scale = std::max({scale, std::abs(a_[i]), std::abs(b_[i])});
  const double cut = rel * scale;
  std::size_t n = a_.size();
  while (n > 0 && std::abs(a_[n - 1]) <= cut && std::abs(b_[n - 1]) <= cut) --n;
  a_.resize(n);
  b_.resize(n);
}

std::array<double, 2> BoundaryFunction::sampled_range(int n) const {
  double lo = (*this)(0.0), hi = lo;
  for (int j = 1; j < n; ++j) {
    const double v = (*this)(period_ * j / n);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

std::array<double, 2> periodic_max(const BoundaryFunction& f, int n) {
  const double L = f.period();
  int best = 0;
  double fmax = f(0.0);
  for (int j = 1; j < n; ++j) {
    const double v = f(L * j / n);
    if (v > fmax) fmax = v, best = j;
  }
  const double h = L / n;
  const double x0 = L * best / n;
  auto neg = [&](double x) { return -f(x); };
  const auto r = boost::math::tools::brent_find_minima(neg, x0 - h, x0 + h, 52);
  if (-r.second > fmax) return {r.first, -r.second};
  return {x0, fmax};
}

}  // namespace cuspgeo
