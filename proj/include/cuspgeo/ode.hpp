#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace cuspgeo::ode {

template <class T, std::size_t N>
using Vec = std::array<T, N>;

/// One accepted step with its continuous extension (4th order, Dormand-Prince).
template <class T, std::size_t N>
struct DenseStep {
  T t0 = 0, h = 0;
  std::array<Vec<T, N>, 5> c{};

  T t1() const { return t0 + h; }

  Vec<T, N> operator()(T t) const {
    const T s = (t - t0) / h, s1 = T(1) - s;
    Vec<T, N> y;
    for (std::size_t i = 0; i < N; ++i)
      y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
    return y;
  }

  T component(T t, std::size_t i) const {
    const T s = (t - t0) / h, s1 = T(1) - s;
    return c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
  }
};

template <class T>
struct Options {
  T rtol = T(1e-10);
  T atol = T(1e-10);
  T h_init = 0;       ///< 0: automatic
  T h_min = T(1e-14);
  T h_max = std::numeric_limits<T>::infinity();
  std::size_t max_steps = 2000000;
};

enum class Status { reached_end, stopped, step_underflow, max_steps, nonfinite };

/// Dormand-Prince 5(4) with PI step control. `obs(step, y1, dy1)` is called after every
/// accepted step and returns false to stop.
template <class T, std::size_t N, class F, class Obs>
Status integrate(F&& f, T t0, Vec<T, N> y, T t1, const Options<T>& opt, Obs&& obs) {
  using std::abs;
  using std::max;
  using std::min;
  using std::pow;
  using std::sqrt;
  static constexpr T c2 = T(1) / 5, c3 = T(3) / 10, c4 = T(4) / 5, c5 = T(8) / 9;
  static constexpr T a21 = T(1) / 5;
  static constexpr T a31 = T(3) / 40, a32 = T(9) / 40;
  static constexpr T a41 = T(44) / 45, a42 = T(-56) / 15, a43 = T(32) / 9;
  static constexpr T a51 = T(19372) / 6561, a52 = T(-25360) / 2187, a53 = T(64448) / 6561,
                     a54 = T(-212) / 729;
  static constexpr T a61 = T(9017) / 3168, a62 = T(-355) / 33, a63 = T(46732) / 5247,
                     a64 = T(49) / 176, a65 = T(-5103) / 18656;
  static constexpr T a71 = T(35) / 384, a73 = T(500) / 1113, a74 = T(125) / 192,
                     a75 = T(-2187) / 6784, a76 = T(11) / 84;
  static constexpr T e1 = T(71) / 57600, e3 = T(-71) / 16695, e4 = T(71) / 1920,
                     e5 = T(-17253) / 339200, e6 = T(22) / 525, e7 = T(-1) / 40;
  static constexpr T d1 = T(-12715105075.0L) / T(11282082432.0L),
                     d3 = T(87487479700.0L) / T(32700410799.0L),
                     d4 = T(-10690763975.0L) / T(1880347072.0L),
                     d5 = T(701980252875.0L) / T(199316789632.0L),
                     d6 = T(-1453857185.0L) / T(822651844.0L),
                     d7 = T(69997945.0L) / T(29380423.0L);

  const T dir = t1 >= t0 ? T(1) : T(-1);
  const T span = abs(t1 - t0);
  if (span == T(0)) return Status::reached_end;

  auto norm = [&](const Vec<T, N>& err, const Vec<T, N>& ya, const Vec<T, N>& yb) {
    T s = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const T sc = opt.atol + opt.rtol * max(abs(ya[i]), abs(yb[i]));
      const T q = err[i] / sc;
      s += q * q;
    }
    return sqrt(s / T(N));
  };

  Vec<T, N> k1 = f(t0, y), k2, k3, k4, k5, k6, k7, yt, y1, err;
  T t = t0;

  T h = opt.h_init;
  if (h == T(0)) {
    Vec<T, N> z{};
    const T d0 = norm(y, z, z);
    const T dd1 = norm(k1, z, z);
    T h0 = (d0 < T(1e-5) || dd1 < T(1e-5)) ? T(1e-6) : T(0.01) * (d0 / dd1);
    h0 = min(h0, span);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + dir * h0 * k1[i];
    k2 = f(t + dir * h0, yt);
    for (std::size_t i = 0; i < N; ++i) err[i] = k2[i] - k1[i];
    const T d2 = norm(err, y, y) / h0;
    const T m = max(dd1, d2);
    const T h1 = m <= T(1e-15) ? max(T(1e-6), h0 * T(1e-3)) : pow(T(0.01) / m, T(0.2));
    h = min({T(100) * h0, h1, span});
  }
  h = min(h, opt.h_max);

  const T safe = T(0.9), beta = T(0.04), expo1 = T(0.2) - beta * T(0.75);
  const T fac_min = T(0.2), fac_max = T(10);
  T facold = T(1e-4);
  bool last_rejected = false;
  std::size_t steps = 0;

  while (true) {
    const T remaining = dir * (t1 - t);
    if (remaining <= T(0)) return Status::reached_end;
    if (++steps > opt.max_steps) return Status::max_steps;
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    } else if (h > T(0.99) * remaining) {
      h = remaining;
      last = true;
    }
    if (h < opt.h_min * max(T(1), abs(t))) return Status::step_underflow;
    const T hs = dir * h;

    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * a21 * k1[i];
    k2 = f(t + c2 * hs, yt);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    k3 = f(t + c3 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = f(t + c4 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = f(t + c5 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    k6 = f(t + hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      y1[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    k7 = f(t + hs, y1);
    for (std::size_t i = 0; i < N; ++i)
      err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

    T e = norm(err, y, y1);
    bool finite = std::isfinite(static_cast<double>(e));
    for (std::size_t i = 0; i < N && finite; ++i)
      finite = std::isfinite(static_cast<double>(y1[i]));
    if (!finite) {
      h *= T(0.1);
      last_rejected = true;
      if (h < opt.h_min * max(T(1), abs(t))) return Status::nonfinite;
      continue;
    }

    const T fac11 = pow(max(e, T(1e-300)), expo1);
    if (e <= T(1)) {
      T fac = fac11 / pow(facold, beta);
      fac = min(T(1) / fac_min, max(T(1) / fac_max, fac / safe));
      T hnew = h / fac;
      if (last_rejected) hnew = min(hnew, h);
      facold = max(e, T(1e-4));

      DenseStep<T, N> ds;
      ds.t0 = t;
      ds.h = hs;
      for (std::size_t i = 0; i < N; ++i) {
        const T ydiff = y1[i] - y[i];
        const T bspl = hs * k1[i] - ydiff;
        ds.c[0][i] = y[i];
        ds.c[1][i] = ydiff;
        ds.c[2][i] = bspl;
        ds.c[3][i] = ydiff - hs * k7[i] - bspl;
        ds.c[4][i] =
            hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      t = last ? t1 : t + hs;
      y = y1;
      k1 = k7;
      last_rejected = false;
      if (!obs(static_cast<const DenseStep<T, N>&>(ds), static_cast<const Vec<T, N>&>(y),
               static_cast<const Vec<T, N>&>(k1)))
        return Status::stopped;
      if (last) return Status::reached_end;
      h = min(hnew, opt.h_max);
    } else {
      h = h / min(T(1) / fac_min, fac11 / safe);
      last_rejected = true;
    }
  }
}

}  // namespace cuspgeo::ode
