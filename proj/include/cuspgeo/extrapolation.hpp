#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cuspgeo/ode.hpp"

namespace cuspgeo::ode {

struct ExtrapolationOptions {
  int columns = 10;  ///< modified-midpoint sequence 2, 4, ..., 2 * columns; order 2 * columns
  std::size_t max_steps = 200000;
};

/// One Gragg-Bulirsch-Stoer step of signed length h from (t, y) with `columns` rows of the
/// extrapolation table. Returns the extrapolated value and the difference to the next-lower
/// column (the error estimate).
template <class T, std::size_t N, class F>
std::array<Vec<T, N>, 2> extrapolation_step(F&& f, T t, const Vec<T, N>& y, const Vec<T, N>& f0,
                                           T h, int columns) {
  const int K = std::max(2, columns);
  std::vector<Vec<T, N>> tab(static_cast<std::size_t>(K));
  for (int j = 1; j <= K; ++j) {
    const int n = 2 * j;
    const T hs = h / T(n);
    Vec<T, N> zp = y, z;
    for (std::size_t i = 0; i < N; ++i) z[i] = y[i] + hs * f0[i];
    for (int m = 1; m < n; ++m) {
      const Vec<T, N> fz = f(t + T(m) * hs, z);
      for (std::size_t i = 0; i < N; ++i) {
        const T zn = zp[i] + T(2) * hs * fz[i];
        zp[i] = z[i];
        z[i] = zn;
      }
    }
    const Vec<T, N> fe = f(t + h, z);
    Vec<T, N> cur;
    for (std::size_t i = 0; i < N; ++i) cur[i] = T(0.5) * (z[i] + zp[i] + hs * fe[i]);
    // Aitken-Neville in h^2; tab[l] holds column l of the previous row
    for (int l = 1; l < j; ++l) {
      const T ratio = T(n) / T(2 * (j - l));
      const T den = ratio * ratio - T(1);
      Vec<T, N> next;
      for (std::size_t i = 0; i < N; ++i) next[i] = cur[i] + (cur[i] - tab[l - 1][i]) / den;
      tab[l - 1] = cur;
      cur = next;
    }
    tab[j - 1] = cur;
  }
  Vec<T, N> e;
  for (std::size_t i = 0; i < N; ++i) e[i] = tab[K - 1][i] - tab[K - 2][i];
  return {tab[K - 1], e};
}

/// Adaptive extrapolation at a fixed number of columns, meant for very tight tolerances in
/// extended precision. `obs(t, y)` is called after every accepted step and returns false to
/// stop. No dense output: use extrapolation_step from the last accepted state for events.
template <class T, std::size_t N, class F, class Obs>
Status integrate_extrapolated(F&& f, T t0, Vec<T, N> y, T t1, const Options<T>& opt,
                              const ExtrapolationOptions& xopt, Obs&& obs) {
  using std::abs;
  using std::max;
  using std::min;
  using std::pow;
  using std::sqrt;
  const int K = std::max(2, xopt.columns);
  const T dir = t1 >= t0 ? T(1) : T(-1);
  if (t1 == t0) return Status::reached_end;

  auto norm = [&](const Vec<T, N>& e, const Vec<T, N>& ya, const Vec<T, N>& yb) {
    T s = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const T q = e[i] / (opt.atol + opt.rtol * max(abs(ya[i]), abs(yb[i])));
      s += q * q;
    }
    return sqrt(s / T(N));
  };

  T h = opt.h_init > T(0) ? opt.h_init : min(T(0.05), opt.h_max);
  T t = t0;
  std::size_t steps = 0;
  const T expo = T(1) / T(2 * K - 1);

  while (true) {
    const T remaining = dir * (t1 - t);
    if (remaining <= T(0)) return Status::reached_end;
    if (++steps > xopt.max_steps) return Status::max_steps;
    h = min({h, remaining, opt.h_max});
    if (h < opt.h_min) return Status::step_underflow;

    const Vec<T, N> f0 = f(t, y);
    const auto [y1, e] = extrapolation_step<T, N>(f, t, y, f0, dir * h, K);
    bool finite = true;
    for (std::size_t i = 0; i < N; ++i)
      if (!(abs(y1[i]) < std::numeric_limits<T>::infinity())) finite = false;
    const T err = finite ? norm(e, y, y1) : std::numeric_limits<T>::infinity();
    if (!(err <= T(1))) {
      h *= finite ? max(T(0.2), T(0.9) * pow(err, -expo)) : T(0.25);
      continue;
    }
    t += dir * h;
    y = y1;
    if (!obs(t, y)) return Status::stopped;
    const T fac = err == T(0) ? T(4) : min(T(4), T(0.9) * pow(err, -expo));
    h *= max(T(0.2), fac);
  }
}

}  // namespace cuspgeo::ode
