#include "cuspgeo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace cuspgeo {

std::string to_string(CriticalType t) {
  switch (t) {
    case CriticalType::maximum: return "maximum";
    case CriticalType::minimum: return "minimum";
    case CriticalType::degenerate: return "degenerate";
  }
  return "unknown";
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::real_node: return "real-node";
    case Regime::critically_damped: return "critically-damped";
    case Regime::spiral: return "spiral";
  }
  return "unknown";
}

std::string to_string(Linearizability l) {
  switch (l) {
    case Linearizability::C2: return "C2";
    case Linearizability::C1: return "C1";
    case Linearizability::resonant_a_equals_2: return "resonant-a-equals-2";
    case Linearizability::not_applicable: return "not-applicable";
  }
  return "unknown";
}

bool CriticalPointSet::morse() const {
  if (constant_S || points.empty()) return false;
  for (const auto& p : points)
    if (p.type == CriticalType::degenerate) return false;
  return true;
}

std::size_t CriticalPointSet::num_maxima() const {
  return std::size_t(std::count_if(points.begin(), points.end(),
                                   [](const auto& p) { return p.type == CriticalType::maximum; }));
}

CriticalPointSet find_critical_points(const CuspMetric& metric) {
  CriticalPointSet out;
  if (metric.constant_S()) {
    out.constant_S = true;
    return out;
  }
  const auto& S = metric.S();
  const double L = metric.length();
  const int n = 4096;
  auto dS = [&](double x) { return S.eval<double>(x)[1]; };
  std::vector<double> v(n + 1);
  for (int j = 0; j <= n; ++j) v[j] = dS(L * j / n);
  v[n] = v[0];

  std::vector<double> roots;
  for (int j = 0; j < n; ++j) {
    const double a = L * j / n, b = L * (j + 1) / n;
    if (v[j] == 0.0) {
      roots.push_back(a);
      continue;
    }
    if (v[j] * v[j + 1] >= 0.0) continue;
    std::uintmax_t it = 200;
    const auto br = boost::math::tools::toms748_solve(
        dS, a, b, v[j], v[j + 1], boost::math::tools::eps_tolerance<double>(50), it);
    double x = 0.5 * (br.first + br.second);
    for (int k = 0; k < 3; ++k) {  // Newton polish
      const auto s = S.eval<double>(x);
      if (s[2] == 0.0) break;
      const double xn = x - s[1] / s[2];
      if (xn < a || xn > b) break;
      const double step = std::abs(xn - x);
      x = xn;
      if (step < 1e-12) break;
    }
    roots.push_back(x);
  }

  for (double x : roots) {
    x = std::fmod(x, L);
    if (x < 0.0) x += L;
    const auto s = S.eval<double>(x);
    const auto b = metric.local<double>(x);
    CriticalPoint cp;
    cp.phi0 = x;
    cp.S_value = s[0];
    cp.a = s[2] * b.invC;
    cp.type = std::abs(cp.a) < 1e-10   ? CriticalType::degenerate
              : cp.a < 0.0             ? CriticalType::maximum
                                       : CriticalType::minimum;
    out.points.push_back(cp);
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const auto& p, const auto& q) { return p.phi0 < q.phi0; });
  auto first_max = std::find_if(out.points.begin(), out.points.end(),
                                [](const auto& p) { return p.type == CriticalType::maximum; });
  if (first_max != out.points.end()) std::rotate(out.points.begin(), first_max, out.points.end());
  return out;
}

double a_k(int k) {
  const double n = 2.0 * k - 1.0;
  return n * n / (2.0 * k * (k - 1.0));
}

std::optional<std::array<long long, 2>> detect_rational(double x, long long max_den, double tol,
                                                        double quality) {
  if (!std::isfinite(x)) return std::nullopt;
  // convergents p_n / q_n of the continued fraction of x
  long long p0 = 1, q0 = 0, p1 = static_cast<long long>(std::floor(x)), q1 = 1;
  double rem = x - std::floor(x);
  for (int it = 0; it < 64; ++it) {
    const double err = std::abs(x - double(p1) / double(q1));
    if (err < tol && err * double(q1) * double(q1) < quality) return std::array{p1, q1};
    if (rem == 0.0) break;
    const double inv = 1.0 / rem;
    const double ai = std::floor(inv);
    rem = inv - ai;
    if (ai > 1e12) break;
    const long long a = static_cast<long long>(ai);
    const long long p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1, q0 = q1, p1 = p2, q1 = q2;
  }
  return std::nullopt;
}

EigenData eigen_data(int k, double a, double C, bool is_minimum) {
  if (k < 2) throw std::invalid_argument("eigen_data: k must be >= 2");
  EigenData e;
  const double n = 2.0 * k - 1.0, kk1 = double(k) * (k - 1);
  e.a = a;
  e.a_k = a_k(k);
  const double prod = 0.5 * kk1 * a;
  const double disc = n * n - 4.0 * prod;
  if (std::abs(a - e.a_k) < 1e-10) {
    e.regime = Regime::critically_damped;
    e.lambda2 = e.lambda3 = -0.5 * n;
  } else if (a < e.a_k) {
    e.regime = Regime::real_node;
    const double l3 = -0.5 * (n + std::sqrt(disc));
    e.lambda3 = l3;
    e.lambda2 = prod / l3;
  } else {
    e.regime = Regime::spiral;
    const double im = 0.5 * std::sqrt(-disc);
    e.lambda2 = {-0.5 * n, im};
    e.lambda3 = {-0.5 * n, -im};
  }
  e.nu2 = {1.0, e.lambda2 * C};
  e.nu3 = {1.0, e.lambda3 * C};
  if (is_minimum && e.regime == Regime::real_node) {
    if (std::abs(a - 2.0) < 1e-10) {
      e.label = Linearizability::resonant_a_equals_2;
    } else {
      e.lambda2_rational = detect_rational(e.lambda2.real());
      e.label = e.lambda2_rational ? Linearizability::C1 : Linearizability::C2;
    }
  }
  return e;
}

EigenData eigen_data(const CuspMetric& metric, const CriticalPoint& cp) {
  if (cp.type == CriticalType::degenerate || cp.constant_S_flag)
    throw PreconditionError("eigen_data: degenerate critical point");
  const double C = metric.local<double>(cp.phi0).C;
  return eigen_data(metric.k(), cp.a, C, cp.type == CriticalType::minimum);
}

std::vector<Resonance> resonance_relations(const std::array<std::complex<double>, 3>& lambda,
                                           int degree_bound, double tol) {
  if (degree_bound > 20) throw std::invalid_argument("resonance_relations: degree bound > 20");
  std::vector<Resonance> out;
  for (int i = 0; i < 3; ++i)
    for (int s = 2; s <= degree_bound; ++s)
      for (int a1 = s; a1 >= 0; --a1)
        for (int a2 = s - a1; a2 >= 0; --a2) {
          const int a3 = s - a1 - a2;
          const auto v = double(a1) * lambda[0] + double(a2) * lambda[1] +
                         double(a3) * lambda[2] - lambda[i];
          if (std::abs(v) < tol) out.push_back({i + 1, a1, a2, a3});
        }
  return out;
}

namespace {

struct OrientedS {
  const CuspMetric& metric;
  double phi_max;
  int sigma;
  // S, dS/dx, d2S/dx2, d3S/dx3 at x = sigma (phi - phi_max)
  std::array<double, 4> operator()(double x) const {
    const auto s = metric.S().eval<double>(phi_max + sigma * x);
    return {s[0], sigma * s[1], s[2], sigma * s[3]};
  }
};

// Minimum of a smooth function on [0, w] sampled on a grid (endpoint values supplied),
// refined by Brent around the best interior node.
std::array<double, 2> grid_min(const std::function<double(double)>& rho, double w, int grid,
                               double rho0, double rhow) {
  double best = rho0, xbest = 0.0;
  if (rhow < best) best = rhow, xbest = w;
  int jbest = -1;
  double ibest = std::numeric_limits<double>::infinity();
  for (int j = 1; j < grid; ++j) {
    const double v = rho(w * j / grid);
    if (v < ibest) ibest = v, jbest = j;
  }
  if (jbest > 0) {
    const double h = w / grid;
    const double lo = std::max(w * (jbest - 1) / grid, 1e-4 * w);
    const double hi = std::min(w * (jbest + 1) / grid, w * (1.0 - 1e-4));
    double xi = w * jbest / grid, vi = ibest;
    if (lo < hi) {
      const auto r = boost::math::tools::brent_find_minima(rho, lo, hi, 50);
      if (r.second < vi) xi = r.first, vi = r.second;
    }
    (void)h;
    if (vi < best) best = vi, xbest = xi;
  }
  return {xbest, best};
}

}  // namespace

BarrierReport check_barrier(const CuspMetric& metric, const CriticalPoint& from_max,
                            const CriticalPoint& to_min, const BoundaryFunction* f, int grid) {
  if (metric.constant_S()) throw PreconditionError("check_barrier: S is constant");
  if (from_max.type != CriticalType::maximum || to_min.type != CriticalType::minimum)
    throw PreconditionError("check_barrier: need a maximum and a minimum");
  if (!metric.constant_C())
    throw PreconditionError("check_barrier: requires an arc-length boundary parameter (C const)");
  const double L = metric.length();
  const double C = metric.C().mean();
  const double kk1 = metric.kk1();
  const int n = metric.n();

  // orientation: the side on which no other critical point separates the pair
  const auto cps = find_critical_points(metric).points;
  const double dplus = std::fmod(std::fmod(to_min.phi0 - from_max.phi0, L) + L, L);
  auto clear = [&](int sigma, double width) {
    for (const auto& p : cps) {
      double d = std::fmod(std::fmod(sigma * (p.phi0 - from_max.phi0), L) + L, L);
      if (d > 1e-9 * L && d < width - 1e-9 * L) return false;
    }
    return true;
  };
  BarrierReport rep;
  if (clear(1, dplus)) {
    rep.orientation = 1;
    rep.width = dplus;
  } else if (clear(-1, L - dplus)) {
    rep.orientation = -1;
    rep.width = L - dplus;
  } else {
    throw PreconditionError("check_barrier: interval contains other critical points");
  }
  rep.phi_max = from_max.phi0;
  rep.phi_min = to_min.phi0;
  rep.grid = grid;
  const double W = rep.width;
  const OrientedS St{metric, from_max.phi0, rep.orientation};

  // barrier f(x) and its first two derivatives
  std::function<std::array<double, 3>(double)> F;
  if (f) {
    rep.barrier_used = "custom";
    F = [f](double x) {
      const auto v = f->eval<double>(x);
      return std::array<double, 3>{v[0], v[1], v[2]};
    };
  } else {
    const double c = kk1 / n;
    rep.barrier_used = "default: f = -(k(k-1)/(2k-1)) dS/dx";
    F = [St, c](double x) {
      const auto s = St(x);
      return std::array<double, 3>{-c * s[1], -c * s[2], -c * s[3]};
    };
  }
  auto g = [&](double x) {
    const auto fv = F(x);
    return fv[0] * fv[1] / C + n * fv[0] + 0.5 * kk1 * St(x)[1];
  };
  auto dg = [&](double x) {
    const auto fv = F(x);
    return (fv[1] * fv[1] + fv[0] * fv[2]) / C + n * fv[1] + 0.5 * kk1 * St(x)[2];
  };

  double fscale = 1.0;
  for (int j = 0; j <= 64; ++j) fscale = std::max(fscale, std::abs(F(W * j / 64)[0]));
  const double zero_tol = 1e-10 * fscale;
  const auto f0 = F(0.0), fW = F(W);
  const bool f0_zero = std::abs(f0[0]) <= zero_tol;

  // (a) f(W) = 0 and f > 0 inside; margin of f / (x (W - x) / W)
  {
    auto rho = [&](double x) { return F(x)[0] * W / (x * (W - x)); };
    const double r0 = f0_zero ? f0[1] : std::numeric_limits<double>::infinity();
    const double rW = -fW[1];
    const auto [x, m] = grid_min(rho, W, grid, r0, rW);
    rep.cond_a.margin = std::abs(fW[0]) <= zero_tol ? m : -std::abs(fW[0]);
    rep.cond_a.pass = rep.cond_a.margin > 0.0;
    rep.worst_x_a = x;
  }
  // (c) f(0) > 0, or f(0) = 0 and f'(0) > lambda2(max)
  {
    const auto e = eigen_data(metric, from_max);
    rep.cond_c.margin = f0_zero ? f0[1] - e.lambda2.real() * C : f0[0];
    rep.cond_c.pass = rep.cond_c.margin > 0.0;
  }
  // (b) g = f f'/C + (2k-1) f + k(k-1)/2 dS/dx >= 0 inside; margin of g / (k(k-1)/2 |dS/dx|)
  {
    auto rho = [&](double x) { return g(x) / (0.5 * kk1 * std::abs(St(x)[1])); };
    const double g0 = g(0.0), gW = g(W);
    const double sxx0 = std::abs(St(0.0)[2]), sxxW = std::abs(St(W)[2]);
    const double r0 = std::abs(g0) <= zero_tol
                          ? dg(0.0) / (0.5 * kk1 * sxx0)
                          : (g0 > 0.0 ? std::numeric_limits<double>::infinity() : g0);
    const double rW = std::abs(gW) <= zero_tol ? -dg(W) / (0.5 * kk1 * sxxW)
                                               : (gW > 0.0 ? std::numeric_limits<double>::infinity()
                                                           : gW);
    const auto [x, m] = grid_min(rho, W, grid, r0, rW);
    rep.cond_b.margin = m;
    rep.cond_b.pass = m >= 0.0;
    rep.worst_x_b = x;
  }
  // strict condition at the minimum: f'^2/C + (2k-1) f' + k(k-1)/2 S_xx < 0
  {
    const double h = fW[1] * fW[1] / C + n * fW[1] + 0.5 * kk1 * St(W)[2];
    rep.cond_b_strict_at_min.margin = -h;
    rep.cond_b_strict_at_min.pass = h < 0.0;
  }
  return rep;
}

ConvexityReport convexity_S_bound(const ArcLengthCurve& arc) {
  ConvexityReport rep;
  const double L = arc.length;
  BoundaryFunction S = BoundaryFunction::constant(0.0, L);
  BoundaryFunction uK = BoundaryFunction::constant(0.0, L);
  for (const auto& u : arc.u) {
    S = S + u * u;
    uK = uK + u * u.derivative().derivative();
  }
  const BoundaryFunction Spp = S.derivative().derivative();
  const BoundaryFunction curv = (uK + BoundaryFunction::constant(1.0, L)).scaled(2.0);
  rep.sup_Spp_direct = periodic_max(Spp)[1];
  rep.sup_Spp_curvature = periodic_max(curv)[1];
  const int nres = 4096;
  for (int j = 0; j < nres; ++j) {
    const double x = L * j / nres;
    rep.max_discrepancy = std::max(rep.max_discrepancy, std::abs(Spp(x) - curv(x)));
  }
  rep.max_speed_error = arc.max_speed_error;
  rep.bound_satisfied = rep.sup_Spp_direct < 2.0;
  return rep;
}

ConvexityReport convexity_S_bound(const EmbeddedBoundaryCurve& curve) {
  return convexity_S_bound(arc_length_parametrize(curve, 1e-13));
}

}  // namespace cuspgeo
