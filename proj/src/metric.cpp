#include "cuspgeo/metric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>


namespace cuspgeo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool segments_cross(const std::array<double, 2>& a, const std::array<double, 2>& b,
                    const std::array<double, 2>& c, const std::array<double, 2>& d) {
  auto orient = [](const auto& p, const auto& q, const auto& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 * o2 < 0.0 && o3 * o4 < 0.0;
}

}  // namespace

CuspMetric::CuspMetric(int k, BoundaryFunction S, BoundaryFunction C)
    : k_(k), S_(std::move(S)), C_(std::move(C)) {
  if (k_ < 2) throw std::invalid_argument("cusp order k must be >= 2");
  if (std::abs(S_.period() - C_.period()) > 1e-12 * S_.period())
    throw std::invalid_argument("S and C must share the boundary period");
  const auto [cmin, cmax] = C_.sampled_range();
  if (!(cmin > 0.0)) throw std::invalid_argument("C must be positive on the boundary");
  constant_C_ = C_.degree() == 0 || (cmax - cmin) < 1e-14 * cmax;

  const auto [smin, smax] = S_.sampled_range();
  const double mean = S_.mean();
  constant_S_ = (smax - smin) < 1e-12 * (1.0 + std::abs(mean));
  sup_S_ = constant_S_ ? smax : periodic_max(S_)[1];
  inf_S_ = constant_S_ ? smin : -periodic_max(S_.scaled(-1.0))[1];
  if (sup_S_ > 0.0) {
    const double em = 1.0 / m();
    r_valid_ = std::pow(1.0 / (kk1() * sup_S_), em);
    r_domain_ = std::pow(0.5 / (kk1() * sup_S_), em);
  }
}

CuspMetric make_model_metric(int k, BoundaryFunction S, BoundaryFunction C) {
  return CuspMetric(k, std::move(S), std::move(C));
}

std::array<double, 3> eval_S(const CuspMetric& metric, double phi) {
  const auto s = metric.S().eval<double>(phi);
  return {s[0], s[1], s[2]};
}

MetricTensor metric_tensor(const CuspMetric& metric, double r, double phi) {
  if (r < 0.0) throw DomainError("metric_tensor: r must be nonnegative");
  const double S = metric.S()(phi);
  const double rm = std::pow(r, metric.m());
  MetricTensor g;
  g.g_rr_minus_one = -metric.kk1() * rm * S;
  g.g_rr = 1.0 + g.g_rr_minus_one;
  if (!(g.g_rr > 0.0)) throw DomainError("metric_tensor: r outside the validity radius");
  g.g_phiphi = rm * r * r * metric.C()(phi);
  return g;
}

ArcLengthCurve arc_length_parametrize(const EmbeddedBoundaryCurve& curve, double tol) {
  const int d = curve.param ? curve.dim
                            : (curve.samples.empty() ? 0 : int(curve.samples.front().size()));
  if (d < 2) throw std::invalid_argument("boundary curve: ambient dimension must be >= 2");

  ArcLengthCurve out;
  std::vector<BoundaryFunction> us;  // coordinates in the sample parameter s, period 1
  if (curve.param) {
    for (int i = 0; i < d; ++i) {
      auto fi = BoundaryFunction::fit([&](double s) { return curve.param(s)[i]; }, 1.0,
                                      tol);
      out.fit_residual = std::max(out.fit_residual, fi.residual);
      out.fit_converged = out.fit_converged && fi.converged;
      us.push_back(std::move(fi.fn));
    }
  } else {
    const auto& p = curve.samples;
    if (p.size() < 65) throw std::invalid_argument("boundary curve: need at least 64 samples");
    double scale = 0.0, gap = 0.0;
    for (const auto& q : p) {
      if (int(q.size()) != d) throw std::invalid_argument("boundary curve: ragged samples");
      for (double x : q) scale = std::max(scale, std::abs(x));
    }
    for (int i = 0; i < d; ++i) gap = std::max(gap, std::abs(p.front()[i] - p.back()[i]));
    if (gap > 1e-9 * (1.0 + scale))
      throw std::invalid_argument("boundary curve is open (first and last samples differ)");
    const int m = int(p.size()) - 1;
    for (int i = 0; i < d; ++i) {
      std::vector<double> v(m);
      for (int j = 0; j < m; ++j) v[j] = p[j][i];
      auto fi = BoundaryFunction::from_samples(v, 1.0, (m - 1) / 2);
      for (int j = 0; j < m; ++j)
        out.fit_residual = std::max(out.fit_residual, std::abs(fi(double(j) / m) - v[j]));
      us.push_back(std::move(fi));
    }
    out.fit_converged = out.fit_residual < tol * (1.0 + scale);
  }

  std::vector<BoundaryFunction> dus;
  for (const auto& u : us) dus.push_back(u.derivative());
  auto speed_s = [&](double s) {
    double q = 0.0;
    for (const auto& du : dus) q += du(s) * du(s);
    return std::sqrt(q);
  };
  const auto speed = BoundaryFunction::fit(speed_s, 1.0, tol);
  const double L = speed.fn.mean();
  if (!(L > 1e-12)) throw std::invalid_argument("boundary curve is degenerate (zero length)");
  out.length = L;

  // s(phi): invert the arc length l(s) = int_0^s |u'|
  auto s_of = [&](double phi) {
    double s = phi / L;
    for (int it = 0; it < 50; ++it) {
      const double ds = (speed.fn.integral(s) - phi) / speed_s(s);
      s -= ds;
      if (std::abs(ds) < 1e-16) break;
    }
    return s;
  };
  for (int i = 0; i < d; ++i) {
    auto fi = BoundaryFunction::fit([&](double phi) { return us[i](s_of(phi)); }, L, tol);
    out.fit_residual = std::max(out.fit_residual, fi.residual);
    out.fit_converged = out.fit_converged && fi.converged;
    out.u.push_back(std::move(fi.fn));
  }

  const int nres = 4096;
  for (int j = 0; j < nres; ++j) {
    const double phi = L * j / nres;
    double q = 0.0;
    for (const auto& u : out.u) q += std::pow(u.eval<double>(phi)[1], 2);
    out.max_speed_error = std::max(out.max_speed_error, std::abs(std::sqrt(q) - 1.0));
  }

  if (d == 2) {
    const int n = 512;
    std::vector<std::array<double, 2>> pts(n);
    for (int j = 0; j < n; ++j) pts[j] = {out.u[0](L * j / n), out.u[1](L * j / n)};
    for (int a = 0; a < n; ++a)
      for (int b = a + 2; b < n; ++b) {
        if (a == 0 && b == n - 1) continue;
        if (segments_cross(pts[a], pts[(a + 1) % n], pts[b], pts[(b + 1) % n]))
          throw std::invalid_argument("boundary curve is not simple");
      }
  }
  return out;
}

CuspMetric metric_from_boundary_curve(const EmbeddedBoundaryCurve& curve, int k) {
  // internal fits run well below the reported tolerance so that S_phiphi stays accurate
  const double tol = 1e-10, fit_tol = 1e-13;
  ArcLengthCurve arc = arc_length_parametrize(curve, fit_tol);
  const double L = arc.length;
  auto sq = [&](double phi) {
    double q = 0.0;
    for (const auto& u : arc.u) q += u(phi) * u(phi);
    return q;
  };
  auto S = BoundaryFunction::fit(sq, L, fit_tol);
  CuspMetric metric(k, S.fn, BoundaryFunction::constant(1.0, L));
  if (std::max(arc.fit_residual, S.residual) > tol) {
    std::ostringstream os;
    os << "Fourier fit residual " << std::max(arc.fit_residual, S.residual)
       << " above tolerance " << tol;
    metric.warnings.push_back(os.str());
  }
  metric.attach_curve(std::move(arc));
  return metric;
}

EmbeddedBoundaryCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open curve file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("curve file is empty: " + path);
  EmbeddedBoundaryCurve c;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> p;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        p.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ": non-numeric value on row " + std::to_string(row));
      }
    }
    c.samples.push_back(std::move(p));
  }
  if (!c.samples.empty()) c.dim = int(c.samples.front().size());
  return c;
}

namespace presets {

EmbeddedBoundaryCurve circle(double R) {
  if (!(R > 0.0)) throw std::invalid_argument("circle: R must be positive");
  EmbeddedBoundaryCurve c;
  c.param = [R](double s) {
    return std::vector<double>{R * std::cos(kTwoPi * s), R * std::sin(kTwoPi * s)};
  };
  return c;
}

EmbeddedBoundaryCurve offset_circle(double cx) {
  EmbeddedBoundaryCurve c;
  c.param = [cx](double s) {
    return std::vector<double>{cx + std::cos(kTwoPi * s), std::sin(kTwoPi * s)};
  };
  return c;
}

EmbeddedBoundaryCurve ellipse(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("ellipse: semi-axes must be positive");
  EmbeddedBoundaryCurve c;
  c.param = [a, b](double s) {
    return std::vector<double>{a * std::cos(kTwoPi * s), b * std::sin(kTwoPi * s)};
  };
  return c;
}

}  // namespace presets

}  // namespace cuspgeo
