#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cuspgeo/analysis.hpp"
#include "cuspgeo/cli.hpp"
#include "cuspgeo/oracle.hpp"

namespace cuspgeo::cli {

void SuiteResult::add(const std::string& check, bool ok, Json detail) {
  detail["check"] = check;
  detail["pass"] = ok;
  checks.push_back(std::move(detail));
  pass = pass && ok;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

double log_uniform(Rng& rng, double a, double b) {
  return std::exp(uniform(rng, std::log(a), std::log(b)));
}

// ---------------------------------------------------------------------------

SuiteResult metric_suite(const CuspMetric& metric) {
  SuiteResult s{"metric"};
  const double L = metric.length();
  double scale = 1.0, per = 0.0, fd1 = 0.0, fd2 = 0.0;
  for (int j = 0; j < 64; ++j) {
    const double phi = L * (j + 0.37) / 64;
    const auto a = eval_S(metric, phi), b = eval_S(metric, phi + L);
    for (int d = 0; d < 3; ++d) {
      per = std::max(per, std::abs(a[d] - b[d]));
      scale = std::max(scale, std::abs(a[d]));
    }
    const double h = 1e-5;
    const auto p = eval_S(metric, phi + h), m = eval_S(metric, phi - h);
    fd1 = std::max(fd1, std::abs((p[0] - m[0]) / (2 * h) - a[1]));
    fd2 = std::max(fd2, std::abs((p[1] - m[1]) / (2 * h) - a[2]));
  }
  s.add("periodicity", per <= 1e-9 * scale, {{"max_difference", per}, {"bound", 1e-9 * scale}});
  s.add("derivatives_vs_finite_differences", std::max(fd1, fd2) <= 1e-7 * scale,
        {{"S_phi", fd1}, {"S_phiphi", fd2}, {"bound", 1e-7 * scale}});
  const auto g0 = metric_tensor(metric, 0.0, 0.3);
  s.add("tensor_at_r0", g0.g_rr == 1.0 && g0.g_rphi == 0.0 && g0.g_phiphi == 0.0,
        {{"g_rr", g0.g_rr}, {"g_phiphi", g0.g_phiphi}});
  if (metric.curve()) {
    const auto c = convexity_S_bound(*metric.curve());
    s.add("arc_length_speed", c.max_speed_error <= 1e-8, {{"max_speed_error", c.max_speed_error}});
    s.add("curvature_identity", c.max_discrepancy <= 1e-6, {{"max_discrepancy", c.max_discrepancy}});
  }
  return s;
}

// ---------------------------------------------------------------------------

PhasePoint random_shell_point(const CuspMetric& metric, Rng& rng) {
  const double r_hi = std::min(1e-2, 0.5 * metric.domain_radius());
  const double r = log_uniform(rng, 1e-4, r_hi);
  const double phi = uniform(rng, 0.0, metric.length());
  const double theta = uniform(rng, -3.0, 3.0);
  return {r, phi, shell_xi(metric, r, phi, theta), theta};
}

/// Composite Simpson of r dt on the dense output (16 panels per step), against the stored tau.
double tau_recompute_error(const Trajectory& tr) {
  double tau = tr.y.front()[Trajectory::TAU], err = 0.0;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    const double t0 = tr.t[i], h = tr.t[i + 1] - t0;
    constexpr int kPanels = 16;
    double sum = tr.y[i][Trajectory::R] + tr.y[i + 1][Trajectory::R];
    for (int j = 1; j < kPanels; ++j)
      sum += (j % 2 ? 4.0 : 2.0) * tr.steps[i].component(t0 + h * j / kPanels, Trajectory::R);
    tau += sum * h / (3.0 * kPanels);
    err = std::max(err, std::abs(tau - tr.y[i + 1][Trajectory::TAU]));
  }
  return err;
}

SuiteResult dynamics_suite(const CuspMetric& metric, const RunConfig& cfg, Rng& rng) {
  SuiteResult s{"dynamics"};
  const int k = metric.k(), m = metric.m(), n = metric.n();
  IntegrateOptions io;
  io.tol = cfg.tol;

  double drift = 0.0, tau_err = 0.0;
  for (int i = 0; i < cfg.samples; ++i) {
    const PhasePoint p = random_shell_point(metric, rng);
    const auto tr = integrate(metric, p, {0.0, 20.0}, io);
    drift = std::max(drift, tr.max_energy_drift);
    tau_err = std::max(tau_err, tau_recompute_error(tr));
  }
  s.add("energy_conservation", drift <= 1e-8, {{"samples", cfg.samples}, {"max_drift", drift}});
  s.add("tau_quadrature", tau_err <= 1e-8, {{"max_error", tau_err}});

  double rise = 0.0, ldot = 0.0;
  for (int i = 0; i < cfg.samples; ++i) {
    const BoundaryState b{uniform(rng, 0.0, metric.length()), uniform(rng, -2.0, 2.0)};
    const auto tr = integrate(metric, b, {0.0, 20.0}, io);
    double prev = boundary_energy(metric, b);
    for (std::size_t j = 0; j < tr.size(); ++j) {
      const BoundaryState q{tr.y[j][Trajectory::PHI], tr.y[j][Trajectory::THETA]};
      const double e = boundary_energy(metric, q);
      rise = std::max(rise, e - prev);
      prev = e;
      // chain rule along the field against -(2k-1) C^-1 theta^2
      const auto loc = metric.local<double>(q.phi);
      const auto f = boundary_field(metric, q);
      const double e_phi = 0.5 * metric.kk1() * loc.S_p + 0.5 * loc.invC_p * q.theta * q.theta;
      const double e_theta = loc.invC * q.theta;
      const double a = e_phi * f[0], c = e_theta * f[1];
      const double want = -n * loc.invC * q.theta * q.theta;
      const double floor = 1e-15 * (std::abs(a) + std::abs(c));
      const double rel = std::abs(a + c - want) / std::max(std::abs(want), floor + 1e-300);
      if (std::abs(a + c - want) > floor) ldot = std::max(ldot, rel);
    }
  }
  s.add("lyapunov_monotone", rise <= 1e-10, {{"max_rise", rise}});
  s.add("lyapunov_derivative", ldot <= 1e-6, {{"max_relative_error", ldot}});

  {
    const auto tr = integrate(metric, PhasePoint{0.0, 0.4, 1.0, 0.7}, {0.0, 10.0}, io);
    double rmax = 0.0;
    for (const auto& y : tr.y) rmax = std::max(rmax, std::abs(y[Trajectory::R]));
    s.add("boundary_invariance", rmax == 0.0, {{"max_r", rmax}});
  }

  // V against r times the Hamiltonian field of E in canonical (r, phi, p_r, p_phi)
  double fe = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PhasePoint p{uniform(rng, 0.1, 0.5) * metric.domain_radius(),
                       uniform(rng, 0.0, metric.length()), uniform(rng, -1.0, 1.0),
                       uniform(rng, -2.0, 2.0)};
    auto dE = [&](int comp, double h) {
      PhasePoint a = p, b = p;
      double* pa[] = {&a.r, &a.phi, &a.xi, &a.theta};
      double* pb[] = {&b.r, &b.phi, &b.xi, &b.theta};
      *pa[comp] += h;
      *pb[comp] -= h;
      return (energy(metric, a) - energy(metric, b)) / (2 * h);
    };
    const double Er = dE(0, 1e-6 * p.r), Ephi = dE(1, 1e-6), Exi = dE(2, 1e-6),
                 Eth = dE(3, 1e-6 * std::max(1.0, std::abs(p.theta)));
    const double r1n = std::pow(p.r, 1 - n);
    const std::array<double, 4> want{p.r * Exi, r1n * Eth, -p.r * (Er - n * p.theta / p.r * Eth),
                                     -r1n * Ephi - n * p.theta * Exi};
    const auto v = rescaled_field(metric, p);
    double scale = 0.0, diff = 0.0;
    for (int c = 0; c < 4; ++c) {
      scale = std::max({scale, std::abs(v[c]), std::abs(want[c])});
      diff = std::max(diff, std::abs(v[c] - want[c]));
    }
    fe = std::max(fe, diff / scale);
  }
  s.add("field_energy_consistency", fe < 1e-6, {{"points", 1000}, {"max_relative_error", fe}});

  double lead = 0.0;
  const double r_lead = 1e-4;
  for (int i = 0; i < 100; ++i) {
    const double phi = uniform(rng, 0.0, metric.length()), xi = uniform(rng, 0.05, 0.95);
    const auto loc = metric.local<double>(phi);
    const double rm = std::pow(r_lead, m);
    const double D = 1.0 - metric.kk1() * rm * loc.S;
    const double theta = std::sqrt(loc.C * (1.0 - xi * xi / D) / rm);
    const auto v = rescaled_field(metric, {r_lead, phi, xi, theta});
    lead = std::max(lead, std::abs(v[2] - k * (1.0 - xi * xi)));
  }
  s.add("leading_order_xi", lead <= 1e-6,
        {{"r", r_lead}, {"max_error", lead}, {"note", "shell points; limit r -> 0"}});
  return s;
}

// ---------------------------------------------------------------------------

SuiteResult analysis_suite(const CuspMetric& metric) {
  SuiteResult s{"analysis"};
  const int k = metric.k();
  const double ak = a_k(k);
  const auto cps = find_critical_points(metric);
  if (cps.constant_S) {
    s.add("constant_S_marker", cps.points.empty(), {});
  } else {
    bool alt = cps.points.size() % 2 == 0;
    for (std::size_t i = 0; i < cps.points.size(); ++i)
      alt = alt && cps.points[i].type != cps.points[(i + 1) % cps.points.size()].type &&
            cps.points[i].type != CriticalType::degenerate;
    s.add("alternating_critical_points", alt, {{"count", cps.points.size()}});

    double id = 0.0;
    for (const auto& cp : cps.points) {
      if (cp.type == CriticalType::degenerate) continue;
      const auto e = eigen_data(metric, cp);
      const auto sum = e.lambda2 + e.lambda3, prod = e.lambda2 * e.lambda3;
      id = std::max(id, std::abs(sum + double(2 * k - 1)));
      id = std::max(id, std::abs(prod - 0.5 * metric.kk1() * e.a) / std::max(1.0, std::abs(e.a)));
    }
    s.add("eigen_identities", id <= 1e-12, {{"max_error", id}});

    // barrier hypothesis: sup a < a_k, constant C, no minimum at a_k
    double sup_a = -INFINITY;
    for (int j = 0; j < 4096; ++j) {
      const auto loc = metric.local<double>(metric.length() * j / 4096);
      sup_a = std::max(sup_a, loc.S_pp * loc.invC);
    }
    if (metric.constant_C() && cps.morse() && sup_a < ak) {
      bool all = true;
      Json margins = Json::array();
      const std::size_t np = cps.points.size();
      for (std::size_t i = 0; i < np; ++i) {
        if (cps.points[i].type != CriticalType::maximum) continue;
        for (std::size_t nb : {(i + 1) % np, (i + np - 1) % np}) {
          const auto b = check_barrier(metric, cps.points[i], cps.points[nb]);
          all = all && b.all_pass();
          margins.push_back({{"max", i}, {"min", nb}, {"cond_b_margin", b.cond_b.margin}});
        }
      }
      s.add("default_barrier", all, {{"sup_a", sup_a}, {"intervals", margins}});
    } else {
      s.add("default_barrier", true, {{"sup_a", sup_a}, {"note", "hypothesis not met; not applicable"}});
    }
  }

  const auto lo = eigen_data(k, ak - 1e-6), hi = eigen_data(k, ak + 1e-6);
  const double n = 2 * k - 1;
  const double disc = std::abs(n * n - 2.0 * k * (k - 1) * ak);
  s.add("regime_flip", lo.regime != hi.regime && disc < 1e-10,
        {{"below", to_string(lo.regime)}, {"above", to_string(hi.regime)}, {"discriminant", disc}});

  // adding ((2k-1), 1, 1) to a found relation gives another one
  bool sym = true;
  const int bound = 12;
  for (double a : {-4.0, 1.0, 2.0}) {
    const auto e = eigen_data(k, a);
    const std::array<std::complex<double>, 3> lam{e.lambda1, e.lambda2, e.lambda3};
    if (std::abs(lam[1] - lam[2]) < 1e-9 || std::abs(lam[0] - lam[1]) < 1e-9) continue;
    const auto rel = resonance_relations(lam, bound);
    for (const auto& r : rel) {
      const Resonance up{r.i, r.a1 + 2 * k - 1, r.a2 + 1, r.a3 + 1};
      if (up.a1 + up.a2 + up.a3 > bound) continue;
      sym = sym && std::find(rel.begin(), rel.end(), up) != rel.end();
    }
  }
  s.add("resonance_symmetry", sym, {{"degree_bound", bound}});
  return s;
}

// ---------------------------------------------------------------------------

/// Fan geodesics whose phi at level r lies within `width` of phi_min (mod L).
int window_count(const ExpAtlas& atlas, double phi_min, double level, double width) {
  int count = 0;
  for (const auto& g : atlas.geodesics) {
    if (std::isnan(g.alpha)) continue;
    const auto t = g.traj.t_at_r(level);
    if (!t) continue;
    const double phi = g.traj.at(*t)[Trajectory::PHI];
    if (std::abs(wrap_centered(phi - phi_min, atlas.length)) < width) ++count;
  }
  return count;
}

SuiteResult expmap_suite(const CuspMetric& metric, const RunConfig& cfg, Rng& rng,
                         std::ostream& log) {
  SuiteResult s{"expmap"};
  const auto cps = find_critical_points(metric);
  if (!cps.constant_S && !cps.morse()) {
    s.add("morse", false, {{"note", "degenerate critical point; atlas refused"}});
    return s;
  }
  AtlasOptions ao;
  ao.tol = cfg.tol;
  const auto atlas = build_atlas(metric, cfg.tau0, cfg.fan_size, ao);
  const auto atlas2 = build_atlas(metric, cfg.tau0, 2 * cfg.fan_size, ao);
  log << "verify: atlases of " << atlas.geodesics.size() << " and " << atlas2.geodesics.size()
      << " geodesics\n";

  double drift = 0.0, rich = 0.0;
  int warned = 0;
  for (const auto& g : atlas.geodesics) {
    drift = std::max(drift, g.traj.max_energy_drift);
    if (!std::isnan(g.traj.richardson_deviation)) rich = std::max(rich, g.traj.richardson_deviation);
    warned += g.traj.warning;
  }
  s.add("atlas_energy", drift <= 1e-8, {{"max_drift", drift}});
  s.add("richardson", warned == 0, {{"max_deviation", rich}, {"warned", warned}});

  double rt = 0.0;
  for (const auto& g : atlas.geodesics) {
    const auto st = g.traj.at_tau(1e-3);
    if (st) rt = std::max(rt, std::abs((*st)[Trajectory::R] / 1e-3 - 1.0));
  }
  s.add("r_over_tau", rt <= 1e-3, {{"tau", 1e-3}, {"max_error", rt}});

  const auto inj = injectivity_report(atlas, cfg.r_levels);
  const auto inj2 = injectivity_report(atlas2, cfg.r_levels);
  const auto sur = surjectivity_report(atlas, cfg.grid);
  const auto sur2 = surjectivity_report(atlas2, cfg.grid);
  s.add("fan_refinement_stability",
        inj.verdict() == inj2.verdict() && sur2.fraction >= sur.fraction - 1e-12,
        {{"verdict", inj.verdict()}, {"verdict_doubled", inj2.verdict()},
         {"coverage", sur.fraction}, {"coverage_doubled", sur2.fraction}});

  if (cps.constant_S) {
    double phi_drift = 0.0;
    for (const auto& g : atlas.geodesics)
      for (const auto& y : g.traj.y) phi_drift = std::max(phi_drift, std::abs(y[Trajectory::PHI] - g.phi_start));
    s.add("constant_S_foliation",
          inj.injective && inj.order_preserved && sur.fraction == 1.0 && phi_drift < 1e-8,
          {{"verdict", inj.verdict()}, {"coverage", sur.fraction}, {"phi_drift", phi_drift}});
  } else {
    double sup_a = -INFINITY;
    bool spiral_min = false, resonant_min = false;
    for (const auto& cp : cps.points) {
      sup_a = std::max(sup_a, cp.a);
      if (cp.type == CriticalType::minimum) {
        const auto e = eigen_data(metric, cp);
        spiral_min = spiral_min || e.regime == Regime::spiral;
        resonant_min = resonant_min || std::abs(cp.a - 2.0) < 1e-10;
      }
    }
    double sup_grid = -INFINITY;
    for (int j = 0; j < 4096; ++j) {
      const auto loc = metric.local<double>(metric.length() * j / 4096);
      sup_grid = std::max(sup_grid, loc.S_pp * loc.invC);
    }
    if (sup_grid < a_k(metric.k()) && !resonant_min) {
      s.add("order_preserved",
            inj.injective && inj.order_preserved && inj2.injective && inj2.order_preserved,
            {{"verdict", inj.verdict()}, {"order_preserved", inj.order_preserved}});
    }
    if (spiral_min) {
      int worst = 1 << 30;
      for (const auto& cp : cps.points) {
        if (cp.type != CriticalType::minimum) continue;
        if (eigen_data(metric, cp).regime != Regime::spiral) continue;
        worst = std::min(worst, window_count(atlas, cp.phi0, 1e-3, 0.1));
      }
      s.add("spiral_window", worst >= 2, {{"min_count", worst}, {"level", 1e-3}, {"width", 0.1}});
    }
  }

  // backward from points on atlas geodesics
  int same = 0, total = 0;
  Json fails = Json::array();
  for (int i = 0; cps.constant_S && i < cfg.samples; ++i) {
    const auto& g = atlas.geodesics[std::size_t(uniform(rng, 0.0, double(atlas.geodesics.size()))) %
                                    atlas.geodesics.size()];
    const double rs = log_uniform(rng, 1e-5, 1e-3);
    ++total;
    // radial geodesics have theta = 0; the check must return to the launch angle
    const auto st = g.traj.t_at_r(rs);
    if (!st) throw NumericalError("verify: radial geodesic does not reach the sample radius");
    const auto y = g.traj.at(*st);
    const auto b = backward_start_check(metric, PhasePoint{y[0], y[1], y[2], y[3]});
    if (b.verdict == BackwardVerdict::converged &&
        std::abs(wrap_centered(b.phi - g.phi_start, metric.length())) < 1e-6)
      ++same;
    else
      fails.push_back({{"label", g.label}, {"r", rs}, {"result", to_json(b)}});
  }
  if (!cps.constant_S) {
    // uniform label q: alpha = pi (i - q) on the fan of maximum number i, plus every minimum
    std::vector<std::size_t> maxima;
    for (std::size_t c = 0; c < atlas.critical.size(); ++c)
      if (atlas.critical[c].type == CriticalType::maximum) maxima.push_back(c);
    std::vector<std::pair<std::size_t, double>> picks;
    for (int i = 0; i < cfg.samples; ++i) {
      const double q = uniform(rng, 0.0, atlas.label_period);
      const double ic = std::max(1.0, std::ceil(q));
      picks.emplace_back(maxima[std::size_t(ic) - 1], std::numbers::pi * (ic - q));
    }
    for (std::size_t c = 0; c < atlas.critical.size(); ++c)
      if (atlas.critical[c].type == CriticalType::minimum) picks.emplace_back(c, 0.0);
    for (const auto& [c, alpha] : picks) {
      const auto& cp = atlas.critical[c];
      const double rs = log_uniform(rng, 1e-5, 1e-3);
      ++total;
      const auto p = shoot_to_radius(metric, cp, alpha, 1e-8, rs);
      const auto b = backward_start_check(metric, p);
      const bool ok = b.verdict == BackwardVerdict::converged &&
                      std::abs(wrap_centered(b.nearest_phi0 - cp.phi0, metric.length())) < 1e-6;
      if (ok)
        ++same;
      else
        fails.push_back({{"phi0", cp.phi0}, {"alpha", alpha}, {"r", rs}, {"result", to_json(b)}});
    }
  }
  const double frac = total ? double(same) / total : 1.0;
  s.add("backward_forward_consistency", frac >= 0.95,
        {{"samples", total}, {"same_start", same}, {"fraction", frac}, {"failures", fails}});
  return s;
}

// ---------------------------------------------------------------------------

SuiteResult oracle_suite(const CuspMetric& metric, const RunConfig& cfg, Rng& rng) {
  SuiteResult s{"oracle"};
  const double r_hi = std::min(1e-2, 0.2 * metric.domain_radius());
  double dev = 0.0, speed = 0.0, tau_gap = 0.0;
  IntegrateOptions io;
  io.tol = 1e-12;
  for (int i = 0; i < cfg.samples; ++i) {
    const double r = uniform(rng, 1e-3, r_hi), phi = uniform(rng, 0.0, metric.length());
    const double theta = uniform(rng, -0.5, 0.5) / std::pow(r, metric.k() - 1);
    const PhasePoint p{r, phi, shell_xi(metric, r, phi, theta), theta};
    io.tau_stop = 0.05;
    const auto tr = integrate(metric, p, {0.0, 1e3}, io);
    const auto direct = integrate_geodesic_direct(metric, direct_state(metric, p),
                                                  {0.0, tr.tau_end()}, {1e-12, 1e-4});
    dev = std::max(dev, compare(tr, direct));
    speed = std::max(speed, direct.max_speed_drift / std::max(1e-12, std::abs(direct.tau_end())));
    // arc length needed by the direct curve to reach the final radius of the phase curve
    const double r_end = tr.y.back()[Trajectory::R];
    double lo = 0.0, hi = direct.tau_end();
    if ((direct.at(lo)[0] - r_end) * (direct.at(hi)[0] - r_end) <= 0.0) {
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((direct.at(mid)[0] - r_end) * (direct.at(lo)[0] - r_end) <= 0.0 ? hi : lo) = mid;
      }
      tau_gap = std::max(tau_gap, std::abs(0.5 * (lo + hi) - tr.tau_end()));
    }
  }
  s.add("matched_pairs", dev < 1e-6, {{"pairs", cfg.samples}, {"max_deviation", dev}});
  s.add("unit_speed", speed < 1e-7, {{"max_drift_per_tau", speed}});
  s.add("time_change", tau_gap < 1e-7, {{"max_tau_gap", tau_gap}});
  return s;
}

}  // namespace

std::vector<SuiteResult> verify_suites(const CuspMetric& metric, const RunConfig& cfg,
                                       std::ostream& log) {
  Rng rng(cfg.seed);
  std::vector<SuiteResult> out;
  out.push_back(metric_suite(metric));
  log << "verify: metric done\n";
  out.push_back(dynamics_suite(metric, cfg, rng));
  log << "verify: dynamics done\n";
  out.push_back(analysis_suite(metric));
  log << "verify: analysis done\n";
  out.push_back(expmap_suite(metric, cfg, rng, log));
  log << "verify: expmap done\n";
  out.push_back(oracle_suite(metric, cfg, rng));
  log << "verify: oracle done\n";
  return out;
}

}  // namespace cuspgeo::cli
