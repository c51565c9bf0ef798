// Acceptance harness: one line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cuspgeo/cli.hpp"
#include "cuspgeo/oracle.hpp"

using namespace cuspgeo;
namespace fs = std::filesystem;
using std::numbers::pi;
using Rng = std::mt19937_64;
using cd = std::complex<double>;

namespace {

constexpr unsigned long long kSeed = 12345;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Named {
  std::string name;
  CuspMetric metric;
};

double uniform(Rng& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

double log_uniform(Rng& rng, double a, double b) {
  return std::exp(uniform(rng, std::log(a), std::log(b)));
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::vector<Named> presets_at(int k) {
  std::vector<Named> out;
  out.push_back({"circle", metric_from_boundary_curve(presets::circle(1.0), k)});
  out.push_back({"offset_circle(2)", metric_from_boundary_curve(presets::offset_circle(2.0), k)});
  out.push_back({"offset_circle(1.05)", metric_from_boundary_curve(presets::offset_circle(1.05), k)});
  out.push_back({"ellipse(2,1)", metric_from_boundary_curve(presets::ellipse(2.0, 1.0), k)});
  return out;
}

const CriticalPoint& first_of(const CriticalPointSet& cps, CriticalType t) {
  for (const auto& cp : cps.points)
    if (cp.type == t) return cp;
  throw std::runtime_error("no critical point of the requested type");
}

bool spiral_at(const CuspMetric& metric) {
  const auto cps = find_critical_points(metric);
  return eigen_data(metric, first_of(cps, CriticalType::minimum)).regime == Regime::spiral;
}

/// Smallest parameter in [lo, hi] where the minimum turns spiral.
double bisect_flip(const std::function<CuspMetric(double)>& family, double lo, double hi,
                   bool& bracketed) {
  bracketed = !spiral_at(family(lo)) && spiral_at(family(hi));
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (spiral_at(family(mid)) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

Outcome c1_eigenvalues() {
  const double s7 = std::sqrt(7.0);
  const std::vector<std::pair<double, std::array<cd, 2>>> table{
      {-4.0, {cd(1, 0), cd(-4, 0)}},
      {0.0, {cd(0, 0), cd(-3, 0)}},
      {2.0, {cd(-1, 0), cd(-2, 0)}},
      {2.25, {cd(-1.5, 0), cd(-1.5, 0)}},
      {4.0, {cd(-1.5, s7 / 2), cd(-1.5, -s7 / 2)}}};
  double worst = 0.0;
  for (const auto& [a, want] : table) {
    const auto e = eigen_data(2, a);
    worst = std::max({worst, std::abs(e.lambda2 - want[0]), std::abs(e.lambda3 - want[1])});
  }
  double ak_err = 0.0;
  bool decreasing = true;
  for (int k = 2; k <= 5; ++k) {
    const double n = 2 * k - 1;
    ak_err = std::max(ak_err, std::abs(a_k(k) - n * n / (2.0 * k * (k - 1))));
    if (k > 2) decreasing = decreasing && a_k(k) < a_k(k - 1);
  }
  for (int k = 5; k <= 200; ++k) decreasing = decreasing && a_k(k) < a_k(k - 1) && a_k(k) > 2.0;
  const bool tends_to_2 = a_k(100000) - 2.0 < 1e-4;
  Outcome o;
  o.pass = worst <= 1e-12 && ak_err <= 1e-15 && decreasing && tends_to_2;
  o.detail = "max eigenvalue error " + fmt(worst) + ", a_k error " + fmt(ak_err) +
             ", decreasing to 2: " + (decreasing && tends_to_2 ? "yes" : "no");
  return o;
}

Outcome c2_offset_threshold() {
  bool bracketed = false;
  const double c_star = bisect_flip(
      [](double c) { return metric_from_boundary_curve(presets::offset_circle(c), 2); }, 1.0, 1.5,
      bracketed);
  auto verdict = [](double c) {
    const auto m = metric_from_boundary_curve(presets::offset_circle(c), 2);
    const auto atlas = build_atlas(m, 0.05, 128);
    return injectivity_report(atlas, {1e-2, 1e-3}).verdict();
  };
  const std::string v105 = verdict(1.05), v2 = verdict(2.0);
  Outcome o;
  o.pass = bracketed && std::abs(c_star - 9.0 / 8.0) <= 1e-6 && v105 == "injective" &&
           v2 == "crossings-found";
  o.detail = "flip at c = " + std::to_string(c_star) + " (|c - 9/8| = " +
             fmt(std::abs(c_star - 1.125)) + "), c=1.05 " + v105 + ", c=2 " + v2;
  return o;
}

/// Energy from the metric tensor: 1/2 (p_r^2 / g_rr + p_phi^2 / g_phiphi), p_r = xi,
/// p_phi = theta r^(2k-1).
double energy_from_tensor(const CuspMetric& metric, const Trajectory::State& y) {
  const double r = y[Trajectory::R];
  const auto g = metric_tensor(metric, r, y[Trajectory::PHI]);
  const double pphi = y[Trajectory::THETA] * std::pow(r, metric.n());
  return 0.5 * (y[Trajectory::XI] * y[Trajectory::XI] / g.g_rr + pphi * pphi / g.g_phiphi);
}

Outcome energy_check(const std::vector<Named>& metrics) {
  Rng rng(kSeed);
  double worst = 0.0;
  int runs = 0;
  for (const auto& [name, metric] : metrics) {
    for (int i = 0; i < 100; ++i) {
      const double r = log_uniform(rng, 1e-4, std::min(1e-2, 0.5 * metric.domain_radius()));
      const double phi = uniform(rng, 0.0, metric.length()), theta = uniform(rng, -3.0, 3.0);
      const PhasePoint p{r, phi, shell_xi(metric, r, phi, theta), theta};
      const auto tr = integrate(metric, p, {0.0, 20.0});
      for (std::size_t j = 0; j < tr.size(); ++j) {
        worst = std::max(worst, std::abs(energy_from_tensor(metric, tr.y[j]) - 0.5));
        if (j + 1 < tr.size())
          worst = std::max(worst, std::abs(energy_from_tensor(
                                               metric, tr.at(0.5 * (tr.t[j] + tr.t[j + 1]))) -
                                           0.5));
      }
      ++runs;
    }
  }
  return {worst <= 1e-8, std::to_string(runs) + " runs over t in [0, 20], max |E - 1/2| = " + fmt(worst)};
}

Outcome lyapunov_check(const std::vector<Named>& metrics) {
  Rng rng(kSeed);
  double rise = 0.0, rel = 0.0;
  int runs = 0, points = 0;
  for (const auto& [name, metric] : metrics) {
    const double kk1 = metric.kk1(), n = metric.n();
    auto E = [&](double phi, double theta) {
      return 0.5 * kk1 * eval_S(metric, phi)[0] + 0.5 * theta * theta / metric.C()(phi);
    };
    for (int i = 0; i < 100; ++i) {
      const BoundaryState b{uniform(rng, 0.0, metric.length()), uniform(rng, -2.0, 2.0)};
      const auto tr = integrate(metric, b, {0.0, 20.0});
      double prev = E(b.phi, b.theta);
      for (std::size_t j = 0; j < tr.size(); ++j) {
        const double phi = tr.y[j][Trajectory::PHI], theta = tr.y[j][Trajectory::THETA];
        const double e = E(phi, theta);
        rise = std::max(rise, e - prev);
        prev = e;
        // d/dt E along the field, derivatives of E taken here
        const auto f = boundary_field(metric, {phi, theta});
        const auto C = metric.C().eval<double>(phi);
        const double e_phi = 0.5 * kk1 * eval_S(metric, phi)[1] - 0.5 * theta * theta * C[1] / (C[0] * C[0]);
        const double e_theta = theta / C[0];
        const double a = e_phi * f[0], c = e_theta * f[1];
        const double want = -n * theta * theta / C[0];
        // rounding of the two products bounds what a relative comparison can resolve
        const double floor = 1e-15 * (std::abs(a) + std::abs(c));
        rel = std::max(rel, std::abs(a + c - want) / std::max({std::abs(want), floor, 1e-300}));
        ++points;
      }
      ++runs;
    }
  }
  return {rise <= 1e-10 && rel <= 1e-6,
          std::to_string(runs) + " runs, " + std::to_string(points) + " samples, max rise " +
              fmt(rise) + ", max relative dE/dt error " + fmt(rel)};
}

Outcome c5_oracle(const std::vector<Named>& metrics) {
  Rng rng(kSeed);
  double dr = 0.0, dphi = 0.0;
  int pairs = 0;
  for (const auto& [name, metric] : metrics) {
    for (int i = 0; i < 10; ++i) {
      const double r = uniform(rng, 1e-3, 1e-2), phi = uniform(rng, 0.0, metric.length());
      const double theta = uniform(rng, -0.5, 0.5) / std::pow(r, metric.k() - 1);
      const PhasePoint p{r, phi, shell_xi(metric, r, phi, theta), theta};
      IntegrateOptions io;
      io.tol = 1e-12;
      io.tau_stop = 0.05;
      const auto tr = integrate(metric, p, {0.0, 1e3}, io);
      const auto d = integrate_geodesic_direct(metric, direct_state(metric, p), {0.0, tr.tau_end()});
      for (int j = 0; j <= 400; ++j) {
        const double tau = std::min(tr.tau_end(), d.tau_end()) * j / 400;
        const auto a = tr.at_tau(tau);
        if (!a) continue;
        const auto b = d.at(tau);
        dr = std::max(dr, std::abs((*a)[Trajectory::R] - b[0]));
        dphi = std::max(dphi, std::abs((*a)[Trajectory::PHI] - b[1]));
      }
      ++pairs;
    }
  }
  return {dr < 1e-6 && dphi < 1e-6, std::to_string(pairs) + " pairs over tau in [0, 0.05], max |dr| " +
                                        fmt(dr) + ", max |dphi| " + fmt(dphi)};
}

Outcome c6_backward(const std::vector<Named>& morse) {
  Rng rng(kSeed);
  std::ostringstream os;
  bool pass = true;
  for (const auto& [name, metric] : morse) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cps = find_critical_points(metric);
    std::vector<const CriticalPoint*> maxima;
    for (const auto& cp : cps.points)
      if (cp.type == CriticalType::maximum) maxima.push_back(&cp);
    int conclusive = 0, good = 0;
    double worst_S = 0.0, worst_theta = 0.0;
    for (int i = 0; i < 50; ++i) {
      // a shell point on the geodesic with label q, at a random radius below 1e-3
      const double q = uniform(rng, 0.0, double(maxima.size()));
      const double ic = std::max(1.0, std::ceil(q));
      const double rs = log_uniform(rng, 1e-6, 1e-3);
      const auto p = shoot_to_radius(metric, *maxima[std::size_t(ic) - 1], pi * (ic - q), 1e-8, rs);
      const auto b = backward_start_check(metric, p);
      if (b.verdict == BackwardVerdict::inconclusive) continue;
      ++conclusive;
      worst_S = std::max(worst_S, b.residual_S_phi);
      worst_theta = std::max(worst_theta, b.residual_theta);
      good += b.residual_S_phi < 1e-6 && b.residual_theta < 1e-6;
    }
    const bool ok = good == conclusive && conclusive >= 45;
    pass = pass && ok;
    os << name << ": " << conclusive << "/50 conclusive, " << good << " at a critical point, max |S_phi| "
       << fmt(worst_S) << ", max |theta| " << fmt(worst_theta) << " ("
       << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) << " s); ";
  }
  std::string s = os.str();
  s.resize(s.size() - 2);
  return {pass, s};
}

Outcome c7_barrier() {
  std::ostringstream os;
  bool pass = true;
  double drift = 0.0;
  for (double c : {1.05, 1.2}) {
    const auto m = metric_from_boundary_curve(presets::offset_circle(c), 2);
    const auto cps = find_critical_points(m);
    const auto& mx = first_of(cps, CriticalType::maximum);
    const auto& mn = first_of(cps, CriticalType::minimum);
    const auto b = check_barrier(m, mx, mn, nullptr, 4096);
    const auto b2 = check_barrier(m, mx, mn, nullptr, 8192);
    for (auto [x, y] : {std::pair{b.cond_a.margin, b2.cond_a.margin}, {b.cond_b.margin, b2.cond_b.margin},
                        {b.cond_c.margin, b2.cond_c.margin},
                        {b.cond_b_strict_at_min.margin, b2.cond_b_strict_at_min.margin}})
      drift = std::max(drift, std::abs(x - y));
    if (c == 1.05)
      pass = pass && b.all_pass();
    else
      pass = pass && !b.cond_b.pass;
    os << "c=" << c << " a/b/c/min margins " << fmt(b.cond_a.margin) << '/' << fmt(b.cond_b.margin)
       << '/' << fmt(b.cond_c.margin) << '/' << fmt(b.cond_b_strict_at_min.margin) << "; ";
  }
  pass = pass && drift <= 1e-9;
  return {pass, os.str() + "grid-doubling change " + fmt(drift)};
}

Outcome c8_convexity() {
  const auto ell = metric_from_boundary_curve(presets::ellipse(2.0, 1.0), 2);
  const auto e = convexity_S_bound(*ell.curve());
  // S_phiphi = 2 - 2 kappa h (h the support function); for (a, b) its sup is 2 - 2 b^2 / a^2
  const double want = 2.0 - 2.0 * 1.0 / 4.0;
  const auto off = metric_from_boundary_curve(presets::offset_circle(2.0), 2);
  const auto o = convexity_S_bound(*off.curve());
  Outcome out;
  out.pass = e.sup_Spp_direct < 2.0 && e.sup_Spp_curvature < 2.0 && e.max_discrepancy <= 1e-6 &&
             std::abs(e.sup_Spp_direct - want) <= 1e-6 && std::abs(o.sup_Spp_direct - 4.0) <= 1e-8;
  out.detail = "ellipse sup " + std::to_string(e.sup_Spp_direct) + " (closed form 1.5), direct vs curvature " +
               fmt(e.max_discrepancy) + "; offset c=2 sup - 4 = " + fmt(o.sup_Spp_direct - 4.0);
  return out;
}

Outcome c9_spiral() {
  const auto m = metric_from_boundary_curve(presets::offset_circle(2.0), 2);
  const auto cps = find_critical_points(m);
  const auto& mx = first_of(cps, CriticalType::maximum);
  const auto h = classify_heteroclinic(m, mx, 1, 60.0);
  const double want = pi / (std::sqrt(7.0) / 2.0);

  // recount from a direct launch along the unstable eigenvector (1, lambda2) with lambda2 = 1
  const double d = 1e-7, phi0 = mx.phi0;
  const auto tr = integrate(m, BoundaryState{phi0 + d, d}, {0.0, 80.0});
  double t_half = NAN, swing = 0.0;
  std::vector<double> cross;
  for (std::size_t j = 0; j + 1 < tr.size(); ++j) {
    const double a = tr.y[j][Trajectory::PHI] - phi0, b = tr.y[j + 1][Trajectory::PHI] - phi0;
    auto root = [&](double level) {
      double lo = tr.t[j], hi = tr.t[j + 1];
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((tr.at(mid)[Trajectory::PHI] - phi0 - level) * (a - level) <= 0.0 ? hi : lo) = mid;
      }
      return 0.5 * (lo + hi);
    };
    if (std::isnan(t_half) && a < pi / 2 && b >= pi / 2) t_half = root(pi / 2);
    swing = std::max(swing, std::abs(b - pi));
    // once the swing is at rounding level the crossings carry no phase information
    if ((a - pi) * (b - pi) < 0.0 && swing > 1e-9) {
      cross.push_back(root(pi));
      swing = 0.0;
    }
  }
  int by10 = 0;
  for (double t : cross) by10 += t - t_half <= 10.0;
  const double last = cross.size() >= 2 ? cross.back() - cross[cross.size() - 2] : NAN;
  Outcome o;
  o.pass = h.crossings_by_t10 >= 3 && by10 >= 3 && std::abs(h.last_interval / want - 1) <= 0.05 &&
           std::abs(last / want - 1) <= 0.05;
  o.detail = "crossings by t=10: " + std::to_string(h.crossings_by_t10) + " (recount " +
             std::to_string(by10) + "), last interval " + std::to_string(h.last_interval) +
             " (recount " + std::to_string(last) + ") vs pi/(sqrt7/2) = " + std::to_string(want);
  return o;
}

Outcome c10_foliation() {
  const auto m = metric_from_boundary_curve(presets::circle(1.0), 2);
  const auto atlas = build_atlas(m, 0.05, 64);
  const auto inj = injectivity_report(atlas, {1e-2, 1e-3});
  const auto sur = surjectivity_report(atlas, {1e-3, 1e-2, 32, 32});
  std::size_t crossings = 0;
  for (const auto& l : inj.levels) crossings += l.crossings.size();
  double drift = 0.0;
  for (const auto& g : atlas.geodesics)
    for (const auto& y : g.traj.y) drift = std::max(drift, std::abs(y[Trajectory::PHI] - g.phi_start));
  Outcome o;
  o.pass = atlas.geodesics.size() == 64 && crossings == 0 && inj.injective && sur.fraction == 1.0 &&
           drift < 1e-8;
  o.detail = std::to_string(atlas.geodesics.size()) + " geodesics, " + std::to_string(crossings) +
             " crossings, coverage " + std::to_string(sur.fraction) + ", phi drift " + fmt(drift);
  return o;
}

Outcome c11_higher_order() {
  auto family = [](double s) {
    return make_model_metric(3, BoundaryFunction(2 * pi, 2.0, {s}, {}),
                             BoundaryFunction::constant(1.0, 2 * pi));
  };
  bool br1 = false, br2 = false;
  const double s_star = bisect_flip(family, 1.0, 3.0, br1);
  const double c_star = bisect_flip(
      [](double c) { return metric_from_boundary_curve(presets::offset_circle(c), 3); }, 1.0, 1.5, br2);
  const double a3 = 25.0 / 12.0;
  std::vector<Named> k3 = presets_at(3);
  k3.push_back({"2 + 1.5 cos", family(1.5)});
  const auto en = energy_check(k3);
  const auto ly = lyapunov_check(k3);
  auto verdict = [&](double s) {
    return injectivity_report(build_atlas(family(s), 0.05, 128), {1e-2, 1e-3}).verdict();
  };
  const std::string below = verdict(1.5), above = verdict(4.0);
  Outcome o;
  o.pass = br1 && br2 && std::abs(a_k(3) - a3) <= 1e-15 && std::abs(s_star - a3) <= 1e-6 &&
           std::abs(2 * c_star - a3) <= 1e-6 && en.pass && ly.pass && below == "injective" &&
           above == "crossings-found";
  o.detail = "a_3 flip on 2 + s cos at s = " + std::to_string(s_star) + " (|s - 25/12| = " +
             fmt(std::abs(s_star - a3)) + "), offset circle at c = " + std::to_string(c_star) +
             "; s=1.5 " + below + ", s=4 " + above + "; energy: " + en.detail + "; lyapunov: " + ly.detail;
  return o;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "run.log") continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

Outcome c12_determinism() {
  const auto base = fs::temp_directory_path() / "cuspgeo_acceptance_determinism";
  fs::remove_all(base);
  std::size_t files = 0;
  bool same = true;
  for (const char* preset : {R"({"preset": "offset_circle", "c": 1.05})", R"({"preset": "circle"})"}) {
    auto cfg = cli::parse_config(std::string(R"({"metric": )") + preset + "}");
    std::map<std::string, std::string> trees[2];
    for (int run = 0; run < 2; ++run) {
      cfg.out = base / (std::to_string(files) + "_" + std::to_string(run));
      for (auto task : {cli::Task::verify, cli::Task::analyze, cli::Task::expmap}) {
        cfg.task = task;
        std::ostringstream log;
        cli::run(cfg, log);
      }
      trees[run] = read_tree(cfg.out);
    }
    same = same && !trees[0].empty() && trees[0] == trees[1];
    files += trees[0].size();
  }
  fs::remove_all(base);
  return {same, std::to_string(files) + " report files (verify, analyze, expmap) identical byte for byte across two runs"};
}

}  // namespace

int main() {
  const auto k2 = presets_at(2);
  std::vector<Named> morse;
  for (const auto& x : k2)
    if (!x.metric.constant_S()) morse.push_back(x);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"eigenvalue formulas", c1_eigenvalues},
      {"offset-circle threshold", c2_offset_threshold},
      {"energy conservation", [&] { return energy_check(k2); }},
      {"lyapunov decay", [&] { return lyapunov_check(k2); }},
      {"oracle equivalence", [&] { return c5_oracle(k2); }},
      {"backward convergence", [&] { return c6_backward(morse); }},
      {"barrier", c7_barrier},
      {"convexity bound", c8_convexity},
      {"spiral oscillation count", c9_spiral},
      {"constant-S foliation", c10_foliation},
      {"higher-order cusps", c11_higher_order},
      {"determinism", c12_determinism},
  };
  int failed = 0, index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %-26s %s  %s  [%.1f s]\n", index, name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed ? 1 : 0;
}
