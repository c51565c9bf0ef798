#include "cuspgeo/expmap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include <boost/math/tools/toms748_solve.hpp>

#include "cuspgeo/extrapolation.hpp"

namespace cuspgeo {

namespace {

constexpr double kPi = std::numbers::pi;

template <class G>
double find_root(G&& g, double a, double b, double fa, double fb) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  std::uintmax_t it = 100;
  const auto res = boost::math::tools::toms748_solve(
      g, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), it);
  return 0.5 * (res.first + res.second);
}

struct Frame {
  double lambda2 = 0.0;
  double C = 1.0;
  double norm = 1.0;  // |(1, lambda2 C)|
};

Frame max_frame(const CuspMetric& metric, const CriticalPoint& cp) {
  if (cp.type != CriticalType::maximum)
    throw PreconditionError("fan directions exist only at maxima");
  const auto e = eigen_data(metric, cp);
  Frame f;
  f.lambda2 = e.lambda2.real();
  f.C = metric.local<double>(cp.phi0).C;
  f.norm = std::hypot(1.0, f.lambda2 * f.C);
  return f;
}

// alpha = 2 atan(10^u); cos and sin from x = 10^u stay accurate near 0 and pi.
std::array<double, 3> direction_from_u(const Frame& f, double u) {
  const double x = std::pow(10.0, u), q = 1.0 + x * x;
  const double s = 2.0 * x / q, c = (1.0 - x * x) / q;
  return {s, c / f.norm, c * f.lambda2 * f.C / f.norm};
}

double alpha_from_u(double u) { return 2.0 * std::atan(std::pow(10.0, u)); }

template <class F>
void run_parallel(std::size_t n, F&& fn) {
  const std::size_t nt = std::min<std::size_t>(std::size_t(thread_count()), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (std::size_t w = 0; w < nt; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

std::optional<double> phi_at_r(const Trajectory& tr, double level) {
  if (tr.empty() || tr.y.front()[Trajectory::R] > level) return std::nullopt;
  const auto t = tr.t_at_r(level);
  if (!t) return std::nullopt;
  return tr.at(*t)[Trajectory::PHI];
}

/// Coefficients below this multiple of the l1 norm are rounding noise of the fit.
double noise_floor(const BoundaryFunction& f) {
  double sum = std::abs(f.mean());
  for (int i = 0; i < f.degree(); ++i) sum += std::abs(f.cos_coef()[i]) + std::abs(f.sin_coef()[i]);
  return 8.0 * std::numeric_limits<double>::epsilon() * sum;
}

/// Rescaled field in Quad with the boundary series converted once.
class QuadField {
 public:
  explicit QuadField(const CuspMetric& metric)
      : metric_(metric), S_(metric.S(), noise_floor(metric.S())) {
    if (!metric.constant_C()) C_.emplace(metric.C(), noise_floor(metric.C()));
  }

  BoundaryLocal<Quad> local(Quad phi) const {
    BoundaryLocal<Quad> b;
    const auto s = S_(phi);
    b.S = s[0];
    b.S_p = s[1];
    b.S_pp = std::numeric_limits<Quad>::quiet_NaN();
    if (C_) {
      const auto c = (*C_)(phi);
      b.C = c[0];
      b.C_p = c[1];
    } else {
      b.C = Quad(metric_.C().mean());
      b.C_p = 0;
    }
    b.invC = 1 / b.C;
    b.invC_p = -b.C_p * b.invC * b.invC;
    return b;
  }

  std::array<Quad, 4> operator()(const PrecisePoint& p) const {
    return rescaled_field_local(metric_, local(p.phi), p);
  }

  Quad S_phi(Quad phi) const { return S_(phi)[1]; }

  /// Newton on S_phi of this series; the slope comes from the full series.
  Quad polish_critical(double phi0) const {
    Quad x = phi0;
    for (int it = 0; it < 6; ++it) {
      const Quad spp = metric_.S().eval<Quad>(x)[2];
      if (spp == 0) break;
      x -= S_phi(x) / spp;
    }
    return x;
  }

  Quad shell_xi(Quad r, Quad phi, Quad theta) const {
    const auto b = local(phi);
    const Quad rm = detail::ipow(r, metric_.m());
    const Quad D = 1 - Quad(metric_.kk1()) * rm * b.S;
    const Quad q = D * (1 - rm * theta * theta * b.invC);
    if (q < 0) throw DomainError("no point of the energy shell with this (r, phi, theta)");
    return sqrt(q);
  }

 private:
  const CuspMetric& metric_;
  SeriesEvaluator<Quad> S_;
  std::optional<SeriesEvaluator<Quad>> C_;
};

}  // namespace

double wrap_centered(double x, double L) {
  double y = std::fmod(x, L);
  if (y > 0.5 * L) y -= L;
  if (y <= -0.5 * L) y += L;
  return y;
}

int thread_count(int requested) {
  int n = requested > 0 ? requested : int(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("CUSPGEO_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

std::array<double, 3> fan_direction(const CuspMetric& metric, const CriticalPoint& cp,
                                    double alpha) {
  const Frame f = max_frame(metric, cp);
  const double c = std::cos(alpha), s = std::sin(alpha);
  return {s, c / f.norm, c * f.lambda2 * f.C / f.norm};
}

Trajectory shoot_unstable(const CuspMetric& metric, const CriticalPoint& cp,
                          const std::array<double, 3>& direction, double eps,
                          const ShootOptions& opt) {
  if (cp.type == CriticalType::degenerate && !metric.constant_S())
    throw PreconditionError("shoot_unstable: degenerate critical point");
  if (!(eps >= 1e-8 && eps <= 1e-4)) throw PreconditionError("shoot_unstable: eps outside [1e-8, 1e-4]");
  if (direction[0] < 0.0) throw PreconditionError("shoot_unstable: negative r-component");
  const double nd = std::sqrt(direction[0] * direction[0] + direction[1] * direction[1] +
                              direction[2] * direction[2]);
  if (!(nd > 0.0)) throw PreconditionError("shoot_unstable: zero direction");
  const std::array<double, 3> d{direction[0] / nd, direction[1] / nd, direction[2] / nd};

  double lambda2 = 0.0, C = metric.local<double>(cp.phi0).C;
  if (metric.constant_S() || cp.type == CriticalType::minimum) {
    if (std::abs(d[0] - 1.0) > 1e-12)
      throw PreconditionError("shoot_unstable: only the v1 direction is unstable here");
  } else {
    const Frame f = max_frame(metric, cp);
    lambda2 = f.lambda2;
    if (std::abs(d[2] - lambda2 * C * d[1]) > 1e-8)
      throw PreconditionError("shoot_unstable: direction not in span{v1, nu2}");
  }

  auto launch = [&](double r0, double c2, double t1) {
    const double phi = cp.phi0 + c2, theta = lambda2 * C * c2;
    PhasePoint p{r0, phi, shell_xi(metric, r0, phi, theta), theta};
    IntegrateOptions io;
    io.tol = opt.tol;
    io.tau_start = r0;
    io.tau_stop = opt.tau_stop;
    return integrate(metric, p, {0.0, t1}, io);
  };
  const double r0 = eps * d[0], c2 = eps * d[1];
  Trajectory tr = launch(r0, c2, opt.t_max);

  if (opt.richardson) {
    // flow the launch point back along the linear orbit until its norm halves
    const double w2 = 1.0 + lambda2 * lambda2 * C * C;
    auto norm_at = [&](double s) {
      const double a = r0 * std::exp(-s), b = c2 * std::exp(-lambda2 * s);
      return std::sqrt(a * a + w2 * b * b);
    };
    double lo = 0.0, hi = 1.0;
    while (norm_at(hi) > 0.5 * eps && hi < 1e3) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (norm_at(mid) > 0.5 * eps ? lo : hi) = mid;
    }
    const double s = 0.5 * (lo + hi);
    const Trajectory pt = launch(r0 * std::exp(-s), c2 * std::exp(-lambda2 * s), opt.t_max + s);
    double dev = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      std::optional<Trajectory::State> q;
      if (r0 > 0.0) {
        q = pt.at_tau(tr.y[i][Trajectory::TAU]);
      } else if (tr.t[i] + s <= pt.t_end()) {
        q = pt.at(tr.t[i] + s);
      }
      if (!q) continue;
      dev = std::max({dev, std::abs((*q)[Trajectory::R] - tr.y[i][Trajectory::R]),
                      std::abs((*q)[Trajectory::PHI] - tr.y[i][Trajectory::PHI])});
    }
    tr.richardson_deviation = dev;
    tr.warning = dev > 1e-4;
  }
  return tr;
}

PrecisePoint shoot_to_radius(const CuspMetric& metric, const CriticalPoint& cp, double alpha,
                             double eps, double r_target) {
  const QuadField field(metric);
  const Quad phi0 = metric.constant_S() ? Quad(cp.phi0) : field.polish_critical(cp.phi0);
  Quad r0 = eps, c2 = 0, lambda2C = 0;
  if (!metric.constant_S() && cp.type == CriticalType::maximum) {
    const auto b = metric.local<Quad>(phi0);
    const Quad n = metric.n(), kk1 = metric.kk1();
    const Quad a = b.S_pp * b.invC;
    const Quad l3 = -(n + sqrt(n * n - 2 * kk1 * a)) / 2;
    const Quad l2 = kk1 * a / (2 * l3);
    lambda2C = l2 * b.C;
    const Quad norm = sqrt(1 + lambda2C * lambda2C);
    r0 = Quad(eps) * sin(Quad(alpha));
    c2 = Quad(eps) * cos(Quad(alpha)) / norm;
  } else if (cp.type == CriticalType::degenerate && !metric.constant_S()) {
    throw PreconditionError("shoot_to_radius: degenerate critical point");
  }
  if (!(r0 > 0) || !(Quad(r_target) > r0))
    throw PreconditionError("shoot_to_radius: target radius below the launch radius");

  // state (r, phi - phi0, xi, theta)
  using V4 = ode::Vec<Quad, 4>;
  const V4 y0{r0, c2, field.shell_xi(r0, phi0 + c2, lambda2C * c2), lambda2C * c2};
  auto f = [&](Quad, const V4& y) {
    const auto v = field({y[0], phi0 + y[1], y[2], y[3]});
    return V4{v[0], v[1], v[2], v[3]};
  };
  ode::Options<Quad> o;
  o.rtol = 1e-30;
  o.atol = 1e-32;
  o.h_min = 1e-20;
  const ode::ExtrapolationOptions xo;
  Quad t_prev = 0, t_hit = 0;
  V4 y_prev = y0;
  bool hit = false;
  auto obs = [&](Quad t, const V4& y) {
    if (y[0] >= Quad(r_target)) {
      hit = true;
      t_hit = t;
      return false;
    }
    t_prev = t;
    y_prev = y;
    return true;
  };
  ode::integrate_extrapolated<Quad, 4>(f, Quad(0), y0, Quad(400), o, xo, obs);
  if (!hit) throw NumericalError("shoot_to_radius: target radius not reached");
  // the crossing lies inside the last step; locate it with partial steps from y_prev
  const V4 f_prev = f(t_prev, y_prev);
  auto partial = [&](Quad h) {
    return ode::extrapolation_step<Quad, 4>(f, t_prev, y_prev, f_prev, h, xo.columns)[0];
  };
  auto g = [&](Quad h) { return partial(h)[0] - Quad(r_target); };
  Quad lo = 0, hi = t_hit - t_prev;
  std::uintmax_t it = 200;
  const auto root = boost::math::tools::toms748_solve(
      g, lo, hi, y_prev[0] - Quad(r_target), g(hi),
      boost::math::tools::eps_tolerance<Quad>(std::numeric_limits<Quad>::digits - 3), it);
  const V4 y = partial((root.first + root.second) / 2);
  return {y[0], phi0 + y[1], y[2], y[3]};
}

// ---------------------------------------------------------------------------

std::string to_string(HeteroclinicKind k) {
  switch (k) {
    case HeteroclinicKind::monotone_convergence: return "monotone-convergence";
    case HeteroclinicKind::spiral_convergence: return "spiral-convergence";
    case HeteroclinicKind::passes_through: return "passes-through";
  }
  return "unknown";
}

HeteroclinicReport classify_heteroclinic(const CuspMetric& metric, const CriticalPoint& max_cp,
                                         int side, double t_max) {
  if (metric.constant_S()) throw PreconditionError("classify_heteroclinic: S is constant, no maxima");
  if (side != 1 && side != -1) throw std::invalid_argument("classify_heteroclinic: side must be +1 or -1");
  const auto cps = find_critical_points(metric);
  if (!cps.morse()) throw PreconditionError("classify_heteroclinic: S is not Morse");
  const double L = metric.length();
  const auto& pts = cps.points;
  const int N = int(pts.size());
  int j = -1;
  for (int i = 0; i < N; ++i)
    if (pts[i].type == CriticalType::maximum &&
        std::abs(wrap_centered(pts[i].phi0 - max_cp.phi0, L)) < 1e-8)
      j = i;
  if (j < 0) throw PreconditionError("classify_heteroclinic: not a maximum of S");
  const auto& mx = pts[j];
  const auto& mn = pts[(j + side + N) % N];
  const auto& next_max = pts[(j + 2 * side + 2 * N) % N];

  HeteroclinicReport rep;
  rep.side = side;
  rep.phi_max = mx.phi0;
  double d = std::fmod(side * (mn.phi0 - mx.phi0), L);
  if (d <= 0.0) d += L;
  const double target = mx.phi0 + side * d;
  rep.phi_min = target;

  const Frame fr = max_frame(metric, mx);
  const double delta = 1e-9;
  IntegrateOptions io;
  io.tol = 1e-12;
  const double t_leave = std::log(0.5 * d / delta) / fr.lambda2;
  rep.trajectory = integrate(metric, BoundaryState{mx.phi0 + side * delta,
                                                   side * delta * fr.lambda2 * fr.C},
                             {0.0, t_leave + t_max}, io);
  const auto& tr = rep.trajectory;

  auto f_at = [&](std::size_t i) { return side * (tr.y[i][Trajectory::PHI] - target); };
  auto root_in = [&](std::size_t i, double shift) {
    const auto& st = tr.steps[i];
    auto g = [&](double t) { return side * (st.component(t, Trajectory::PHI) - target) + shift; };
    return find_root(g, tr.t[i], tr.t[i + 1], g(tr.t[i]), g(tr.t[i + 1]));
  };

  // time origin: halfway between the maximum and the minimum
  rep.t_origin = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i + 1 < tr.size(); ++i)
    if (f_at(i) < -0.5 * d && f_at(i + 1) >= -0.5 * d) {
      rep.t_origin = root_in(i, 0.5 * d);
      break;
    }
  if (std::isnan(rep.t_origin)) rep.t_origin = 0.0;

  // crossings of phi = phi_min, each confirmed by leaving a band of 1e-10 on the far side
  const double band = 1e-10;
  int state = -1;
  std::optional<double> pending;
  int pending_side = 0;
  std::vector<std::size_t> cross_step;
  std::size_t pending_step = 0;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    const double f0 = f_at(i), f1 = f_at(i + 1);
    if ((f0 < 0.0 && f1 >= 0.0) || (f0 > 0.0 && f1 <= 0.0)) {
      const int s = f1 >= 0.0 ? 1 : -1;
      const double tr_root = root_in(i, 0.0);
      if (pending && s == state) {
        pending.reset();
      } else if (s != state) {
        pending = tr_root;
        pending_side = s;
        pending_step = i;
      }
    }
    if (pending && pending_side * f1 > band) {
      rep.crossings.push_back(*pending - rep.t_origin);
      cross_step.push_back(pending_step);
      state = pending_side;
      pending.reset();
    }
  }

  for (double t : rep.crossings)
    if (t <= 10.0) ++rep.crossings_by_t10;
  if (rep.crossings.size() >= 2)
    rep.last_interval = rep.crossings.back() - rep.crossings[rep.crossings.size() - 2];

  const double kk1 = metric.kk1();
  rep.energy_next_max = boundary_energy(metric, {next_max.phi0, 0.0});
  const auto& yend = tr.y.back();
  rep.energy_final_minus_min = boundary_energy(metric, {yend[Trajectory::PHI], yend[Trajectory::THETA]}) -
                               0.5 * kk1 * mn.S_value;
  if (!rep.crossings.empty()) {
    const auto s = tr.at(rep.crossings.front() + rep.t_origin);
    rep.theta_at_min = s[Trajectory::THETA];
    rep.energy_first_crossing = boundary_energy(metric, {s[Trajectory::PHI], s[Trajectory::THETA]});
  }
  if (!rep.crossings.empty() && rep.energy_first_crossing > rep.energy_next_max)
    rep.kind = HeteroclinicKind::passes_through;
  else if (rep.crossings.size() > 2)
    rep.kind = HeteroclinicKind::spiral_convergence;
  else
    rep.kind = HeteroclinicKind::monotone_convergence;
  return rep;
}

// ---------------------------------------------------------------------------

ExpAtlas build_atlas(const CuspMetric& metric, double tau0, int fan_size, const AtlasOptions& opt) {
  if (fan_size < 8) throw std::invalid_argument("build_atlas: fan_size must be >= 8");
  if (!(tau0 > 0.0)) throw std::invalid_argument("build_atlas: tau0 must be positive");
  ExpAtlas atlas;
  atlas.tau0 = tau0;
  atlas.eps = opt.eps;
  atlas.length = metric.length();
  const double L = metric.length();

  ShootOptions so;
  so.tol = opt.tol;
  so.tau_stop = tau0;
  so.richardson = opt.richardson;

  if (metric.constant_S()) {
    atlas.constant_S = true;
    atlas.label_period = 1.0;
    atlas.geodesics.resize(std::size_t(fan_size));
    run_parallel(std::size_t(fan_size), [&](std::size_t j) {
      CriticalPoint cp;
      cp.phi0 = L * double(j) / fan_size;
      cp.constant_S_flag = true;
      cp.S_value = metric.S().mean();
      auto& g = atlas.geodesics[j];
      g.label = double(j) / fan_size;
      g.phi_start = cp.phi0;
      g.traj = shoot_unstable(metric, cp, {1.0, 0.0, 0.0}, opt.eps, so);
    });
  } else {
    const auto cps = find_critical_points(metric);
    if (!cps.morse()) throw PreconditionError("build_atlas: S is not Morse");
    atlas.critical = cps.points;
    const auto& pts = atlas.critical;
    atlas.label_period = double(cps.num_maxima());

    int imax = 0;
    for (std::size_t c = 0; c < pts.size(); ++c) {
      if (pts[c].type == CriticalType::minimum) {
        AtlasGeodesic g;
        g.label = imax;  // minimum following maximum number imax
        g.source = int(c);
        g.phi_start = pts[c].phi0;
        g.traj = shoot_unstable(metric, pts[c], {1.0, 0.0, 0.0}, opt.eps, so);
        atlas.geodesics.push_back(std::move(g));
        continue;
      }
      ++imax;
      const auto& cp = pts[c];
      const Frame fr = max_frame(metric, cp);

      std::vector<AtlasGeodesic> fan;  // kept sorted by u
      std::vector<std::vector<std::optional<double>>> lev;
      auto launch_batch = [&](const std::vector<double>& us) {
        std::vector<AtlasGeodesic> out(us.size());
        run_parallel(us.size(), [&](std::size_t b) {
          auto& g = out[b];
          g.u = us[b];
          g.alpha = alpha_from_u(us[b]);
          g.label = imax - g.alpha / kPi;
          g.source = int(c);
          g.phi_start = cp.phi0;
          g.traj = shoot_unstable(metric, cp, direction_from_u(fr, us[b]), opt.eps, so);
        });
        for (auto& g : out) {
          auto pos = std::lower_bound(fan.begin(), fan.end(), g.u,
                                      [](const AtlasGeodesic& a, double u) { return a.u < u; });
          std::vector<std::optional<double>> ph;
          for (double level : opt.refine_levels) ph.push_back(phi_at_r(g.traj, level));
          lev.insert(lev.begin() + (pos - fan.begin()), ph);
          fan.insert(pos, std::move(g));
        }
      };
      const int n0 = std::min(opt.seeds, fan_size);
      std::vector<double> seeds;
      for (int s = 0; s < n0; ++s)
        seeds.push_back(-opt.u_range + 2.0 * opt.u_range * (s + 0.5) / n0);
      launch_batch(seeds);

      while (int(fan.size()) < fan_size) {
        std::vector<std::pair<double, std::size_t>> gaps;
        for (std::size_t a = 0; a + 1 < fan.size(); ++a) {
          if (fan[a + 1].u - fan[a].u < opt.min_du) continue;
          double gap = 0.0;
          for (std::size_t l = 0; l < opt.refine_levels.size(); ++l) {
            const auto& pa = lev[a][l];
            const auto& pb = lev[a + 1][l];
            if (pa && pb)
              gap = std::max(gap, std::abs(*pb - *pa));
            else if (pa || pb)
              gap = std::max(gap, L);
          }
          if (gap > 0.0) gaps.emplace_back(gap, a);
        }
        if (gaps.empty()) {
          atlas.warnings.push_back("fan refinement exhausted before reaching fan_size");
          break;
        }
        std::stable_sort(gaps.begin(), gaps.end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });
        const std::size_t nb =
            std::min({gaps.size(), std::size_t(opt.batch), std::size_t(fan_size) - fan.size()});
        std::vector<double> us;
        for (std::size_t b = 0; b < nb; ++b) {
          const std::size_t a = gaps[b].second;
          us.push_back(0.5 * (fan[a].u + fan[a + 1].u));
        }
        launch_batch(us);
      }
      for (auto& g : fan) atlas.geodesics.push_back(std::move(g));
    }
    // the minimum after the last maximum carries label k, the one before the first gets k too
    for (auto& g : atlas.geodesics)
      if (std::isnan(g.alpha) && g.label <= 0.0) g.label = atlas.label_period;
  }

  std::stable_sort(atlas.geodesics.begin(), atlas.geodesics.end(),
                   [](const AtlasGeodesic& a, const AtlasGeodesic& b) { return a.label < b.label; });
  int short_count = 0, failed = 0, warned = 0;
  for (const auto& g : atlas.geodesics) {
    if (g.traj.tau_end() < tau0) ++short_count;
    if (g.traj.stop == StopReason::step_failure) ++failed;
    if (g.traj.warning) ++warned;
  }
  if (short_count)
    atlas.warnings.push_back(std::to_string(short_count) +
                             " geodesics end before tau0 (validity-radius horizon); truncated");
  if (failed) atlas.warnings.push_back(std::to_string(failed) + " geodesics stopped with step-failure");
  if (warned)
    atlas.warnings.push_back(std::to_string(warned) + " geodesics exceed the Richardson bound 1e-4");
  return atlas;
}

ExpValue exp_eval(const ExpAtlas& atlas, double q, double tau) {
  if (!(tau > 0.0 && tau <= atlas.tau0)) throw std::out_of_range("exp_eval: tau outside (0, tau0]");
  if (atlas.geodesics.empty()) throw std::invalid_argument("exp_eval: empty atlas");
  const double P = atlas.label_period;
  std::size_t best = 0;
  double bestd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < atlas.geodesics.size(); ++i) {
    const double dq = std::abs(wrap_centered(q - atlas.geodesics[i].label, P));
    if (dq < bestd) bestd = dq, best = i;
  }
  const auto& g = atlas.geodesics[best];
  ExpValue v;
  v.label_used = g.label;
  v.gap = bestd;
  v.exact = bestd < 1e-12;
  const auto& tr = g.traj;
  if (tau < tr.y.front()[Trajectory::TAU]) {
    // inside the launch offset: the geodesic is still at the singular point to O(eps)
    v.r = tau;
    v.phi = tr.y.front()[Trajectory::PHI];
    return v;
  }
  const auto s = tr.at_tau(tau);
  if (!s) throw std::out_of_range("exp_eval: tau beyond the computed part of the geodesic");
  v.r = (*s)[Trajectory::R];
  v.phi = (*s)[Trajectory::PHI];
  return v;
}

// ---------------------------------------------------------------------------

InjectivityReport injectivity_report(const ExpAtlas& atlas, const std::vector<double>& r_levels) {
  InjectivityReport rep;
  const double L = atlas.length;
  for (double level : r_levels) {
    InjectivityLevel lv;
    lv.r = level;
    std::vector<std::size_t> idx;
    std::vector<double> phi;
    int missing = 0;
    for (std::size_t i = 0; i < atlas.geodesics.size(); ++i) {
      const auto p = phi_at_r(atlas.geodesics[i].traj, level);
      if (p) {
        idx.push_back(i);
        phi.push_back(*p);
      } else {
        ++missing;
      }
    }
    lv.reached = int(idx.size());
    if (idx.size() < 2) {
      lv.skipped = true;
      lv.note = "level above the radius reached by the atlas";
      rep.levels.push_back(lv);
      continue;
    }
    if (missing) lv.note = std::to_string(missing) + " geodesics do not reach this level";
    const std::size_t M = idx.size();
    double total = 0.0;
    lv.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < M; ++j) {
      const std::size_t jn = (j + 1) % M;
      const double d = wrap_centered(phi[jn] - phi[j], L);
      total += d;
      lv.min_gap = std::min(lv.min_gap, d);
      if (std::abs(d) <= kCrossingTol) {
        ++lv.near_coincidences;
        continue;
      }
      if (d > 0.0) continue;
      ++lv.order_violations;
      const auto& ga = atlas.geodesics[idx[j]];
      const auto& gb = atlas.geodesics[idx[jn]];
      Crossing cr;
      cr.q_a = ga.label;
      cr.q_b = gb.label;
      cr.r = level;
      cr.phi = phi[j];
      cr.residual = std::abs(d);
      cr.located = false;
      auto delta = [&](double r) {
        const auto pa = phi_at_r(ga.traj, r), pb = phi_at_r(gb.traj, r);
        return wrap_centered(*pb - *pa, L);
      };
      const double r_lo =
          1.0001 * std::max(ga.traj.y.front()[Trajectory::R], gb.traj.y.front()[Trajectory::R]);
      if (r_lo < level) {
        const int nscan = 200;
        double r_hi = level, d_hi = d;
        for (int s = 1; s <= nscan; ++s) {
          const double r = level * std::pow(r_lo / level, double(s) / nscan);
          const double dv = delta(r);
          if (dv > 0.0) {
            const double rs = find_root(delta, r, r_hi, dv, d_hi);
            cr.r = rs;
            cr.phi = *phi_at_r(ga.traj, rs);
            cr.residual = std::abs(delta(rs));
            cr.located = true;
            break;
          }
          r_hi = r;
          d_hi = dv;
        }
      }
      lv.crossings.push_back(cr);
      if (!rep.smallest_crossing_r || cr.r < *rep.smallest_crossing_r) rep.smallest_crossing_r = cr.r;
    }
    lv.winding = total / L;
    if (lv.order_violations > 0 || std::abs(lv.winding - 1.0) > 1e-6) rep.order_preserved = false;
    if (!lv.crossings.empty()) rep.injective = false;
    rep.levels.push_back(std::move(lv));
  }
  return rep;
}

SurjectivityReport surjectivity_report(const ExpAtlas& atlas, const SurjectivityGrid& grid) {
  if (!(grid.r_max > grid.r_min && grid.r_min > 0.0) || grid.n_r < 1 || grid.n_phi < 1)
    throw std::invalid_argument("surjectivity_report: bad grid");
  SurjectivityReport rep;
  rep.grid = grid;
  const double L = atlas.length;
  const double dr = (grid.r_max - grid.r_min) / grid.n_r, dphi = L / grid.n_phi;
  std::vector<char> covered(std::size_t(grid.n_r) * grid.n_phi, 0);
  const double reach2 = 0.5;  // (half cell diagonal)^2 in cell units

  auto mark_segment = [&](double x0, double y0, double x1, double y1) {
    const int i0 = std::max(0, int(std::floor(std::min(x0, x1) - 1.0)));
    const int i1 = std::min(grid.n_r - 1, int(std::ceil(std::max(x0, x1) + 1.0)));
    const long j0 = long(std::floor(std::min(y0, y1) - 1.0));
    const long j1 = long(std::ceil(std::max(y0, y1) + 1.0));
    const double ex = x1 - x0, ey = y1 - y0, ee = ex * ex + ey * ey;
    for (int i = i0; i <= i1; ++i)
      for (long j = j0; j <= j1; ++j) {
        const double cx = i + 0.5, cy = j + 0.5;
        double s = ee > 0.0 ? ((cx - x0) * ex + (cy - y0) * ey) / ee : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        const double px = x0 + s * ex - cx, py = y0 + s * ey - cy;
        if (px * px + py * py <= reach2) {
          const long jm = ((j % grid.n_phi) + grid.n_phi) % grid.n_phi;
          covered[std::size_t(i) * grid.n_phi + std::size_t(jm)] = 1;
        }
      }
  };

  for (const auto& g : atlas.geodesics) {
    const auto& tr = g.traj;
    auto norm = [&](const Trajectory::State& s) {
      return std::array<double, 2>{(s[Trajectory::R] - grid.r_min) / dr, s[Trajectory::PHI] / dphi};
    };
    for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
      const double ra = tr.y[i][Trajectory::R], rb = tr.y[i + 1][Trajectory::R];
      if (std::max(ra, rb) < grid.r_min - dr || std::min(ra, rb) > grid.r_max + dr) continue;
      auto pa = norm(tr.y[i]);
      const auto pb = norm(tr.y[i + 1]);
      const double span = std::max(std::abs(pb[0] - pa[0]), std::abs(pb[1] - pa[1]));
      const int nsub = std::clamp(int(std::ceil(span / 0.25)), 1, 4096);
      for (int s = 1; s <= nsub; ++s) {
        const double t = tr.t[i] + (tr.t[i + 1] - tr.t[i]) * double(s) / nsub;
        const auto pc = s == nsub ? pb : norm(tr.steps[i](t));
        mark_segment(pa[0], pa[1], pc[0], pc[1]);
        pa = pc;
      }
    }
  }
  std::size_t count = 0;
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_phi; ++j) {
      if (covered[std::size_t(i) * grid.n_phi + std::size_t(j)])
        ++count;
      else
        rep.uncovered.push_back({i, j});
    }
  rep.fraction = double(count) / double(covered.size());
  return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(BackwardVerdict v) {
  switch (v) {
    case BackwardVerdict::converged: return "converged";
    case BackwardVerdict::not_converged: return "not-converged";
    case BackwardVerdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

BackwardCheck backward_start_check(const CuspMetric& metric, const PrecisePoint& p,
                                   const BackwardOptions& opt) {
  const double r_exit =
      opt.r_exit > 0.0 ? opt.r_exit : std::min(metric.domain_radius(), 1e-2);
  if (!(p.r > 0 && p.r < Quad(r_exit)))
    throw PreconditionError("backward_start_check: need 0 < r < r0");
  if (!(p.xi > Quad(0.5))) throw PreconditionError("backward_start_check: need xi > 1/2");

  const bool constS = metric.constant_S();
  const Quad phi_ref = p.phi;
  using V4 = ode::Vec<Quad, 4>;
  const QuadField field(metric);
  auto f = [&](Quad, const V4& y) {
    const auto v = field({y[0], phi_ref + y[1], y[2], y[3]});
    return V4{v[0], v[1], v[2], v[3]};
  };
  auto residuals = [&](const V4& y) {
    const Quad sp = constS ? Quad(0) : field.S_phi(phi_ref + y[1]);
    return std::array<double, 2>{double(abs(sp)), double(abs(y[3]))};
  };

  BackwardCheck out;
  const V4 y0{p.r, Quad(0), p.xi, p.theta};
  // the closest approach only counts once r has dropped well below its starting value, so a
  // start that happens to lie near another critical point is not mistaken for the limit
  const Quad r_gate = p.r / 100;
  double best = std::numeric_limits<double>::infinity();
  V4 ybest = y0;
  bool have_best = false, exited = false, diverged = false, runaway = false;
  Quad t_last = 0;
  auto obs = [&](Quad t, const V4& y) {
    t_last = t;
    if (y[0] >= Quad(r_exit)) {
      exited = true;
      return false;
    }
    const auto res = residuals(y);
    const double m = std::max(res[0], res[1]);
    if (y[0] < r_gate && m < best) best = m, ybest = y, have_best = true;
    if (have_best && m > 1e4 * best && m > 1e-6) {
      diverged = true;
      return false;
    }
    if (abs(y[3]) > 1e6) {
      runaway = true;
      return false;
    }
    if (y[0] < Quad(opt.r_stop)) return false;
    if (have_best && best < opt.residual_stop) return false;
    return true;
  };
  ode::Options<Quad> o;
  o.rtol = opt.rtol;
  o.atol = opt.atol;
  o.h_min = 1e-20;
  o.h_max = opt.h_max;
  ode::ExtrapolationOptions xo;
  xo.columns = opt.columns;
  const auto status =
      ode::integrate_extrapolated<Quad, 4>(f, Quad(0), y0, -Quad(opt.t_budget), o, xo, obs);

  const auto res = residuals(ybest);
  out.phi = double(phi_ref + ybest[1]);
  out.r = double(ybest[0]);
  out.residual_S_phi = res[0];
  out.residual_theta = res[1];
  out.t_end = double(t_last);
  const bool ok = have_best && res[0] < 1e-6 && res[1] < 1e-6;
  if (ok) {
    out.verdict = BackwardVerdict::converged;
    if (diverged || exited) out.note = "diverges after the closest approach (conditioning)";
  } else if (exited) {
    out.verdict = BackwardVerdict::inconclusive;
    out.note = "backward trajectory leaves r < r0 before approaching the boundary";
  } else {
    out.verdict = BackwardVerdict::not_converged;
    if (runaway) out.note = "boundary momentum runs away backward";
    else if (diverged) out.note = "residual grows again above 1e-6";
    else if (status != ode::Status::stopped && status != ode::Status::reached_end)
      out.note = "integration failure";
  }
  if (!constS) {
    const auto cps = find_critical_points(metric);
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cps.points.size(); ++i) {
      const double dd = std::abs(wrap_centered(out.phi - cps.points[i].phi0, metric.length()));
      if (dd < bd) bd = dd, out.nearest = int(i), out.nearest_phi0 = cps.points[i].phi0;
    }
  } else {
    out.nearest_phi0 = out.phi;
  }
  return out;
}

BackwardCheck backward_start_check(const CuspMetric& metric, const PhasePoint& p,
                                   const BackwardOptions& opt) {
  return backward_start_check(metric, PrecisePoint{Quad(p.r), Quad(p.phi), Quad(p.xi), Quad(p.theta)},
                              opt);
}

std::vector<DiscontinuityProbe> discontinuity_probe(const ExpAtlas& atlas, double tau) {
  std::vector<DiscontinuityProbe> out;
  if (atlas.constant_S) return out;
  const auto& gs = atlas.geodesics;
  const std::size_t n = gs.size();
  const double L = atlas.length;
  auto phi_of = [&](const AtlasGeodesic& g) {
    const auto s = g.traj.at_tau(std::min(tau, g.traj.tau_end()));
    return s ? (*s)[Trajectory::PHI] : g.traj.y.back()[Trajectory::PHI];
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isnan(gs[i].alpha)) continue;  // integer labels are the minimum geodesics
    DiscontinuityProbe d;
    d.label = gs[i].label;
    d.phi_at_label = phi_of(gs[i]);
    d.phi_left = phi_of(gs[(i + n - 1) % n]);
    d.phi_right = phi_of(gs[(i + 1) % n]);
    d.jump = std::abs(wrap_centered(d.phi_left - d.phi_at_label, L)) > 0.1 ||
             std::abs(wrap_centered(d.phi_right - d.phi_at_label, L)) > 0.1;
    out.push_back(d);
  }
  return out;
}

}  // namespace cuspgeo
