#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>

#include "cuspgeo/cli.hpp"

namespace cuspgeo::cli {

namespace {

constexpr double kPi = std::numbers::pi;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_trajectory(const std::filesystem::path& path, const CuspMetric& metric,
                      const Trajectory& tr) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_csv(os, metric, tr);
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.%s", stem, i, ext);
  return buf;
}

/// Window around all samples; r windows start at 0, theta windows are symmetric.
Window fit_window(const std::vector<const Trajectory*>& trs, const std::string& y_axis) {
  Window w;
  w.y_axis = y_axis;
  double x0 = INFINITY, x1 = -INFINITY, ymax = 0.0;
  for (const auto* tr : trs)
    for (const auto& y : tr->y) {
      x0 = std::min(x0, y[Trajectory::PHI]);
      x1 = std::max(x1, y[Trajectory::PHI]);
      ymax = std::max(ymax, std::abs(y_axis == "r" ? y[Trajectory::R] : y[Trajectory::THETA]));
    }
  if (!(x1 > x0)) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  const double pad = 0.05 * (x1 - x0);
  w.x0 = x0 - pad;
  w.x1 = x1 + pad;
  if (!(ymax > 0.0)) ymax = 1.0;
  w.y1 = 1.05 * ymax;
  w.y0 = y_axis == "r" ? 0.0 : -w.y1;
  return w;
}

/// Critical points repeated by whole periods so every copy inside the window is marked.
std::vector<CriticalPoint> markers_in(const CuspMetric& metric, const Window& w) {
  std::vector<CriticalPoint> out;
  if (metric.constant_S()) return out;
  const double L = metric.length();
  for (const auto& cp : find_critical_points(metric).points) {
    for (double s = std::floor((w.x0 - cp.phi0) / L); cp.phi0 + s * L <= w.x1; s += 1.0) {
      CriticalPoint c = cp;
      c.phi0 = cp.phi0 + s * L;
      if (c.phi0 >= w.x0) out.push_back(c);
    }
  }
  return out;
}

void portrait(const std::filesystem::path& path, const CuspMetric& metric,
              const std::vector<const Trajectory*>& trs, const std::string& y_axis,
              const std::string& title) {
  if (trs.empty()) return;
  const Window w = fit_window(trs, y_axis);
  std::vector<Polyline> lines;
  for (const auto* tr : trs) lines.push_back(trajectory_polyline(*tr, w));
  write_text(path, render_svg(lines, w, markers_in(metric, w), title));
}

Json trajectory_summary(const Trajectory& tr) {
  const auto& last = tr.y.back();
  return {{"stop", to_string(tr.stop)},
          {"t_end", tr.t_end()},
          {"tau_end", last[Trajectory::TAU]},
          {"r_end", last[Trajectory::R]},
          {"phi_end", last[Trajectory::PHI]},
          {"theta_end", last[Trajectory::THETA]},
          {"max_energy_drift", tr.max_energy_drift}};
}

int task_analyze(const CuspMetric& metric, const RunConfig& cfg, std::ostream& log) {
  write_json(cfg.out / "analyze.json", analyze(metric));
  log << "analyze: wrote analyze.json\n";
  return 0;
}

int task_trace(const CuspMetric& metric, const RunConfig& cfg, std::ostream& log) {
  std::vector<Trajectory> trs;
  Json items = Json::array();
  IntegrateOptions io;
  io.tol = cfg.tol;
  if (!cfg.starts.empty()) {
    for (const auto& s : cfg.starts) {
      const PhasePoint p{s.r, s.phi, shell_xi(metric, s.r, s.phi, s.theta), s.theta};
      trs.push_back(integrate(metric, p, {0.0, cfg.backward ? -cfg.t_max : cfg.t_max}, io));
      items.push_back({{"start", {{"r", s.r}, {"phi", s.phi}, {"xi", p.xi}, {"theta", s.theta}}}});
    }
  } else {
    // default: the unstable geodesic of every singular point up to tau0
    ShootOptions so;
    so.tol = cfg.tol;
    so.tau_stop = cfg.tau0;
    const auto cps = find_critical_points(metric);
    if (cps.constant_S) {
      CriticalPoint cp;
      cp.constant_S_flag = true;
      trs.push_back(shoot_unstable(metric, cp, {1.0, 0.0, 0.0}, 1e-6, so));
      items.push_back({{"start", {{"phi0", 0.0}, {"type", "constant-S"}}}});
    } else {
      for (const auto& cp : cps.points) {
        if (cp.type == CriticalType::degenerate) continue;
        const auto dir = cp.type == CriticalType::maximum ? fan_direction(metric, cp, kPi / 2)
                                                          : std::array<double, 3>{1.0, 0.0, 0.0};
        trs.push_back(shoot_unstable(metric, cp, dir, 1e-6, so));
        items.push_back({{"start", to_json(cp)}});
      }
    }
  }
  std::vector<const Trajectory*> ptrs;
  for (std::size_t i = 0; i < trs.size(); ++i) {
    const std::string file = numbered("trace", i, "csv");
    write_trajectory(cfg.out / file, metric, trs[i]);
    items[i]["file"] = file;
    items[i]["summary"] = trajectory_summary(trs[i]);
    ptrs.push_back(&trs[i]);
  }
  write_json(cfg.out / "trace.json", Json{{"trajectories", items}});
  portrait(cfg.out / "trace.svg", metric, ptrs, "r", "trajectories in the (phi, r) plane");
  log << "trace: " << trs.size() << " trajectories\n";
  return 0;
}

int task_boundary_flow(const CuspMetric& metric, const RunConfig& cfg, std::ostream& log) {
  std::vector<Trajectory> trs;
  Json items = Json::array();
  IntegrateOptions io;
  io.tol = cfg.tol;
  if (!cfg.starts.empty()) {
    for (const auto& s : cfg.starts) {
      trs.push_back(integrate(metric, BoundaryState{s.phi, s.theta},
                              {0.0, cfg.backward ? -cfg.t_max : cfg.t_max}, io));
      items.push_back({{"start", {{"phi", s.phi}, {"theta", s.theta}}}});
    }
  } else {
    if (metric.constant_S()) throw PreconditionError("boundary-flow: S is constant; give starts");
    for (const auto& cp : find_critical_points(metric).points) {
      if (cp.type != CriticalType::maximum) continue;
      for (int side : {1, -1}) {
        auto h = classify_heteroclinic(metric, cp, side, cfg.t_max);
        Json e = to_json(h);
        trs.push_back(std::move(h.trajectory));
        items.push_back({{"start", to_json(cp)}, {"heteroclinic", std::move(e)}});
      }
    }
  }
  std::vector<const Trajectory*> ptrs;
  for (std::size_t i = 0; i < trs.size(); ++i) {
    const std::string file = numbered("boundary", i, "csv");
    write_trajectory(cfg.out / file, metric, trs[i]);
    items[i]["file"] = file;
    items[i]["summary"] = trajectory_summary(trs[i]);
    ptrs.push_back(&trs[i]);
  }
  write_json(cfg.out / "boundary_flow.json", Json{{"trajectories", items}});
  portrait(cfg.out / "boundary_flow.svg", metric, ptrs, "theta",
           "boundary flow in the (phi, theta) plane");
  log << "boundary-flow: " << trs.size() << " trajectories\n";
  return 0;
}

int task_expmap(const CuspMetric& metric, const RunConfig& cfg, std::ostream& log) {
  AtlasOptions ao;
  ao.tol = cfg.tol;
  const auto atlas = build_atlas(metric, cfg.tau0, cfg.fan_size, ao);
  log << "expmap: atlas of " << atlas.geodesics.size() << " geodesics\n";
  write_atlas(cfg.out / "atlas", metric, atlas);

  write_json(cfg.out / "injectivity.json", to_json(injectivity_report(atlas, cfg.r_levels)));
  write_json(cfg.out / "surjectivity.json", to_json(surjectivity_report(atlas, cfg.grid)));

  Json het = Json::array();
  if (!metric.constant_S()) {
    for (const auto& cp : atlas.critical) {
      if (cp.type != CriticalType::maximum) continue;
      for (int side : {1, -1}) {
        Json e = to_json(classify_heteroclinic(metric, cp, side, cfg.heteroclinic_t_max));
        e["max"] = to_json(cp);
        het.push_back(std::move(e));
      }
    }
  }
  write_json(cfg.out / "heteroclinic.json",
             Json{{"constant_S", metric.constant_S()}, {"trajectories", het}});

  Json disc = Json::array();
  for (const auto& d : discontinuity_probe(atlas, 0.5 * cfg.tau0)) disc.push_back(to_json(d));
  write_json(cfg.out / "discontinuity.json", Json{{"tau", 0.5 * cfg.tau0}, {"probes", disc}});

  std::vector<const Trajectory*> ptrs;
  for (const auto& g : atlas.geodesics) ptrs.push_back(&g.traj);
  portrait(cfg.out / "expmap.svg", metric, ptrs, "r", "exponential map atlas in the (phi, r) plane");
  log << "expmap: reports written\n";
  return 0;
}

int task_verify(const CuspMetric& metric, const RunConfig& cfg, std::ostream& log) {
  const auto suites = verify_suites(metric, cfg, log);
  Json js = Json::array();
  bool all = true;
  for (const auto& s : suites) {
    js.push_back({{"suite", s.name}, {"pass", s.pass}, {"checks", s.checks}});
    all = all && s.pass;
    log << "verify: " << s.name << (s.pass ? " pass" : " FAIL") << '\n';
  }
  write_json(cfg.out / "verify.json", Json{{"pass", all}, {"suites", js}});
  return all ? 0 : 3;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.task) throw ConfigError("no task given");
  std::filesystem::create_directories(cfg.out);
  const CuspMetric metric = build_metric(cfg);
  for (const auto& w : metric.warnings) log << "warning: " << w << '\n';
  switch (*cfg.task) {
    case Task::analyze: return task_analyze(metric, cfg, log);
    case Task::trace: return task_trace(metric, cfg, log);
    case Task::boundary_flow: return task_boundary_flow(metric, cfg, log);
    case Task::expmap: return task_expmap(metric, cfg, log);
    case Task::verify: return task_verify(metric, cfg, log);
  }
  return 1;
}

namespace {

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cuspgeo: geodesics of cusp metrics near the singular boundary"};
  std::string task_name, config_path, out_dir;
  app.add_option("task", task_name, "analyze | trace | boundary-flow | expmap | verify")->required();
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  RunConfig cfg;
  try {
    const auto task = task_from_string(task_name);
    if (!task) throw ConfigError("unknown task '" + task_name + "'");
    cfg = load_config(config_path);
    if (cfg.task && *cfg.task != *task)
      throw ConfigError("task '" + task_name + "' conflicts with config task '" +
                        to_string(*cfg.task) + "'");
    cfg.task = *task;
    if (!out_dir.empty()) cfg.out = out_dir;
    std::filesystem::create_directories(cfg.out);
  } catch (const std::exception& e) {
    std::cerr << "cuspgeo: " << e.what() << '\n';
    return 1;
  }

  std::ofstream logfile(cfg.out / "run.log");
  logfile << "start " << now_utc() << " task " << task_name << " config " << config_path << '\n';
  int code = 0;
  try {
    code = run(cfg, logfile);
  } catch (const ConfigError& e) {
    std::cerr << "cuspgeo: " << e.what() << '\n';
    code = 1;
  } catch (const std::exception& e) {
    std::cerr << "cuspgeo: " << e.what() << '\n';
    logfile << "error: " << e.what() << '\n';
    code = 2;
  }
  logfile << "end " << now_utc() << " exit " << code << '\n';
  if (code == 3) std::cerr << "cuspgeo: verification failed; see verify.json\n";
  return code;
}

}  // namespace cuspgeo::cli
