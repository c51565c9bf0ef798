#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cuspgeo/dynamics.hpp"
#include "cuspgeo/expmap.hpp"
#include "cuspgeo/report.hpp"

namespace cuspgeo::cli {

/// Schema violation or conflicting settings; maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Task { analyze, trace, boundary_flow, expmap, verify };
std::string to_string(Task t);
std::optional<Task> task_from_string(const std::string& s);

struct SeriesSpec {
  double mean = 0.0;
  std::vector<double> cos, sin;
};

struct MetricSpec {
  enum class Source { preset, fourier, curve_csv } source = Source::preset;
  std::string preset;   ///< circle | offset_circle | ellipse
  double R = 1.0;       ///< circle radius
  double c = 2.0;       ///< offset_circle centre, ellipse semi-axis along v
  double b = 1.0;       ///< ellipse semi-axis along w
  double period = 0.0;  ///< fourier: 0 means 2 pi
  SeriesSpec S;
  std::optional<SeriesSpec> C;  ///< fourier: absent means C = 1
  std::string curve_csv;
};

struct TraceStart {
  double r = 0.0, phi = 0.0, theta = 0.0;
};

struct RunConfig {
  MetricSpec metric;
  int k = 2;
  std::optional<Task> task;
  double tol = 1e-10;
  int fan_size = 64;
  double tau0 = 0.05;
  std::vector<double> r_levels{1e-2, 1e-3};
  std::filesystem::path out = "out";

  // trace / boundary-flow
  std::vector<TraceStart> starts;
  double t_max = 20.0;
  bool backward = false;

  // expmap
  SurjectivityGrid grid;
  double heteroclinic_t_max = 60.0;

  // verify
  int samples = 10;
  unsigned long long seed = 12345;
};

/// Strict JSON parse: unknown keys, wrong types and conflicting metric sources throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError for an unreadable curve file or invalid parameters.
CuspMetric build_metric(const RunConfig& cfg);

struct Window {
  std::string x_axis = "phi", y_axis = "theta";  ///< y: theta or r
  double x0 = 0.0, x1 = 1.0, y0 = -1.0, y1 = 1.0;
};

struct Polyline {
  std::vector<std::array<double, 2>> points;
  std::string color = "#1f4e79";
};

/// Fixed 800x600 viewBox; polylines are split where they leave the window; markers are drawn
/// as circles (maxima red, minima blue). Throws std::invalid_argument for an empty window or
/// no polylines.
std::string render_svg(const std::vector<Polyline>& lines, const Window& window,
                       const std::vector<CriticalPoint>& markers, const std::string& title);

/// Polyline of (phi, theta) or (phi, r) from a trajectory, depending on window.y_axis.
Polyline trajectory_polyline(const Trajectory& tr, const Window& window);

struct SuiteResult {
  std::string name;
  Json checks = Json::array();
  bool pass = true;
  void add(const std::string& check, bool ok, Json detail);
};

/// Invariant suite for one metric; deterministic for fixed cfg.seed.
std::vector<SuiteResult> verify_suites(const CuspMetric& metric, const RunConfig& cfg,
                                       std::ostream& log);

/// Runs the configured task, writing files into cfg.out and progress lines to `log`.
/// Returns the process exit code (0 ok, 2 numerical failure, 3 verification failure).
int run(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point.
int main(int argc, char** argv);

}  // namespace cuspgeo::cli
