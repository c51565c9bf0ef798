#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cuspgeo/cli.hpp"

namespace cuspgeo::cli {

namespace {

using nlohmann::json;

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
}

double get_number(const json& obj, const char* key, const std::string& where, double dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("'" + where + "." + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& where, int dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError("'" + where + "." + key + "' must be an integer");
  return v.get<int>();
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError("'" + where + "." + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_numbers(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return {};
  const auto& v = obj.at(key);
  const std::string name = "'" + where + "." + key + "'";
  if (!v.is_array()) throw ConfigError(name + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(name + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

SeriesSpec parse_series(const json& j, const std::string& where) {
  allow_keys(j, where, {"mean", "cos", "sin"});
  SeriesSpec s;
  s.mean = get_number(j, "mean", where, 0.0);
  s.cos = get_numbers(j, "cos", where);
  s.sin = get_numbers(j, "sin", where);
  return s;
}

MetricSpec parse_metric(const json& j) {
  if (!j.is_object()) throw ConfigError("metric: expected an object");
  int sources = 0;
  for (const char* key : {"preset", "fourier", "curve_csv"}) sources += j.contains(key);
  if (sources == 0) throw ConfigError("metric: need one of 'preset', 'fourier', 'curve_csv'");
  if (sources > 1) throw ConfigError("metric: conflicting sources; give exactly one of 'preset', 'fourier', 'curve_csv'");

  MetricSpec m;
  if (j.contains("preset")) {
    m.source = MetricSpec::Source::preset;
    m.preset = get_string(j, "preset", "metric");
    if (m.preset == "circle") {
      allow_keys(j, "metric", {"preset", "R"});
      m.R = get_number(j, "R", "metric", 1.0);
      if (!(m.R > 0.0)) throw ConfigError("'metric.R' must be positive");
    } else if (m.preset == "offset_circle") {
      allow_keys(j, "metric", {"preset", "c"});
      m.c = get_number(j, "c", "metric", 2.0);
      if (!(m.c > 0.0)) throw ConfigError("'metric.c' must be positive");
    } else if (m.preset == "ellipse") {
      allow_keys(j, "metric", {"preset", "c", "b"});
      m.c = get_number(j, "c", "metric", 2.0);
      m.b = get_number(j, "b", "metric", 1.0);
      if (!(m.c > 0.0 && m.b > 0.0)) throw ConfigError("'metric.c' and 'metric.b' must be positive");
    } else {
      throw ConfigError("'metric.preset': unknown preset '" + m.preset +
                        "' (circle, offset_circle, ellipse)");
    }
  } else if (j.contains("fourier")) {
    allow_keys(j, "metric", {"fourier"});
    const auto& f = j.at("fourier");
    allow_keys(f, "metric.fourier", {"period", "S", "C"});
    m.source = MetricSpec::Source::fourier;
    m.period = get_number(f, "period", "metric.fourier", 0.0);
    if (m.period < 0.0) throw ConfigError("'metric.fourier.period' must be positive");
    if (!f.contains("S")) throw ConfigError("metric.fourier: missing 'S'");
    m.S = parse_series(f.at("S"), "metric.fourier.S");
    if (f.contains("C")) m.C = parse_series(f.at("C"), "metric.fourier.C");
  } else {
    allow_keys(j, "metric", {"curve_csv"});
    m.source = MetricSpec::Source::curve_csv;
    m.curve_csv = get_string(j, "curve_csv", "metric");
  }
  return m;
}

}  // namespace

std::string to_string(Task t) {
  switch (t) {
    case Task::analyze: return "analyze";
    case Task::trace: return "trace";
    case Task::boundary_flow: return "boundary-flow";
    case Task::expmap: return "expmap";
    case Task::verify: return "verify";
  }
  return "?";
}

std::optional<Task> task_from_string(const std::string& s) {
  for (Task t : {Task::analyze, Task::trace, Task::boundary_flow, Task::expmap, Task::verify})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, "config", {"metric", "k", "task", "tol", "fan_size", "tau0", "r_levels", "out",
                           "trace", "boundary_flow", "expmap", "verify"});
  RunConfig cfg;
  if (!j.contains("metric")) throw ConfigError("config: missing 'metric'");
  cfg.metric = parse_metric(j.at("metric"));
  cfg.k = get_int(j, "k", "config", 2);
  if (cfg.k < 2) throw ConfigError("'config.k' must be >= 2");
  if (j.contains("task")) {
    const auto t = task_from_string(get_string(j, "task", "config"));
    if (!t) throw ConfigError("'config.task' must be one of analyze, trace, boundary-flow, expmap, verify");
    cfg.task = *t;
  }
  cfg.tol = get_number(j, "tol", "config", cfg.tol);
  if (!(cfg.tol > 0.0)) throw ConfigError("'config.tol' must be positive");
  cfg.fan_size = get_int(j, "fan_size", "config", cfg.fan_size);
  if (cfg.fan_size < 8) throw ConfigError("'config.fan_size' must be >= 8");
  cfg.tau0 = get_number(j, "tau0", "config", cfg.tau0);
  if (!(cfg.tau0 > 0.0)) throw ConfigError("'config.tau0' must be positive");
  if (j.contains("r_levels")) {
    cfg.r_levels = get_numbers(j, "r_levels", "config");
    for (double r : cfg.r_levels)
      if (!(r > 0.0)) throw ConfigError("'config.r_levels' entries must be positive");
  }
  if (j.contains("out")) cfg.out = get_string(j, "out", "config");

  for (const char* sect : {"trace", "boundary_flow"}) {
    if (!j.contains(sect)) continue;
    const auto& t = j.at(sect);
    const std::string where = sect;
    allow_keys(t, where, {"starts", "t_max", "backward"});
    cfg.t_max = get_number(t, "t_max", where, cfg.t_max);
    if (!(cfg.t_max > 0.0)) throw ConfigError("'" + where + ".t_max' must be positive");
    if (t.contains("backward")) {
      if (!t.at("backward").is_boolean()) throw ConfigError("'" + where + ".backward' must be a boolean");
      cfg.backward = t.at("backward").get<bool>();
    }
    if (t.contains("starts")) {
      const auto& arr = t.at("starts");
      if (!arr.is_array()) throw ConfigError("'" + where + ".starts' must be an array");
      for (const auto& s : arr) {
        const std::string w = where + ".starts[]";
        if (std::string(sect) == "trace")
          allow_keys(s, w, {"r", "phi", "theta"});
        else
          allow_keys(s, w, {"phi", "theta"});
        TraceStart ts;
        ts.r = get_number(s, "r", w, 0.0);
        ts.phi = get_number(s, "phi", w, 0.0);
        ts.theta = get_number(s, "theta", w, 0.0);
        if (ts.r < 0.0) throw ConfigError("'" + w + ".r' must be nonnegative");
        cfg.starts.push_back(ts);
      }
    }
  }
  if (j.contains("expmap")) {
    const auto& e = j.at("expmap");
    allow_keys(e, "expmap", {"grid", "heteroclinic_t_max"});
    cfg.heteroclinic_t_max = get_number(e, "heteroclinic_t_max", "expmap", cfg.heteroclinic_t_max);
    if (e.contains("grid")) {
      const auto& g = e.at("grid");
      allow_keys(g, "expmap.grid", {"r_min", "r_max", "n_r", "n_phi"});
      cfg.grid.r_min = get_number(g, "r_min", "expmap.grid", cfg.grid.r_min);
      cfg.grid.r_max = get_number(g, "r_max", "expmap.grid", cfg.grid.r_max);
      cfg.grid.n_r = get_int(g, "n_r", "expmap.grid", cfg.grid.n_r);
      cfg.grid.n_phi = get_int(g, "n_phi", "expmap.grid", cfg.grid.n_phi);
      if (!(cfg.grid.r_min > 0.0 && cfg.grid.r_max > cfg.grid.r_min && cfg.grid.n_r > 0 &&
            cfg.grid.n_phi > 0))
        throw ConfigError("'expmap.grid' must satisfy 0 < r_min < r_max and positive counts");
    }
  }
  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    allow_keys(v, "verify", {"samples", "seed"});
    cfg.samples = get_int(v, "samples", "verify", cfg.samples);
    if (cfg.samples < 1) throw ConfigError("'verify.samples' must be >= 1");
    if (v.contains("seed")) {
      if (!v.at("seed").is_number_unsigned()) throw ConfigError("'verify.seed' must be a nonnegative integer");
      cfg.seed = v.at("seed").get<unsigned long long>();
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

CuspMetric build_metric(const RunConfig& cfg) {
  const auto& m = cfg.metric;
  try {
    switch (m.source) {
      case MetricSpec::Source::preset: {
        if (m.preset == "circle") return metric_from_boundary_curve(presets::circle(m.R), cfg.k);
        if (m.preset == "offset_circle")
          return metric_from_boundary_curve(presets::offset_circle(m.c), cfg.k);
        return metric_from_boundary_curve(presets::ellipse(m.c, m.b), cfg.k);
      }
      case MetricSpec::Source::fourier: {
        const double L = m.period > 0.0 ? m.period : 2.0 * std::numbers::pi;
        BoundaryFunction S(L, m.S.mean, m.S.cos, m.S.sin);
        BoundaryFunction C = m.C ? BoundaryFunction(L, m.C->mean, m.C->cos, m.C->sin)
                                 : BoundaryFunction::constant(1.0, L);
        return make_model_metric(cfg.k, std::move(S), std::move(C));
      }
      case MetricSpec::Source::curve_csv:
        return metric_from_boundary_curve(read_curve_csv(m.curve_csv), cfg.k);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("metric: ") + e.what());
  }
  throw ConfigError("metric: no source");
}

}  // namespace cuspgeo::cli
