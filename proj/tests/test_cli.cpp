#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "cuspgeo/cli.hpp"

using namespace cuspgeo;
using namespace cuspgeo::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cuspgeo_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int call_main(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(int(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config defaults and sections") {
  const auto cfg = parse_config(R"({"metric": {"preset": "ellipse", "c": 3, "b": 1.5},
    "k": 3, "task": "boundary-flow", "fan_size": 32,
    "boundary_flow": {"starts": [{"phi": 1.0, "theta": 0.5}], "t_max": 12},
    "verify": {"samples": 4, "seed": 7}})");
  CHECK(cfg.metric.preset == "ellipse");
  CHECK(cfg.metric.c == 3.0);
  CHECK(cfg.metric.b == 1.5);
  CHECK(cfg.k == 3);
  CHECK(cfg.task == Task::boundary_flow);
  CHECK(cfg.fan_size == 32);
  CHECK(cfg.tol == 1e-10);
  REQUIRE(cfg.starts.size() == 1);
  CHECK(cfg.starts[0].theta == 0.5);
  CHECK(cfg.t_max == 12.0);
  CHECK(cfg.samples == 4);
  CHECK(cfg.seed == 7u);

  const auto f = parse_config(R"({"metric": {"fourier": {"S": {"mean": 2, "cos": [0.5]}}}})");
  CHECK(f.metric.source == MetricSpec::Source::fourier);
  CHECK_FALSE(f.metric.C);
  const auto m = build_metric(f);
  CHECK(m.S()(0.0) == doctest::Approx(2.5));
  CHECK(m.C()(1.0) == 1.0);
}

TEST_CASE("config errors") {
  auto msg = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(msg(R"({"metric": {"preset": "circle"}, "colour": 1})") == "unknown key 'config.colour'");
  CHECK(msg(R"({"metric": {"preset": "circle", "c": 2}})") == "unknown key 'metric.c'");
  CHECK(msg(R"({"metric": {"preset": "circle", "fourier": {}}})").find("conflicting sources") !=
        std::string::npos);
  CHECK(msg(R"({"metric": {}})").find("need one of") != std::string::npos);
  CHECK(msg(R"({"metric": {"preset": "circle"}, "tol": "small"})") == "'config.tol' must be a number");
  CHECK(msg(R"({"metric": {"preset": "circle"}, "k": 1})") == "'config.k' must be >= 2");
  CHECK(msg(R"({"metric": {"preset": "square"}})").find("unknown preset") != std::string::npos);
  CHECK(msg(R"({"metric": {"preset": "circle"}, "task": "plot"})").find("must be one of") !=
        std::string::npos);
  CHECK(msg("{not json").find("not valid JSON") != std::string::npos);
  CHECK(msg(R"({"metric": {"preset": "circle"}, "trace": {"starts": [{"r": -1}]}})")
            .find("nonnegative") != std::string::npos);

  RunConfig cfg;
  cfg.metric.source = MetricSpec::Source::curve_csv;
  cfg.metric.curve_csv = "/nonexistent.csv";
  CHECK_THROWS_AS(build_metric(cfg), ConfigError);
}

TEST_CASE("task names") {
  for (Task t : {Task::analyze, Task::trace, Task::boundary_flow, Task::expmap, Task::verify})
    CHECK(task_from_string(to_string(t)) == t);
  CHECK_FALSE(task_from_string("boundary_flow"));
}

TEST_CASE("svg rendering") {
  Window w;
  w.x0 = 0.0;
  w.x1 = 2.0;
  w.y0 = -1.0;
  w.y1 = 1.0;
  Polyline line;
  line.points = {{0.0, 0.0}, {0.5, 0.5}, {1.0, 5.0}, {1.5, 0.5}, {2.0, 0.0}};
  CriticalPoint mx;
  mx.phi0 = 1.0;
  mx.type = CriticalType::maximum;
  const auto a = render_svg({line}, w, {mx}, "test <plot>");
  const auto b = render_svg({line}, w, {mx}, "test <plot>");
  CHECK(a == b);
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("test &lt;plot&gt;") != std::string::npos);
  // the excursion to y = 5 leaves the window and splits the line in two
  std::size_t count = 0;
  for (auto pos = a.find("<polyline"); pos != std::string::npos; pos = a.find("<polyline", pos + 1)) ++count;
  CHECK(count == 2);
  CHECK(a.find("#c0392b") != std::string::npos);
  CHECK_THROWS_AS(render_svg({}, w, {}, "x"), std::invalid_argument);
  w.x1 = w.x0;
  CHECK_THROWS_AS(render_svg({line}, w, {}, "x"), std::invalid_argument);
}

TEST_CASE("analyze and boundary-flow runs") {
  const auto dir = scratch("analyze");
  auto cfg = parse_config(R"({"metric": {"preset": "offset_circle", "c": 2}})");
  cfg.out = dir;
  cfg.task = Task::analyze;
  std::ostringstream log;
  CHECK(run(cfg, log) == 0);
  const auto j = Json::parse(slurp(dir / "analyze.json"));
  CHECK(j["critical_points"].size() == 2);
  CHECK(j["critical_points"][1]["eigen"]["regime"] == "spiral");

  cfg.task = Task::boundary_flow;
  cfg.t_max = 10.0;
  CHECK(run(cfg, log) == 0);
  CHECK(fs::exists(dir / "boundary_flow.json"));
  CHECK(fs::exists(dir / "boundary_flow.svg"));
  CHECK(fs::exists(dir / "boundary_000.csv"));
  fs::remove_all(dir);
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("main");
  const auto good = dir / "good.json", bad = dir / "bad.json";
  std::ofstream(good) << R"({"metric": {"preset": "circle"}, "task": "analyze"})";
  std::ofstream(bad) << R"({"metric": {"preset": "circle"}, "bogus": 1})";
  const auto out = (dir / "out").string();
  CHECK(call_main({"cuspgeo", "analyze", "--config", good.string(), "--out", out}) == 0);
  CHECK(fs::exists(fs::path(out) / "analyze.json"));
  CHECK(fs::exists(fs::path(out) / "run.log"));
  CHECK(call_main({"cuspgeo", "analyze", "--config", bad.string(), "--out", out}) == 1);
  CHECK(call_main({"cuspgeo", "expmap", "--config", good.string(), "--out", out}) == 1);
  CHECK(call_main({"cuspgeo", "plot", "--config", good.string(), "--out", out}) == 1);
  CHECK(call_main({"cuspgeo", "analyze"}) == 1);
  fs::remove_all(dir);
}
