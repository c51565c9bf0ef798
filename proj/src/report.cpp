#include "cuspgeo/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace cuspgeo {

namespace {

// NaN and infinities become null
Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json condition(const BarrierCondition& c) { return {{"pass", c.pass}, {"margin", number(c.margin)}}; }

}  // namespace

Json to_json(const CriticalPoint& cp) {
  return {{"phi0", cp.phi0},
          {"type", to_string(cp.type)},
          {"S", cp.S_value},
          {"a", cp.a}};
}

Json to_json(const EigenData& e) {
  Json j{{"lambda1", e.lambda1.real()},
         {"lambda2_re", e.lambda2.real()},
         {"lambda2_im", e.lambda2.imag()},
         {"lambda3_re", e.lambda3.real()},
         {"lambda3_im", e.lambda3.imag()},
         {"nu2", {{"phi_re", e.nu2[0].real()}, {"phi_im", e.nu2[0].imag()},
                  {"theta_re", e.nu2[1].real()}, {"theta_im", e.nu2[1].imag()}}},
         {"nu3", {{"phi_re", e.nu3[0].real()}, {"phi_im", e.nu3[0].imag()},
                  {"theta_re", e.nu3[1].real()}, {"theta_im", e.nu3[1].imag()}}},
         {"regime", to_string(e.regime)},
         {"a", e.a},
         {"a_k", e.a_k},
         {"linearizability", to_string(e.label)}};
  if (e.lambda2_rational) j["lambda2_rational"] = {(*e.lambda2_rational)[0], (*e.lambda2_rational)[1]};
  if (e.lambda2.real() != 0.0 && e.lambda2.imag() == 0.0 && e.lambda3.imag() == 0.0)
    j["rho"] = e.lambda3.real() / e.lambda2.real();
  return j;
}

Json to_json(const BarrierReport& b) {
  return {{"phi_max", b.phi_max},
          {"phi_min", b.phi_min},
          {"orientation", b.orientation},
          {"barrier", b.barrier_used},
          {"grid", b.grid},
          {"cond_a", condition(b.cond_a)},
          {"cond_c", condition(b.cond_c)},
          {"cond_b", condition(b.cond_b)},
          {"cond_b_strict_at_min", condition(b.cond_b_strict_at_min)},
          {"worst_offset_a", b.worst_x_a},
          {"worst_offset_b", b.worst_x_b},
          {"pass", b.all_pass()}};
}

Json to_json(const ConvexityReport& c) {
  return {{"sup_Spp_direct", c.sup_Spp_direct},
          {"sup_Spp_curvature", c.sup_Spp_curvature},
          {"max_discrepancy", c.max_discrepancy},
          {"max_speed_error", c.max_speed_error},
          {"bound_satisfied", c.bound_satisfied}};
}

Json to_json(const HeteroclinicReport& h) {
  Json j{{"kind", to_string(h.kind)},
         {"side", h.side},
         {"phi_max", h.phi_max},
         {"phi_min", h.phi_min},
         {"t_origin", h.t_origin},
         {"crossings", h.crossings},
         {"crossings_by_t10", h.crossings_by_t10},
         {"last_interval", number(h.last_interval)},
         {"theta_at_min", number(h.theta_at_min)},
         {"energy_first_crossing", number(h.energy_first_crossing)},
         {"energy_next_max", number(h.energy_next_max)},
         {"energy_final_minus_min", number(h.energy_final_minus_min)}};
  return j;
}

Json to_json(const InjectivityReport& r) {
  Json levels = Json::array();
  for (const auto& lv : r.levels) {
    Json cr = Json::array();
    for (const auto& c : lv.crossings)
      cr.push_back({{"q_a", c.q_a}, {"q_b", c.q_b}, {"r", c.r}, {"phi", c.phi},
                    {"residual", c.residual}, {"located", c.located}});
    Json l{{"r", lv.r}, {"skipped", lv.skipped}};
    if (!lv.note.empty()) l["note"] = lv.note;
    l["reached"] = lv.reached;
    l["order_violations"] = lv.order_violations;
    l["near_coincidences"] = lv.near_coincidences;
    l["winding"] = lv.winding;
    l["min_gap"] = lv.min_gap;
    l["crossings"] = std::move(cr);
    levels.push_back(std::move(l));
  }
  Json j{{"verdict", r.verdict()}, {"order_preserved", r.order_preserved}};
  j["smallest_crossing_r"] = r.smallest_crossing_r ? Json(*r.smallest_crossing_r) : Json(nullptr);
  j["levels"] = std::move(levels);
  return j;
}

Json to_json(const SurjectivityReport& r) {
  Json unc = Json::array();
  for (const auto& c : r.uncovered) unc.push_back({c[0], c[1]});
  return {{"grid", {{"r_min", r.grid.r_min}, {"r_max", r.grid.r_max}, {"n_r", r.grid.n_r},
                    {"n_phi", r.grid.n_phi}}},
          {"fraction", r.fraction},
          {"uncovered", std::move(unc)}};
}

Json to_json(const BackwardCheck& b) {
  Json j{{"verdict", to_string(b.verdict)},
         {"phi", b.phi},
         {"r", b.r},
         {"residual_S_phi", b.residual_S_phi},
         {"residual_theta", b.residual_theta},
         {"nearest", b.nearest},
         {"nearest_phi0", number(b.nearest_phi0)},
         {"t_end", b.t_end}};
  if (!b.note.empty()) j["note"] = b.note;
  return j;
}

Json to_json(const DiscontinuityProbe& d) {
  return {{"label", d.label},
          {"phi_at_label", d.phi_at_label},
          {"phi_left", d.phi_left},
          {"phi_right", d.phi_right},
          {"jump", d.jump}};
}

Json analyze(const CuspMetric& metric) {
  Json j{{"k", metric.k()},
         {"length", metric.length()},
         {"sup_S", metric.sup_S()},
         {"inf_S", metric.inf_S()},
         {"constant_S", metric.constant_S()},
         {"validity_radius", metric.validity_radius()},
         {"domain_radius", metric.domain_radius()},
         {"a_k", a_k(metric.k())}};
  const auto cps = find_critical_points(metric);
  Json pts = Json::array();
  for (const auto& cp : cps.points) {
    Json p = to_json(cp);
    if (cp.type != CriticalType::degenerate) p["eigen"] = to_json(eigen_data(metric, cp));
    pts.push_back(std::move(p));
  }
  j["morse"] = !cps.constant_S && cps.morse();
  j["critical_points"] = std::move(pts);

  Json barriers = Json::array();
  if (!cps.constant_S && cps.morse()) {
    const std::size_t n = cps.points.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (cps.points[i].type != CriticalType::maximum) continue;
      for (std::size_t nb : {(i + 1) % n, (i + n - 1) % n}) {
        Json b = to_json(check_barrier(metric, cps.points[i], cps.points[nb]));
        b["max_index"] = i;
        b["min_index"] = nb;
        barriers.push_back(std::move(b));
      }
    }
  }
  j["barriers"] = std::move(barriers);
  if (metric.curve()) j["convexity"] = to_json(convexity_S_bound(*metric.curve()));
  j["warnings"] = metric.warnings;
  return j;
}

std::string geodesic_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "geodesic_%04zu.csv", index);
  return buf;
}

Json atlas_index(const ExpAtlas& atlas) {
  Json gs = Json::array();
  for (std::size_t i = 0; i < atlas.geodesics.size(); ++i) {
    const auto& g = atlas.geodesics[i];
    Json e{{"label", g.label}, {"file", geodesic_file_name(i)}};
    if (g.source >= 0) {
      e["start"] = to_json(atlas.critical[std::size_t(g.source)]);
    } else {
      e["start"] = {{"phi0", g.phi_start}, {"type", "constant-S"}};
    }
    e["alpha"] = number(g.alpha);
    e["stop"] = to_string(g.traj.stop);
    e["tau_end"] = g.traj.tau_end();
    e["richardson_deviation"] = number(g.traj.richardson_deviation);
    e["warning"] = g.traj.warning;
    gs.push_back(std::move(e));
  }
  return {{"tau0", atlas.tau0},
          {"eps", atlas.eps},
          {"constant_S", atlas.constant_S},
          {"label_period", atlas.label_period},
          {"warnings", atlas.warnings},
          {"geodesics", std::move(gs)}};
}

void write_atlas(const std::filesystem::path& dir, const CuspMetric& metric,
                 const ExpAtlas& atlas) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < atlas.geodesics.size(); ++i) {
    std::ofstream os(dir / geodesic_file_name(i));
    write_csv(os, metric, atlas.geodesics[i].traj);
  }
  write_json(dir / "atlas_index.json", atlas_index(atlas));
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace cuspgeo
