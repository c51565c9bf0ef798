#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cuspgeo/analysis.hpp"
#include "cuspgeo/expmap.hpp"

namespace cuspgeo {

using Json = nlohmann::ordered_json;

Json to_json(const CriticalPoint& cp);
Json to_json(const EigenData& e);
Json to_json(const BarrierReport& b);
Json to_json(const ConvexityReport& c);
/// The trajectory itself is not included.
Json to_json(const HeteroclinicReport& h);
Json to_json(const InjectivityReport& r);
Json to_json(const SurjectivityReport& r);
Json to_json(const BackwardCheck& b);
Json to_json(const DiscontinuityProbe& d);

/// Critical points with eigen data, barrier reports for every max/min pair and, for metrics
/// built from a curve, the convexity bound.
Json analyze(const CuspMetric& metric);

/// Index entries (label, start critical point, stop reason, file) for an atlas.
Json atlas_index(const ExpAtlas& atlas);

/// One CSV per geodesic (geodesic_NNNN.csv) plus atlas_index.json.
void write_atlas(const std::filesystem::path& dir, const CuspMetric& metric,
                 const ExpAtlas& atlas);

/// Two-space indented dump with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

std::string geodesic_file_name(std::size_t index);

}  // namespace cuspgeo
