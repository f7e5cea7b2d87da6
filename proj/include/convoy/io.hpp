#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "convoy/convoy_sim.hpp"
#include "convoy/preview_path.hpp"
#include "convoy/stability.hpp"
#include "convoy/tracking_errors.hpp"

namespace convoy::io {

using nlohmann::json;

/// Shortest round-trip decimal representation.
std::string format_number(double v);

void write_trace_csv(std::ostream& out, const ConvoyTrace& trace);
json report_to_json(const StringStabilityReport& report);

json segment_to_json(const PathSegment<double>& seg);
PathSegment<double> segment_from_json(const json& j);
json spline_to_json(const ArcSpline<double>& spline);
ArcSpline<double> spline_from_json(const json& j);
json errors_to_json(const ErrorSignals<double>& e);

/// CSV with header `source,x,y,t`; source is `lead` or `preceding`.
std::vector<GpsSample> read_samples_csv(std::istream& in);
/// CSV with header `t,vx` on a uniform time grid.
SpeedProfile read_speed_profile_csv(std::istream& in);

/// Rows `ke,ktheta,komega,speed,class` for each region.
void write_region_csv(std::ostream& out, const std::vector<StabRegion>& regions);
json region_summary(const StabRegion& region, const Gains<double>& probe);

/// Every recognised config key with its unit, for --help output.
const std::vector<std::pair<std::string, std::string>>& config_keys();

/// Applies a JSON object onto `base`. Unknown keys raise ErrorKind::Config naming the key.
ConvoyConfig apply_config(const json& j, ConvoyConfig base = {});

}  // namespace convoy::io
