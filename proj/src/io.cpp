#include "convoy/io.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace convoy::io {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

void write_trace_csv(std::ostream& out, const ConvoyTrace& trace) {
  out << "t,vehicle,x,y,heading,yaw_rate,vx,e_lat,heading_error,heading_error_rate,"
         "delta_ff,delta_fb,delta_c,delta_f,segment,radius\n";
  for (const TraceRecord& r : trace) {
    out << format_number(r.t) << ',' << r.vehicle << ',' << format_number(r.ground.x) << ','
        << format_number(r.ground.y) << ',' << format_number(r.ground.heading) << ','
        << format_number(r.ground.yaw_rate) << ',' << format_number(r.ground.vx) << ','
        << format_number(r.errors.e_lat) << ',' << format_number(r.errors.heading_error) << ','
        << format_number(r.errors.heading_error_rate) << ',' << format_number(r.delta_ff) << ','
        << format_number(r.delta_fb) << ',' << format_number(r.delta_c) << ',' << format_number(r.delta_f) << ','
        << to_string(r.segment) << ',' << format_number(r.radius) << '\n';
  }
}

json report_to_json(const StringStabilityReport& report) {
  return {{"peaks", report.peaks},
          {"peak_times", report.peak_times},
          {"road_times", report.road_times},
          {"first_follower", report.first_follower},
          {"tolerance", report.tolerance},
          {"string_stable", report.monotone}};
}

json segment_to_json(const PathSegment<double>& seg) {
  return std::visit(
      [](const auto& s) -> json {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Line<double>>) {
          return {{"kind", "line"},
                  {"anchor", {s.anchor.x(), s.anchor.y()}},
                  {"direction", {s.direction.x(), s.direction.y()}},
                  {"span", s.length}};
        } else {
          return {{"kind", "arc"},
                  {"center", {s.center.x(), s.center.y()}},
                  {"radius", s.radius},
                  {"curvature", s.curvature},
                  {"start_angle", s.start_angle},
                  {"sweep", s.sweep},
                  {"span", s.length()}};
        }
      },
      seg);
}

PathSegment<double> segment_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  auto point = [&](const char* key) {
    const auto& a = j.at(key);
    return Point<double>(a.at(0).get<double>(), a.at(1).get<double>());
  };
  if (kind == "line") return Line<double>{point("anchor"), point("direction"), j.at("span").get<double>()};
  if (kind == "arc")
    return Arc<double>{point("center"), j.at("radius").get<double>(), j.at("curvature").get<double>(),
                       j.at("start_angle").get<double>(), j.at("sweep").get<double>()};
  throw Error(ErrorKind::Config, "kind: unknown segment kind '" + kind + "'");
}

json spline_to_json(const ArcSpline<double>& spline) {
  json segs = json::array();
  for (const auto& s : spline.segments) segs.push_back(segment_to_json(s));
  return {{"segments", segs}};
}

ArcSpline<double> spline_from_json(const json& j) {
  ArcSpline<double> out;
  for (const auto& s : j.at("segments")) out.segments.push_back(segment_from_json(s));
  return out;
}

json errors_to_json(const ErrorSignals<double>& e) {
  return {{"e_lat", e.e_lat},
          {"heading_error", e.heading_error},
          {"heading_error_rate", e.heading_error_rate},
          {"reference_heading", e.reference_heading},
          {"curvature", e.curvature}};
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return cells;
}

double parse_number(const std::string& s, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Config, column + ": not a number: '" + s + "'");
  }
}

std::vector<std::vector<std::string>> read_table(std::istream& in, const std::vector<std::string>& header) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Config, "csv: missing header row");
  if (split_csv(line) != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorKind::Config, "csv: expected header '" + want + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) throw Error(ErrorKind::Config, "csv: wrong column count in '" + line + "'");
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::vector<GpsSample> read_samples_csv(std::istream& in) {
  std::vector<GpsSample> out;
  for (const auto& row : read_table(in, {"source", "x", "y", "t"})) {
    Source src;
    if (row[0] == "lead") src = Source::Lead;
    else if (row[0] == "preceding") src = Source::Preceding;
    else throw Error(ErrorKind::Config, "source: expected 'lead' or 'preceding', got '" + row[0] + "'");
    out.push_back({parse_number(row[1], "x"), parse_number(row[2], "y"), src, parse_number(row[3], "t")});
  }
  return out;
}

SpeedProfile read_speed_profile_csv(std::istream& in) {
  const auto rows = read_table(in, {"t", "vx"});
  if (rows.size() < 2) throw Error(ErrorKind::Config, "speed profile: need at least two rows");
  SpeedProfile prof;
  prof.t0 = parse_number(rows[0][0], "t");
  prof.dt = parse_number(rows[1][0], "t") - prof.t0;
  if (!(prof.dt > 0)) throw Error(ErrorKind::Config, "t: must increase");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double t = parse_number(rows[i][0], "t");
    if (std::abs(t - (prof.t0 + prof.dt * static_cast<double>(i))) > 1e-6 * std::max(1.0, std::abs(t)))
      throw Error(ErrorKind::Config, "t: samples must be uniformly spaced");
    prof.v.push_back(parse_number(rows[i][1], "vx"));
  }
  return prof;
}

void write_region_csv(std::ostream& out, const std::vector<StabRegion>& regions) {
  out << "ke,ktheta,komega,speed,class\n";
  for (const StabRegion& r : regions) {
    const GridSpec& g = r.grid;
    const std::string speed = r.speeds.size() == 1 ? format_number(r.speeds.front()) : "all";
    for (int i = 0; i < g.ke.count; ++i)
      for (int j = 0; j < g.ktheta.count; ++j)
        for (int l = 0; l < g.komega.count; ++l)
          out << format_number(g.ke.at(i)) << ',' << format_number(g.ktheta.at(j)) << ','
              << format_number(g.komega.at(l)) << ',' << speed << ',' << to_string(r.at(i, j, l)) << '\n';
  }
}

json region_summary(const StabRegion& region, const Gains<double>& probe) {
  const GridSpec& g = region.grid;
  double lo[3] = {INFINITY, INFINITY, INFINITY}, hi[3] = {-INFINITY, -INFINITY, -INFINITY};
  for (int i = 0; i < g.ke.count; ++i)
    for (int j = 0; j < g.ktheta.count; ++j)
      for (int l = 0; l < g.komega.count; ++l) {
        if (region.at(i, j, l) != StabilityClass::Stable) continue;
        const double v[3] = {g.ke.at(i), g.ktheta.at(j), g.komega.at(l)};
        for (int d = 0; d < 3; ++d) {
          lo[d] = std::min(lo[d], v[d]);
          hi[d] = std::max(hi[d], v[d]);
        }
      }
  json bbox = nullptr;
  if (region.count(StabilityClass::Stable) > 0)
    bbox = {{"ke", {lo[0], hi[0]}}, {"ktheta", {lo[1], hi[1]}}, {"komega", {lo[2], hi[2]}}};

  // Classification of the probe gains at the nearest grid node.
  auto nearest = [](const Axis& a, double v) {
    if (a.count <= 1) return 0;
    const double u = (v - a.lo) / (a.hi - a.lo) * (a.count - 1);
    return std::clamp(static_cast<int>(std::lround(u)), 0, a.count - 1);
  };
  const int pi = nearest(g.ke, probe.ke), pj = nearest(g.ktheta, probe.ktheta), pl = nearest(g.komega, probe.komega);
  return {{"speeds", region.speeds},
          {"points", region.classes.size()},
          {"stable", region.count(StabilityClass::Stable)},
          {"unstable", region.count(StabilityClass::Unstable)},
          {"boundary", region.count(StabilityClass::Boundary)},
          {"stable_bounding_box", bbox},
          {"probe_gains", {probe.ke, probe.ktheta, probe.komega}},
          {"probe_grid_node", {g.ke.at(pi), g.ktheta.at(pj), g.komega.at(pl)}},
          {"probe_class", to_string(region.at(pi, pj, pl))},
          {"real_root_boundary", "ke = 0"}};
}

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"vehicles", "convoy size including the lead (count, >= 2)"},
      {"preset", "vehicle parameter preset (\"mkz\")"},
      {"mass", "vehicle mass (kg)"},
      {"yaw_inertia", "yaw moment of inertia (kg m^2)"},
      {"cf", "front axle cornering stiffness (N/rad)"},
      {"cr", "rear axle cornering stiffness (N/rad)"},
      {"a", "CG to front axle (m)"},
      {"b", "CG to rear axle (m)"},
      {"zeta", "steering actuator damping ratio (-)"},
      {"omega_n", "steering actuator natural frequency (rad/s)"},
      {"architecture", "\"composite\" or \"separate\""},
      {"alpha", "weight on the preceding-vehicle trajectory, separate only (-, [0,1])"},
      {"gains", "[ke (rad/m), ktheta (rad/rad), komega (rad s/rad)]"},
      {"lead_data", "followers receive lead broadcasts (bool)"},
      {"speed", "constant longitudinal speed (m/s)"},
      {"spacing", "initial inter-vehicle spacing (m)"},
      {"gps_hz", "broadcast rate (Hz, <= 20)"},
      {"control_hz", "controller rate (Hz)"},
      {"physics_dt", "integration step (s)"},
      {"gps_noise", "broadcast position noise standard deviation (m)"},
      {"latency", "communication latency, rounded up to GPS periods (s)"},
      {"seed", "noise seed (integer)"},
      {"lane_changes", "[[start, end], ...] lane-change windows of the lead reference (s)"},
      {"lane_offset", "lateral offset of the adjacent lane (m)"},
      {"duration", "simulated time (s)"},
      {"preview_length", "preview distance ahead of ego (m)"},
      {"behind_margin", "retention distance behind ego (m)"},
      {"epsilon", "line-prefix threshold (m)"},
      {"max_steer", "steering command clamp (rad), null disables"},
      {"initial_offsets", "per-vehicle initial lateral offset (m)"},
      {"hold_time", "time a stale target is held before going straight (s)"},
      {"string_tolerance", "relative tolerance of the peak monotonicity check (-)"},
  };
  return keys;
}

ConvoyConfig apply_config(const json& j, ConvoyConfig c) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "config: top level must be an object");
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset != "mkz") throw Error(ErrorKind::Config, "preset: unknown preset '" + preset + "'");
    c.params = VehicleParams<double>::mkz();
    c.actuator = ActuatorParams<double>::mkz();
  }
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "preset") continue;
      else if (key == "vehicles") c.vehicles = value.get<int>();
      else if (key == "mass") c.params.mass = value.get<double>();
      else if (key == "yaw_inertia") c.params.yaw_inertia = value.get<double>();
      else if (key == "cf") c.params.cf = value.get<double>();
      else if (key == "cr") c.params.cr = value.get<double>();
      else if (key == "a") c.params.a = value.get<double>();
      else if (key == "b") c.params.b = value.get<double>();
      else if (key == "zeta") c.actuator.zeta = value.get<double>();
      else if (key == "omega_n") c.actuator.omega_n = value.get<double>();
      else if (key == "architecture") {
        const auto mode = value.get<std::string>();
        if (mode == "composite") c.architecture.mode = Architecture::Composite;
        else if (mode == "separate") c.architecture.mode = Architecture::Separate;
        else throw Error(ErrorKind::Config, "architecture: expected composite or separate");
      } else if (key == "alpha") c.architecture.alpha = value.get<double>();
      else if (key == "gains") {
        const auto g = value.get<std::vector<double>>();
        if (g.size() != 3) throw Error(ErrorKind::Config, "gains: expected three values");
        c.gains = {g[0], g[1], g[2]};
      } else if (key == "lead_data") c.lead_data = value.get<bool>();
      else if (key == "speed") c.speed = value.get<double>();
      else if (key == "spacing") c.spacing = value.get<double>();
      else if (key == "gps_hz") c.gps_hz = value.get<double>();
      else if (key == "control_hz") c.control_hz = value.get<double>();
      else if (key == "physics_dt") c.physics_dt = value.get<double>();
      else if (key == "gps_noise") c.gps_noise = value.get<double>();
      else if (key == "latency") c.latency = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "lane_changes") {
        c.schedule.clear();
        for (const auto& w : value) {
          const auto pair = w.get<std::vector<double>>();
          if (pair.size() != 2) throw Error(ErrorKind::Config, "lane_changes: each window is [start, end]");
          c.schedule.push_back({pair[0], pair[1]});
        }
      } else if (key == "lane_offset") c.lane_offset = value.get<double>();
      else if (key == "duration") c.duration = value.get<double>();
      else if (key == "preview_length") c.preview.preview_length = value.get<double>();
      else if (key == "behind_margin") c.preview.behind_margin = value.get<double>();
      else if (key == "epsilon") c.preview.epsilon = value.get<double>();
      else if (key == "max_steer") {
        if (value.is_null()) c.limits.max_angle.reset();
        else c.limits.max_angle = value.get<double>();
      } else if (key == "initial_offsets") c.initial_offsets = value.get<std::vector<double>>();
      else if (key == "hold_time") c.hold_time = value.get<double>();
      else if (key == "string_tolerance") c.string_tolerance = value.get<double>();
      else throw Error(ErrorKind::Config, key + ": unknown config key");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, key + ": " + e.what());
    }
  }
  return c;
}

}  // namespace convoy::io
