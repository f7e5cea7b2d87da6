#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convoy/controller.hpp"
#include "convoy/preview_path.hpp"
#include "convoy/stability.hpp"
#include "convoy/tracking_errors.hpp"
#include "convoy/vehicle_model.hpp"

namespace convoy {

/// One lane change: the lateral offset moves to `target_offset` between `start` and `end` (s).
struct LaneChangeWindow {
  double start;
  double end;
};

/// Lead-vehicle target: quintic lateral transitions in time, alternating between zero offset and
/// `lane_offset`, with the longitudinal position advancing at the speed profile.
class ReferencePath {
 public:
  ReferencePath(std::vector<LaneChangeWindow> schedule, double lane_offset, SpeedProfile speed);

  double lateral(double t) const;
  double lateral_rate(double t) const;
  double lateral_accel(double t) const;
  double longitudinal(double t) const;
  double speed(double t) const { return speed_.at(t); }
  Eigen::Vector2d position(double t) const { return {longitudinal(t), lateral(t)}; }
  double heading(double t) const;
  double curvature(double t) const;

  const std::vector<LaneChangeWindow>& schedule() const { return schedule_; }
  double lane_offset() const { return lane_offset_; }

 private:
  // Offset before window i; window i moves to level(i + 1).
  double level(std::size_t i) const { return i % 2 == 0 ? 0.0 : lane_offset_; }
  template <int Derivative>
  double lateral_impl(double t) const;

  std::vector<LaneChangeWindow> schedule_;
  double lane_offset_;
  SpeedProfile speed_;
  std::vector<double> distance_;  // cumulative distance at each profile sample
};

/// Validates the schedule (non-overlapping, ordered, inside [0, duration]) and builds the path.
ReferencePath make_reference(const std::vector<LaneChangeWindow>& schedule, double lane_offset,
                             const SpeedProfile& speed, std::optional<double> duration = std::nullopt);

struct ConvoyConfig {
  int vehicles{4};
  VehicleParams<double> params{VehicleParams<double>::mkz()};
  ActuatorParams<double> actuator{ActuatorParams<double>::mkz()};
  ArchitectureConfig architecture{};
  Gains<double> gains{};
  bool lead_data{true};  // false: followers only receive the preceding vehicle's broadcasts
  double speed{30.0};    // m/s, used when speed_profile is empty
  std::optional<SpeedProfile> speed_profile{};
  double spacing{30.0};  // m
  double gps_hz{20.0};
  double control_hz{50.0};
  double physics_dt{0.001};
  double gps_noise{0.0};  // m, standard deviation per coordinate
  double latency{0.0};    // s, rounded up to whole GPS periods
  std::uint64_t seed{0};
  std::vector<LaneChangeWindow> schedule{{8.0, 15.0}, {24.0, 30.0}};
  double lane_offset{3.5};
  double duration{40.0};
  PreviewConfig preview{};
  SteeringLimits limits{};
  std::vector<double> initial_offsets{};  // per-vehicle initial lateral offset (m)
  double hold_time{0.5};                  // s a stale target is kept before going straight
  double string_tolerance{0.05};

  void validate() const;
  SpeedProfile profile() const;
  std::int64_t gps_period_ticks() const;
  std::int64_t control_period_ticks() const;
  std::int64_t latency_ticks() const;
};

enum class SegmentKind { Line, Arc, Hold, Straight };
const char* to_string(SegmentKind kind);

struct TraceRecord {
  double t;
  int vehicle;
  GroundState<double> ground;
  ErrorSignals<double> errors;
  double delta_ff;
  double delta_fb;
  double delta_c;
  double delta_f;
  SegmentKind segment;
  double radius;  // +inf for straight targets
};

using ConvoyTrace = std::vector<TraceRecord>;

struct StringStabilityReport {
  std::vector<double> peaks;       // per vehicle, m
  std::vector<double> peak_times;  // s
  std::vector<double> road_times;  // time at which the lead passed each peak location
  int first_follower{1};
  double tolerance{0.05};
  bool monotone{true};  // peaks non-increasing from first_follower on
};

/// True iff peaks[i + 1] <= peaks[i] * (1 + tol) for all consecutive entries.
bool non_increasing(const std::vector<double>& peaks, double tol);

/// Peak |e_lat| per vehicle and the monotonicity verdict over vehicles >= first_follower.
StringStabilityReport string_report(const ConvoyTrace& trace, double tol, int first_follower = 1);

/// A position broadcast as sent (noise already applied).
struct Broadcast {
  std::int64_t tick;
  double x;
  double y;
};

struct ConvoyResult {
  ConvoyTrace trace;
  StringStabilityReport report;
  std::vector<std::vector<Broadcast>> broadcasts;  // per sender
};

/// Thrown when a vehicle's state diverges; carries the trace up to the failure.
class SimulationAborted : public DivergenceError {
 public:
  SimulationAborted(double time, const std::string& what, ConvoyTrace partial)
      : DivergenceError(time, what), trace_(std::move(partial)) {}
  const ConvoyTrace& trace() const { return trace_; }

 private:
  ConvoyTrace trace_;
};

ConvoyResult run(const ConvoyConfig& config);

/// Re-runs follower `vehicle` alone against recorded broadcasts of the lead and its predecessor.
ConvoyTrace emulate_follower(const ConvoyConfig& config, int vehicle, const std::vector<Broadcast>& lead,
                             const std::vector<Broadcast>& preceding);

}  // namespace convoy
