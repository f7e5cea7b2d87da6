#include "convoy/convoy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace convoy {

// ----------------------------------------------------------------------------
// Reference path

ReferencePath::ReferencePath(std::vector<LaneChangeWindow> schedule, double lane_offset, SpeedProfile speed)
    : schedule_(std::move(schedule)), lane_offset_(lane_offset), speed_(std::move(speed)) {
  if (speed_.v.empty()) throw Error(ErrorKind::Domain, "empty speed profile");
  distance_.resize(speed_.v.size());
  distance_[0] = 0.0;
  for (std::size_t i = 1; i < speed_.v.size(); ++i)
    distance_[i] = distance_[i - 1] + 0.5 * (speed_.v[i - 1] + speed_.v[i]) * speed_.dt;
}

template <int Derivative>
double ReferencePath::lateral_impl(double t) const {
  for (std::size_t i = 0; i < schedule_.size(); ++i) {
    const LaneChangeWindow& w = schedule_[i];
    if (t < w.start) return Derivative == 0 ? level(i) : 0.0;
    if (t <= w.end) {
      const double span = w.end - w.start;
      const double u = (t - w.start) / span;
      const double delta = level(i + 1) - level(i);
      if constexpr (Derivative == 0) return level(i) + delta * u * u * u * (10 - 15 * u + 6 * u * u);
      if constexpr (Derivative == 1) return delta * 30 * u * u * (1 - 2 * u + u * u) / span;
      if constexpr (Derivative == 2) return delta * 60 * u * (1 - 3 * u + 2 * u * u) / (span * span);
    }
  }
  return Derivative == 0 ? level(schedule_.size()) : 0.0;
}

double ReferencePath::lateral(double t) const { return lateral_impl<0>(t); }
double ReferencePath::lateral_rate(double t) const { return lateral_impl<1>(t); }
double ReferencePath::lateral_accel(double t) const { return lateral_impl<2>(t); }

double ReferencePath::longitudinal(double t) const {
  const double u = (t - speed_.t0) / speed_.dt;
  if (u <= 0) return speed_.v.front() * (t - speed_.t0);
  const auto last = speed_.v.size() - 1;
  if (u >= static_cast<double>(last))
    return distance_[last] + speed_.v.back() * (t - speed_.t0 - static_cast<double>(last) * speed_.dt);
  const auto i = static_cast<std::size_t>(std::floor(u));
  const double f = u - static_cast<double>(i);
  return distance_[i] + speed_.v[i] * f * speed_.dt + 0.5 * (speed_.v[i + 1] - speed_.v[i]) * f * f * speed_.dt;
}

double ReferencePath::heading(double t) const { return std::atan2(lateral_rate(t), speed(t)); }

double ReferencePath::curvature(double t) const {
  const double xd = speed(t), yd = lateral_rate(t), ydd = lateral_accel(t);
  const double h = 1e-4;
  const double xdd = (speed(t + h) - speed(t - h)) / (2 * h);
  return (xd * ydd - yd * xdd) / std::pow(xd * xd + yd * yd, 1.5);
}

ReferencePath make_reference(const std::vector<LaneChangeWindow>& schedule, double lane_offset,
                             const SpeedProfile& speed, std::optional<double> duration) {
  double previous_end = -std::numeric_limits<double>::infinity();
  for (const auto& w : schedule) {
    if (!(w.end > w.start)) throw Error(ErrorKind::Schedule, "lane-change window must have end > start");
    if (w.start < previous_end) throw Error(ErrorKind::Schedule, "lane-change windows overlap or are unordered");
    if (w.start < 0 || (duration && w.end > *duration))
      throw Error(ErrorKind::Schedule, "lane-change window outside the simulated duration");
    previous_end = w.end;
  }
  return ReferencePath(schedule, lane_offset, speed);
}

// ----------------------------------------------------------------------------
// Configuration

void ConvoyConfig::validate() const {
  if (vehicles < 2) throw Error(ErrorKind::Config, "vehicles: convoy needs at least 2 vehicles");
  params.validate();
  actuator.validate();
  architecture.validate();
  if (!gains.finite()) throw Error(ErrorKind::Config, "gains: must be finite");
  if (!(spacing > 0)) throw Error(ErrorKind::Config, "spacing: must be positive");
  if (!(gps_hz > 0 && gps_hz <= 20)) throw Error(ErrorKind::Config, "gps_hz: must lie in (0, 20]");
  if (!(control_hz > 0)) throw Error(ErrorKind::Config, "control_hz: must be positive");
  if (!(physics_dt > 0)) throw Error(ErrorKind::Config, "physics_dt: must be positive");
  auto whole = [&](double hz) {
    const double ticks = 1.0 / (hz * physics_dt);
    return std::abs(ticks - std::round(ticks)) < 1e-9 && std::round(ticks) >= 1;
  };
  if (!whole(gps_hz)) throw Error(ErrorKind::Config, "gps_hz: period must be a whole number of physics steps");
  if (!whole(control_hz))
    throw Error(ErrorKind::Config, "control_hz: period must be a whole number of physics steps");
  if (!(gps_noise >= 0)) throw Error(ErrorKind::Config, "gps_noise: must be non-negative");
  if (!(latency >= 0)) throw Error(ErrorKind::Config, "latency: must be non-negative");
  if (!(duration > 0)) throw Error(ErrorKind::Config, "duration: must be positive");
  if (!(preview.preview_length > 0 && preview.behind_margin >= 0 && preview.epsilon > 0))
    throw Error(ErrorKind::Config, "preview: length and epsilon must be positive");
  if (initial_offsets.size() > static_cast<std::size_t>(vehicles))
    throw Error(ErrorKind::Config, "initial_offsets: more entries than vehicles");
  if (!lead_data && architecture.mode == Architecture::Separate && architecture.alpha < 1)
    throw Error(ErrorKind::Config, "alpha: separate architecture without lead data requires alpha = 1");
  if (speed_profile) {
    if (speed_profile->v.empty()) throw Error(ErrorKind::Config, "speed_profile: empty");
    for (const double v : speed_profile->v)
      if (!(v >= kMinSpeed)) throw Error(ErrorKind::Config, "speed_profile: speed below minimum");
  } else if (!(speed >= kMinSpeed)) {
    throw Error(ErrorKind::Config, "speed: below minimum");
  }
}

SpeedProfile ConvoyConfig::profile() const {
  return speed_profile ? *speed_profile : SpeedProfile::constant(speed, duration, 0.01);
}

std::int64_t ConvoyConfig::gps_period_ticks() const { return std::llround(1.0 / (gps_hz * physics_dt)); }
std::int64_t ConvoyConfig::control_period_ticks() const { return std::llround(1.0 / (control_hz * physics_dt)); }
std::int64_t ConvoyConfig::latency_ticks() const {
  const double periods = std::ceil(latency * gps_hz - 1e-9);
  return static_cast<std::int64_t>(periods) * gps_period_ticks();
}

const char* to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Line: return "line";
    case SegmentKind::Arc: return "arc";
    case SegmentKind::Hold: return "hold";
    case SegmentKind::Straight: return "straight";
  }
  return "?";
}

// ----------------------------------------------------------------------------
// String stability

bool non_increasing(const std::vector<double>& peaks, double tol) {
  for (std::size_t i = 1; i < peaks.size(); ++i)
    if (peaks[i] > peaks[i - 1] * (1 + tol)) return false;
  return true;
}

StringStabilityReport string_report(const ConvoyTrace& trace, double tol, int first_follower) {
  int vehicles = 0;
  for (const auto& r : trace) vehicles = std::max(vehicles, r.vehicle + 1);
  StringStabilityReport rep;
  rep.tolerance = tol;
  rep.first_follower = first_follower;
  rep.peaks.assign(static_cast<std::size_t>(vehicles), 0.0);
  rep.peak_times.assign(static_cast<std::size_t>(vehicles), 0.0);
  rep.road_times.assign(static_cast<std::size_t>(vehicles), 0.0);
  std::vector<double> peak_x(static_cast<std::size_t>(vehicles), 0.0);
  std::vector<std::pair<double, double>> lead_track;  // (x, t)
  for (const auto& r : trace) {
    const auto v = static_cast<std::size_t>(r.vehicle);
    const double mag = std::abs(r.errors.e_lat);
    if (mag > rep.peaks[v]) {
      rep.peaks[v] = mag;
      rep.peak_times[v] = r.t;
      peak_x[v] = r.ground.x;
    }
    if (r.vehicle == 0) lead_track.emplace_back(r.ground.x, r.t);
  }
  for (std::size_t v = 0; v < rep.peaks.size(); ++v) {
    // Time at which the lead passed the same longitudinal position.
    const double x = peak_x[v];
    double road_t = rep.peak_times[v];
    for (std::size_t k = 1; k < lead_track.size(); ++k) {
      const auto [x0, t0] = lead_track[k - 1];
      const auto [x1, t1] = lead_track[k];
      if (x0 <= x && x <= x1 && x1 > x0) {
        road_t = t0 + (x - x0) / (x1 - x0) * (t1 - t0);
        break;
      }
    }
    rep.road_times[v] = road_t;
  }
  const auto first = static_cast<std::size_t>(std::clamp(first_follower, 0, vehicles));
  rep.monotone = non_increasing(std::vector<double>(rep.peaks.begin() + static_cast<std::ptrdiff_t>(first),
                                                    rep.peaks.end()),
                                tol);
  return rep;
}

// ----------------------------------------------------------------------------
// Simulation

namespace {

struct HeldTarget {
  std::optional<ArcSpline<double>> spline;
  double fitted_at{-std::numeric_limits<double>::infinity()};
};

struct ResolvedTarget {
  PathSegment<double> segment;
  SegmentKind kind;
};

class Agent {
 public:
  Agent(int id, const ConvoyConfig& cfg, const VehicleState<double>& initial)
      : id_(id), cfg_(cfg), state_(initial), buffer_(cfg.preview) {}

  void receive(const GpsSample& s) { buffer_.ingest(s, state_.ground); }

  TraceRecord control(double t) {
    const GroundState<double>& g = state_.ground;
    const double v = g.vx;
    TraceRecord rec{};
    rec.t = t;
    rec.vehicle = id_;
    rec.ground = g;
    rec.delta_f = state_.actuator.angle;

    const bool separate = id_ > 0 && cfg_.architecture.mode == Architecture::Separate;
    if (!separate) {
      const ResolvedTarget target = resolve(TargetMode::Composite, composite_, t);
      rec.errors = errors(g, target.segment);
      rec.delta_ff = feedforward_composite(target.segment, v, cfg_.params);
      rec.delta_fb = feedback_composite(rec.errors, cfg_.gains);
      rec.segment = target.kind;
      rec.radius = radius_of(target.segment);
    } else {
      const double alpha = cfg_.architecture.alpha;
      const ResolvedTarget lead = resolve(TargetMode::SeparateLead, lead_, t);
      const ResolvedTarget prec = resolve(TargetMode::SeparatePreceding, preceding_, t);
      const ErrorSignals<double> el = errors(g, lead.segment);
      const ErrorSignals<double> ep = errors(g, prec.segment);
      rec.errors.e_lat = (1 - alpha) * el.e_lat + alpha * ep.e_lat;
      rec.errors.heading_error = (1 - alpha) * el.heading_error + alpha * ep.heading_error;
      rec.errors.heading_error_rate = (1 - alpha) * el.heading_error_rate + alpha * ep.heading_error_rate;
      rec.errors.reference_heading = ep.reference_heading;
      rec.errors.curvature = (1 - alpha) * el.curvature + alpha * ep.curvature;
      rec.delta_ff = feedforward_separate(lead.segment, prec.segment, alpha, v, cfg_.params);
      rec.delta_fb = feedback_separate(el, ep, alpha, cfg_.gains);
      rec.segment = prec.kind;
      rec.radius = radius_of(prec.segment);
    }
    rec.delta_c = command(rec.delta_ff, rec.delta_fb, cfg_.limits);
    delta_c_ = rec.delta_c;
    return rec;
  }

  void advance(double t, const SpeedProfile& speed) {
    state_ = step(state_, t, cfg_.physics_dt, delta_c_, [&](double tau) { return speed.at(tau); }, cfg_.params,
                  cfg_.actuator);
  }

  const VehicleState<double>& state() const { return state_; }

 private:
  static double radius_of(const PathSegment<double>& seg) {
    const double k = segment_curvature(seg);
    return k == 0 ? std::numeric_limits<double>::infinity() : 1.0 / std::abs(k);
  }

  ResolvedTarget straight_ahead() const {
    const auto& g = state_.ground;
    return {Line<double>{{g.x, g.y}, {std::cos(g.heading), std::sin(g.heading)}, cfg_.preview.preview_length},
            SegmentKind::Straight};
  }

  ResolvedTarget resolve(TargetMode mode, HeldTarget& held, double t) {
    SegmentKind kind;
    if (auto fresh = build_target(buffer_, state_.ground, mode)) {
      held = {std::move(fresh), t};
      kind = SegmentKind::Line;
    } else if (held.spline && t - held.fitted_at <= cfg_.hold_time + 1e-9) {
      kind = SegmentKind::Hold;
    } else {
      return straight_ahead();
    }
    try {
      const PathSegment<double>& seg = active_segment(*held.spline, state_.ground);
      if (kind == SegmentKind::Line && is_arc(seg)) kind = SegmentKind::Arc;
      return {seg, kind};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EndOfPath) throw;
      return straight_ahead();
    }
  }

  int id_;
  const ConvoyConfig& cfg_;
  VehicleState<double> state_;
  PreviewBuffer buffer_;
  HeldTarget composite_, lead_, preceding_;
  double delta_c_{0};
};

VehicleState<double> initial_state(const ConvoyConfig& cfg, int i, double v0) {
  VehicleState<double> s;
  s.ground.x = -cfg.spacing * i;
  s.ground.y = static_cast<std::size_t>(i) < cfg.initial_offsets.size()
                   ? cfg.initial_offsets[static_cast<std::size_t>(i)]
                   : 0.0;
  s.ground.vx = v0;
  return s;
}

// Straight-line history of every sender before t = 0, so followers start with a full window.
void preseed_follower(Agent& agent, const ConvoyConfig& cfg, int i, double v0) {
  const double gps_period = 1.0 / cfg.gps_hz;
  const auto history = static_cast<int>(
      std::ceil((cfg.vehicles * cfg.spacing + cfg.preview.behind_margin + 10.0) / (v0 * gps_period)));
  const VehicleState<double> lead0 = initial_state(cfg, 0, v0);
  const VehicleState<double> prec0 = initial_state(cfg, i - 1, v0);
  for (int k = history; k >= 1; --k) {
    const double t = -k * gps_period;
    if (cfg.lead_data)
      agent.receive({lead0.ground.x + v0 * t, lead0.ground.y, Source::Lead, t});
    agent.receive({prec0.ground.x + v0 * t, prec0.ground.y, Source::Preceding, t});
  }
}

// Delivers every broadcast whose arrival tick has been reached, lead stream first.
class Courier {
 public:
  Courier(const ConvoyConfig& cfg) : latency_(cfg.latency_ticks()), dt_(cfg.physics_dt), lead_data_(cfg.lead_data) {}

  void deliver(Agent& agent, std::int64_t tick, const std::vector<Broadcast>& lead,
               const std::vector<Broadcast>& preceding) {
    if (lead_data_) drain(agent, tick, lead, lead_next_, Source::Lead);
    drain(agent, tick, preceding, prec_next_, Source::Preceding);
  }

 private:
  void drain(Agent& agent, std::int64_t tick, const std::vector<Broadcast>& log, std::size_t& next, Source src) {
    while (next < log.size() && log[next].tick + latency_ <= tick) {
      const Broadcast& b = log[next++];
      agent.receive({b.x, b.y, src, static_cast<double>(b.tick) * dt_});
    }
  }

  std::int64_t latency_;
  double dt_;
  bool lead_data_;
  std::size_t lead_next_{0};
  std::size_t prec_next_{0};
};

}  // namespace

ConvoyResult run(const ConvoyConfig& cfg) {
  cfg.validate();
  const SpeedProfile speed = cfg.profile();
  const ReferencePath reference = make_reference(cfg.schedule, cfg.lane_offset, speed, cfg.duration);
  const double v0 = speed.at(0.0);
  const auto n = static_cast<std::size_t>(cfg.vehicles);

  std::vector<Agent> agents;
  agents.reserve(n);
  for (int i = 0; i < cfg.vehicles; ++i) agents.emplace_back(i, cfg, initial_state(cfg, i, v0));
  for (int i = 1; i < cfg.vehicles; ++i) preseed_follower(agents[static_cast<std::size_t>(i)], cfg, i, v0);
  std::vector<Courier> couriers(n, Courier(cfg));

  // The lead's target is the analytic reference sampled on the GPS clock.
  const double gps_period = 1.0 / cfg.gps_hz;
  std::int64_t ref_next = -static_cast<std::int64_t>(std::ceil((cfg.preview.behind_margin + 5.0) / (v0 * gps_period)));
  auto feed_reference = [&]() {
    const double horizon = agents[0].state().ground.x + cfg.preview.preview_length + 5.0;
    while (true) {
      const double t = static_cast<double>(ref_next) * gps_period;
      const Eigen::Vector2d p = reference.position(t);
      if (p.x() > horizon) break;
      agents[0].receive({p.x(), p.y(), Source::Lead, t});
      ++ref_next;
    }
  };

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.gps_noise > 0 ? cfg.gps_noise : 1.0);

  ConvoyResult result;
  result.broadcasts.assign(n, {});
  const auto gps_ticks = cfg.gps_period_ticks();
  const auto control_ticks = cfg.control_period_ticks();
  const auto total = static_cast<std::int64_t>(std::llround(cfg.duration / cfg.physics_dt));

  for (std::int64_t tick = 0; tick <= total; ++tick) {
    const double t = static_cast<double>(tick) * cfg.physics_dt;
    try {
      if (tick % gps_ticks == 0) {
        for (std::size_t j = 0; j < n; ++j) {
          const auto& g = agents[j].state().ground;
          double x = g.x, y = g.y;
          if (cfg.gps_noise > 0) {
            x += noise(rng);
            y += noise(rng);
          }
          result.broadcasts[j].push_back({tick, x, y});
        }
        feed_reference();
      }
      for (std::size_t i = 1; i < n; ++i)
        couriers[i].deliver(agents[i], tick, result.broadcasts[0], result.broadcasts[i - 1]);
      if (tick % control_ticks == 0)
        for (auto& agent : agents) result.trace.push_back(agent.control(t));
      if (tick == total) break;
      for (auto& agent : agents) agent.advance(t, speed);
    } catch (const DivergenceError& e) {
      throw SimulationAborted(e.time(), e.what(), std::move(result.trace));
    }
  }
  result.report = string_report(result.trace, cfg.string_tolerance);
  return result;
}

ConvoyTrace emulate_follower(const ConvoyConfig& cfg, int vehicle, const std::vector<Broadcast>& lead,
                             const std::vector<Broadcast>& preceding) {
  cfg.validate();
  if (vehicle < 1 || vehicle >= cfg.vehicles) throw Error(ErrorKind::Domain, "emulated vehicle must be a follower");
  const SpeedProfile speed = cfg.profile();
  const double v0 = speed.at(0.0);
  Agent agent(vehicle, cfg, initial_state(cfg, vehicle, v0));
  preseed_follower(agent, cfg, vehicle, v0);
  Courier courier(cfg);

  ConvoyTrace trace;
  const auto control_ticks = cfg.control_period_ticks();
  const auto total = static_cast<std::int64_t>(std::llround(cfg.duration / cfg.physics_dt));
  for (std::int64_t tick = 0; tick <= total; ++tick) {
    const double t = static_cast<double>(tick) * cfg.physics_dt;
    courier.deliver(agent, tick, lead, preceding);
    if (tick % control_ticks == 0) trace.push_back(agent.control(t));
    if (tick == total) break;
    agent.advance(t, speed);
  }
  return trace;
}

}  // namespace convoy
