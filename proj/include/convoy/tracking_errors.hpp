#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "convoy/preview_path.hpp"
#include "convoy/vehicle_model.hpp"

namespace convoy {

/// Feedback signals of the ego vehicle relative to one segment. e_lat is positive when the
/// vehicle is to the left of the path's travel direction.
template <typename Scalar>
struct ErrorSignals {
  Scalar e_lat{0};
  Scalar heading_error{0};
  Scalar heading_error_rate{0};
  Scalar reference_heading{0};
  Scalar curvature{0};
};

template <typename Scalar>
ErrorSignals<Scalar> errors_line(const GroundState<Scalar>& ego, const Line<Scalar>& line) {
  const Point<Scalar> d(ego.x - line.anchor.x(), ego.y - line.anchor.y());
  ErrorSignals<Scalar> e;
  e.e_lat = cross2<Scalar>(line.direction, d);
  e.reference_heading = line.heading();
  e.heading_error = wrap_angle(ego.heading - e.reference_heading);
  e.heading_error_rate = ego.yaw_rate;
  e.curvature = Scalar(0);
  return e;
}

template <typename Scalar>
ErrorSignals<Scalar> errors_arc(const GroundState<Scalar>& ego, const Arc<Scalar>& arc) {
  const Point<Scalar> d(ego.x - arc.center.x(), ego.y - arc.center.y());
  const Scalar dist = d.norm();
  if (!(dist > std::numeric_limits<Scalar>::epsilon() * arc.radius))
    throw Error(ErrorKind::ProjectionUndefined, "ego position coincides with the arc centre");
  const Scalar turn = arc.turn();
  ErrorSignals<Scalar> e;
  e.e_lat = turn * (arc.radius - dist);
  e.reference_heading =
      wrap_angle(std::atan2(d.y(), d.x()) + turn * std::numbers::pi_v<Scalar> / Scalar(2));
  e.heading_error = wrap_angle(ego.heading - e.reference_heading);
  e.heading_error_rate = ego.yaw_rate - arc.curvature * ego.vx;
  e.curvature = arc.curvature;
  return e;
}

template <typename Scalar>
ErrorSignals<Scalar> errors(const GroundState<Scalar>& ego, const PathSegment<Scalar>& seg) {
  return std::visit(
      [&](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Line<Scalar>>) return errors_line(ego, s);
        else return errors_arc(ego, s);
      },
      seg);
}

/// Distance from p to the closest point of a segment, and the projection parameter of p.
template <typename Scalar>
struct SegmentDistance {
  Scalar distance;
  Scalar param;
};

template <typename Scalar>
SegmentDistance<Scalar> segment_distance(const PathSegment<Scalar>& seg, const Point<Scalar>& p) {
  return std::visit(
      [&](const auto& s) -> SegmentDistance<Scalar> {
        const Scalar u = s.param(p);
        const Scalar len = segment_length<Scalar>(seg);
        if (u < Scalar(0)) return {(p - s.start()).norm(), u};
        if (u > len) return {(p - s.end()).norm(), u};
        return {(p - s.point_at(u)).norm(), u};
      },
      seg);
}

/// Index of the segment closest to the ego position; on a tie the downstream segment wins.
/// Positions past the end of the final segment raise an EndOfPath error.
template <typename Scalar>
std::size_t active_segment_index(const ArcSpline<Scalar>& spline, const GroundState<Scalar>& ego) {
  if (spline.empty()) throw Error(ErrorKind::InsufficientData, "empty target trajectory");
  const Point<Scalar> p(ego.x, ego.y);
  std::size_t best = 0;
  Scalar best_dist = std::numeric_limits<Scalar>::infinity();
  Scalar best_param = 0;
  for (std::size_t i = 0; i < spline.segments.size(); ++i) {
    const auto sd = segment_distance(spline.segments[i], p);
    if (sd.distance <= best_dist * (Scalar(1) + Scalar(1e-12)) + Scalar(1e-12)) {
      best = i;
      best_dist = sd.distance;
      best_param = sd.param;
    }
  }
  if (best + 1 == spline.segments.size() && best_param > segment_length(spline.segments[best]))
    throw Error(ErrorKind::EndOfPath, "ego is beyond the end of the target trajectory");
  return best;
}

template <typename Scalar>
const PathSegment<Scalar>& active_segment(const ArcSpline<Scalar>& spline, const GroundState<Scalar>& ego) {
  return spline.segments[active_segment_index(spline, ego)];
}

}  // namespace convoy
