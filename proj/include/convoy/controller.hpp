#pragma once

#include <algorithm>
#include <optional>

#include "convoy/gains.hpp"
#include "convoy/preview_path.hpp"
#include "convoy/tracking_errors.hpp"
#include "convoy/vehicle_model.hpp"

namespace convoy {

enum class Architecture { Composite, Separate };

struct ArchitectureConfig {
  Architecture mode{Architecture::Composite};
  double alpha{0.5};  // weight on the preceding-vehicle trajectory (Separate only)

  void validate() const {
    if (mode == Architecture::Separate && !(alpha >= 0 && alpha <= 1))
      throw Error(ErrorKind::Domain, "alpha must lie in [0, 1]");
  }
};

/// Steady-state cornering steer for signed curvature at speed v0.
template <typename Scalar>
Scalar cornering_steer(Scalar curvature, Scalar v0, const VehicleParams<Scalar>& p) {
  return (p.wheelbase() + p.understeer_gradient() * v0 * v0) * curvature;
}

template <typename Scalar>
Scalar feedforward_composite(const PathSegment<Scalar>& seg, Scalar v0, const VehicleParams<Scalar>& p) {
  require_speed(static_cast<double>(v0));
  return cornering_steer(segment_curvature(seg), v0, p);
}

template <typename Scalar>
Scalar feedforward_separate(const PathSegment<Scalar>& lead, const PathSegment<Scalar>& preceding, Scalar alpha,
                            Scalar v0, const VehicleParams<Scalar>& p) {
  if (!(alpha >= 0 && alpha <= 1)) throw Error(ErrorKind::Domain, "alpha must lie in [0, 1]");
  return alpha * feedforward_composite(preceding, v0, p) + (Scalar(1) - alpha) * feedforward_composite(lead, v0, p);
}

template <typename Scalar>
Scalar feedback_composite(const ErrorSignals<Scalar>& e, const Gains<Scalar>& k) {
  return -k.ke * e.e_lat - k.ktheta * e.heading_error - k.komega * e.heading_error_rate;
}

template <typename Scalar>
Scalar feedback_separate(const ErrorSignals<Scalar>& lead, const ErrorSignals<Scalar>& preceding, Scalar alpha,
                         const Gains<Scalar>& k) {
  if (!(alpha >= 0 && alpha <= 1)) throw Error(ErrorKind::Domain, "alpha must lie in [0, 1]");
  return (Scalar(1) - alpha) * feedback_composite(lead, k) + alpha * feedback_composite(preceding, k);
}

/// Optional symmetric clamp on the steering command.
struct SteeringLimits {
  std::optional<double> max_angle{0.5};  // rad; nullopt disables the clamp
};

template <typename Scalar>
Scalar command(Scalar feedforward, Scalar feedback, const SteeringLimits& limits = {}) {
  const Scalar sum = feedforward + feedback;
  if (!limits.max_angle) return sum;
  const auto lim = static_cast<Scalar>(*limits.max_angle);
  return std::clamp(sum, -lim, lim);
}

}  // namespace convoy
