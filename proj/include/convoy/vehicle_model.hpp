#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "convoy/error.hpp"

namespace convoy {

/// Lowest longitudinal speed the lateral model accepts; the damping terms scale with 1/v_x.
inline constexpr double kMinSpeed = 1.0;

/// Wraps an angle to (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar angle) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar wrapped = std::remainder(angle, two_pi);
  if (wrapped <= -std::numbers::pi_v<Scalar>) wrapped += two_pi;
  return wrapped;
}

/// Bicycle-model constants. Cornering stiffnesses are per axle.
template <typename Scalar>
struct VehicleParams {
  Scalar mass;         // kg
  Scalar yaw_inertia;  // kg m^2
  Scalar cf;           // N/rad
  Scalar cr;           // N/rad
  Scalar a;            // m, CG to front axle
  Scalar b;            // m, CG to rear axle
  Scalar front_load;   // N, informational
  Scalar rear_load;    // N, informational

  Scalar wheelbase() const { return a + b; }

  /// Understeer gradient (rad s^2/m); positive for understeering vehicles.
  Scalar understeer_gradient() const { return mass / (a + b) * (b / cf - a / cr); }

  void validate() const {
    if (!(mass > 0 && yaw_inertia > 0 && cf > 0 && cr > 0 && a > 0 && b > 0))
      throw Error(ErrorKind::Domain, "vehicle parameters must be strictly positive");
  }

  /// Lincoln MKZ values as identified experimentally.
  static VehicleParams mkz() {
    const Scalar g = Scalar(9.81);
    return {Scalar(1896), Scalar(3803), Scalar(4000000), Scalar(381900), Scalar(1.2682), Scalar(1.5816),
            Scalar(1052.3) * g, Scalar(843.68) * g};
  }
};

/// Second-order steering actuator omega_n^2 / (s^2 + 2 zeta omega_n s + omega_n^2).
template <typename Scalar>
struct ActuatorParams {
  Scalar zeta;
  Scalar omega_n;

  void validate() const {
    if (!(zeta > 0 && omega_n > 0))
      throw Error(ErrorKind::Domain, "actuator damping and natural frequency must be positive");
  }

  static ActuatorParams mkz() { return {Scalar(0.4056), Scalar(21.4813)}; }
};

template <typename Scalar>
struct ActuatorState {
  Scalar angle{0};  // delta_f, rad
  Scalar rate{0};   // rad/s
};

/// Error-coordinate state: x = [e_lat, heading error], its rate, and the actuator.
template <typename Scalar>
struct LateralState {
  Scalar e_lat{0};
  Scalar e_lat_rate{0};
  Scalar heading_error{0};
  Scalar heading_error_rate{0};
  ActuatorState<Scalar> actuator{};

  Eigen::Matrix<Scalar, 4, 1> error_vector() const {
    return {e_lat, e_lat_rate, heading_error, heading_error_rate};
  }
};

/// Rigid-body state in the ground frame. v_x is exogenous.
template <typename Scalar>
struct GroundState {
  Scalar x{0};
  Scalar y{0};
  Scalar heading{0};
  Scalar yaw_rate{0};
  Scalar vx{0};
  Scalar vy{0};
};

template <typename Scalar>
struct VehicleState {
  GroundState<Scalar> ground{};
  ActuatorState<Scalar> actuator{};
};

template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
Matrix2<Scalar> mass_matrix(const VehicleParams<Scalar>& p) {
  return Vector2<Scalar>(p.mass, p.yaw_inertia).asDiagonal();
}

/// Speed-independent damping; the physical damping matrix is this times 1/v_x.
template <typename Scalar>
Matrix2<Scalar> damping_matrix_unit(const VehicleParams<Scalar>& p) {
  const Scalar cross = p.a * p.cf - p.b * p.cr;
  Matrix2<Scalar> c;
  c << p.cf + p.cr, cross, cross, p.a * p.a * p.cf + p.b * p.b * p.cr;
  return c;
}

template <typename Scalar>
Matrix2<Scalar> stiffness_matrix(const VehicleParams<Scalar>& p) {
  Matrix2<Scalar> l;
  l << Scalar(0), -(p.cf + p.cr), Scalar(0), -(p.a * p.cf - p.b * p.cr);
  return l;
}

template <typename Scalar>
Vector2<Scalar> steering_input(const VehicleParams<Scalar>& p) {
  return {Scalar(1), p.a};
}

/// Road-curvature disturbance: the error dynamics carry -F * curvature on the right-hand side.
template <typename Scalar>
Vector2<Scalar> curvature_disturbance(const VehicleParams<Scalar>& p, Scalar vx) {
  return {p.mass * vx * vx + (p.a * p.cf - p.b * p.cr), p.a * p.a * p.cf + p.b * p.b * p.cr};
}

inline void require_speed(double vx) {
  if (!(vx >= kMinSpeed))
    throw Error(ErrorKind::SingularSpeed, "longitudinal speed below minimum: " + std::to_string(vx));
}

/// Time derivative of (e_lat, e_lat_rate, heading_error, heading_error_rate).
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> lateral_derivatives(const LateralState<Scalar>& s, Scalar vx, Scalar curvature,
                                                Scalar delta_f, const VehicleParams<Scalar>& p) {
  require_speed(static_cast<double>(vx));
  const Vector2<Scalar> pos(s.e_lat, s.heading_error);
  const Vector2<Scalar> vel(s.e_lat_rate, s.heading_error_rate);
  const Vector2<Scalar> rhs = steering_input(p) * p.cf * delta_f - curvature_disturbance(p, vx) * curvature -
                              damping_matrix_unit(p) * vel / vx - stiffness_matrix(p) * pos;
  const Vector2<Scalar> acc = mass_matrix(p).diagonal().cwiseInverse().cwiseProduct(rhs);
  return {vel(0), acc(0), vel(1), acc(1)};
}

/// Controllable-canonical realization of the steering actuator.
template <typename Scalar>
ActuatorState<Scalar> actuator_derivatives(const ActuatorState<Scalar>& eta, Scalar delta_c,
                                           const ActuatorParams<Scalar>& act) {
  const Scalar wn2 = act.omega_n * act.omega_n;
  return {eta.rate, wn2 * (delta_c - eta.angle) - Scalar(2) * act.zeta * act.omega_n * eta.rate};
}

/// Classical fixed-step fourth-order Runge-Kutta.
template <typename Vec, typename Scalar, typename Rhs>
Vec rk4_step(Rhs&& f, Scalar t, const Vec& x, Scalar dt) {
  const Vec k1 = f(t, x);
  const Vec k2 = f(t + dt / 2, Vec(x + dt / 2 * k1));
  const Vec k3 = f(t + dt / 2, Vec(x + dt / 2 * k2));
  const Vec k4 = f(t + dt, Vec(x + dt * k3));
  return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

namespace detail {

template <typename Scalar>
using GroundVector = Eigen::Matrix<Scalar, 7, 1>;

// [X, Y, heading, yaw rate, v_y, delta_f, delta_f rate]
template <typename Scalar>
GroundVector<Scalar> ground_rates(const GroundVector<Scalar>& z, Scalar vx, Scalar delta_c,
                                  const VehicleParams<Scalar>& p, const ActuatorParams<Scalar>& act) {
  require_speed(static_cast<double>(vx));
  const Scalar heading = z(2), yaw_rate = z(3), vy = z(4), delta_f = z(5);
  const Scalar cross = p.a * p.cf - p.b * p.cr;
  GroundVector<Scalar> d;
  d(0) = vx * std::cos(heading) - vy * std::sin(heading);
  d(1) = vx * std::sin(heading) + vy * std::cos(heading);
  d(2) = yaw_rate;
  d(3) = (p.a * p.cf * delta_f - cross / vx * vy - (p.a * p.a * p.cf + p.b * p.b * p.cr) / vx * yaw_rate) /
         p.yaw_inertia;
  d(4) = (p.cf * delta_f - (p.cf + p.cr) / vx * vy - cross / vx * yaw_rate) / p.mass - vx * yaw_rate;
  const auto eta = actuator_derivatives<Scalar>({z(5), z(6)}, delta_c, act);
  d(5) = eta.angle;
  d(6) = eta.rate;
  return d;
}

}  // namespace detail

/// Advances the ground-frame body dynamics and actuator by one RK4 step of length dt, holding
/// delta_c constant. `speed(t)` supplies the exogenous longitudinal speed.
template <typename Scalar, typename SpeedFn>
VehicleState<Scalar> step(const VehicleState<Scalar>& state, Scalar t, Scalar dt, Scalar delta_c,
                          SpeedFn&& speed, const VehicleParams<Scalar>& p, const ActuatorParams<Scalar>& act) {
  if (!(dt > 0)) throw Error(ErrorKind::Domain, "step size must be positive");
  const auto& g = state.ground;
  detail::GroundVector<Scalar> z;
  z << g.x, g.y, g.heading, g.yaw_rate, g.vy, state.actuator.angle, state.actuator.rate;
  auto rhs = [&](Scalar tau, const detail::GroundVector<Scalar>& zz) {
    return detail::ground_rates<Scalar>(zz, speed(tau), delta_c, p, act);
  };
  const detail::GroundVector<Scalar> next = rk4_step(rhs, t, z, dt);
  if (!next.allFinite())
    throw DivergenceError(static_cast<double>(t + dt), "vehicle state diverged at t=" + std::to_string(t + dt));
  VehicleState<Scalar> out;
  out.ground = {next(0), next(1), next(2), next(3), speed(t + dt), next(4)};
  out.actuator = {next(5), next(6)};
  return out;
}

/// Constant-speed convenience overload.
template <typename Scalar>
VehicleState<Scalar> step(const VehicleState<Scalar>& state, Scalar dt, Scalar delta_c, const VehicleParams<Scalar>& p,
                          const ActuatorParams<Scalar>& act) {
  const Scalar vx = state.ground.vx;
  return step(state, Scalar(0), dt, delta_c, [vx](Scalar) { return vx; }, p, act);
}

/// RK4 step of the linear error model (lateral errors plus actuator) at fixed speed and curvature.
template <typename Scalar>
LateralState<Scalar> lateral_step(const LateralState<Scalar>& s, Scalar dt, Scalar delta_c, Scalar vx,
                                  Scalar curvature, const VehicleParams<Scalar>& p, const ActuatorParams<Scalar>& act) {
  using Vec6 = Eigen::Matrix<Scalar, 6, 1>;
  auto pack = [](const LateralState<Scalar>& ls) {
    Vec6 v;
    v << ls.error_vector(), ls.actuator.angle, ls.actuator.rate;
    return v;
  };
  auto unpack = [](const Vec6& v) {
    LateralState<Scalar> ls;
    ls.e_lat = v(0);
    ls.e_lat_rate = v(1);
    ls.heading_error = v(2);
    ls.heading_error_rate = v(3);
    ls.actuator = {v(4), v(5)};
    return ls;
  };
  auto rhs = [&](Scalar, const Vec6& v) {
    const LateralState<Scalar> ls = unpack(v);
    Vec6 d;
    d.template head<4>() = lateral_derivatives(ls, vx, curvature, ls.actuator.angle, p);
    const auto eta = actuator_derivatives(ls.actuator, delta_c, act);
    d(4) = eta.angle;
    d(5) = eta.rate;
    return d;
  };
  const Vec6 next = rk4_step(rhs, Scalar(0), pack(s), dt);
  if (!next.allFinite()) throw DivergenceError(0.0, "lateral state diverged");
  return unpack(next);
}

}  // namespace convoy
