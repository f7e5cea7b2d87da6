#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convoy/error.hpp"
#include "convoy/gains.hpp"
#include "convoy/vehicle_model.hpp"

namespace convoy {

inline constexpr double kMphToMps = 0.44704;

/// Closed-loop characteristic polynomial sum_k coeffs[k] s^k of the lateral loop with the
/// second-order actuator, normalized so that coeffs[6] = I m / omega_n^2.
template <typename Scalar>
struct CharPoly {
  std::array<Scalar, 7> coeffs{};
  VehicleParams<Scalar> params{};
  ActuatorParams<Scalar> actuator{};
  Gains<Scalar> gains{};
  Scalar speed{};

  Scalar operator[](int k) const { return coeffs[static_cast<std::size_t>(k)]; }

  template <typename T>
  std::complex<T> evaluate(std::complex<T> s) const {
    std::complex<T> acc{0};
    for (int k = 6; k >= 0; --k) acc = acc * s + static_cast<T>(coeffs[static_cast<std::size_t>(k)]);
    return acc;
  }
};

/// Coefficients A0..A6 of Delta(s; K) at constant speed v0.
///
/// The bracketed terms of A4 and A3 carry the full open-loop constant term
/// (a+b)^2 Cf Cr / V0^2 - m (a Cf - b Cr) scaled by 1/omega_n^2 and 2 zeta/omega_n
/// respectively; this grouping is the one consistent with the state-space closed loop.
template <typename Scalar>
CharPoly<Scalar> char_coeffs(const VehicleParams<Scalar>& p, const ActuatorParams<Scalar>& act,
                             const Gains<Scalar>& k, Scalar v0) {
  require_speed(static_cast<double>(v0));
  const Scalar m = p.mass, I = p.yaw_inertia, cf = p.cf, cr = p.cr, a = p.a, b = p.b;
  const Scalar wn = act.omega_n, zeta = act.zeta;
  const Scalar l = a + b;
  const Scalar damping = (cf * (I + a * a * m) + cr * (I + b * b * m)) / v0;
  const Scalar stiffness = l * l * cf * cr / (v0 * v0) - m * (a * cf - b * cr);

  CharPoly<Scalar> poly;
  auto& c = poly.coeffs;
  c[6] = I * m / (wn * wn);
  c[5] = Scalar(2) * I * m * zeta / wn + damping / (wn * wn);
  c[4] = Scalar(2) * zeta * damping / wn + stiffness / (wn * wn) + m * I;
  c[3] = Scalar(2) * zeta * stiffness / wn + damping + cf * m * a * k.komega;
  c[2] = stiffness + (cf * I * k.ke + cf * cr * l / v0 * k.komega + m * a * cf * k.ktheta);
  c[1] = cf * cr * l / v0 * (b * k.ke + k.ktheta);
  c[0] = cf * cr * l * k.ke;
  poly.params = p;
  poly.actuator = act;
  poly.gains = k;
  poly.speed = v0;
  return poly;
}

/// Roots via the eigenvalues of the companion matrix.
template <typename Scalar>
std::vector<std::complex<Scalar>> poly_roots(const std::array<Scalar, 7>& coeffs) {
  int degree = 6;
  while (degree > 0 && coeffs[static_cast<std::size_t>(degree)] == Scalar(0)) --degree;
  if (degree == 0) return {};
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> companion =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = Scalar(1);
  for (int i = 0; i < degree; ++i)
    companion(i, degree - 1) = -coeffs[static_cast<std::size_t>(i)] / coeffs[static_cast<std::size_t>(degree)];
  Eigen::EigenSolver<decltype(companion)> solver(companion, false);
  const auto ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

enum class StabilityClass { Stable, Unstable, Boundary };

inline const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::Stable: return "stable";
    case StabilityClass::Unstable: return "unstable";
    case StabilityClass::Boundary: return "boundary";
  }
  return "?";
}

inline constexpr double kRouthTolerance = 1e-9;

/// Routh-table classification of a real polynomial given lowest-degree first.
/// A first-column entry within `tol` (relative to the largest entry of its row and the row
/// above) is treated as zero and yields Boundary, unless a sign change was already seen.
template <typename Scalar>
StabilityClass hurwitz(const std::vector<Scalar>& coeffs_low_first, Scalar tol = Scalar(kRouthTolerance)) {
  const int n = static_cast<int>(coeffs_low_first.size()) - 1;
  if (n < 1) throw Error(ErrorKind::DegenerateDegree, "polynomial must have degree >= 1");
  const Scalar lead = coeffs_low_first.back();
  if (lead == Scalar(0)) throw Error(ErrorKind::DegenerateDegree, "leading coefficient is zero");

  const int width = n / 2 + 1;
  std::vector<std::vector<Scalar>> rows(static_cast<std::size_t>(n + 1), std::vector<Scalar>(width + 1, Scalar(0)));
  for (int k = 0; k <= n; ++k) {
    const Scalar c = coeffs_low_first[static_cast<std::size_t>(n - k)] / lead;
    rows[static_cast<std::size_t>(k % 2)][static_cast<std::size_t>(k / 2)] = c;
  }
  auto row_max = [](const std::vector<Scalar>& r) {
    Scalar m(0);
    for (const Scalar v : r) m = std::max(m, std::abs(v));
    return m;
  };
  for (int i = 0; i <= n; ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    if (i >= 2) {
      const auto& up = rows[static_cast<std::size_t>(i - 1)];
      const auto& up2 = rows[static_cast<std::size_t>(i - 2)];
      for (int j = 0; j < width; ++j)
        row[static_cast<std::size_t>(j)] =
            (up[0] * up2[static_cast<std::size_t>(j + 1)] - up2[0] * up[static_cast<std::size_t>(j + 1)]) / up[0];
    }
    Scalar scale = row_max(row);
    if (i >= 1) scale = std::max(scale, row_max(rows[static_cast<std::size_t>(i - 1)]));
    if (std::abs(row[0]) <= tol * scale) return StabilityClass::Boundary;
    if (row[0] < Scalar(0)) return StabilityClass::Unstable;
  }
  return StabilityClass::Stable;
}

template <typename Scalar>
StabilityClass hurwitz(const CharPoly<Scalar>& poly, Scalar tol = Scalar(kRouthTolerance)) {
  return hurwitz(std::vector<Scalar>(poly.coeffs.begin(), poly.coeffs.end()), tol);
}

/// Six-state closed loop z = (x, x_dot, eta), A(gamma) = constant + gamma * slope.
template <typename Scalar>
struct ClosedLoopMatrix {
  using Matrix6 = Eigen::Matrix<Scalar, 6, 6>;
  using Vector6 = Eigen::Matrix<Scalar, 6, 1>;

  Matrix6 constant;
  Matrix6 slope;
  Scalar gamma;
  Vector6 disturbance;  // multiplies the road curvature 1/R

  Matrix6 matrix() const { return constant + gamma * slope; }
  Matrix6 at(Scalar g) const { return constant + g * slope; }
};

/// Closed-loop matrix at gamma = 1/V0 under delta_c = -Kp x - Kv x_dot with Kp = [ke ktheta],
/// Kv = [0 komega]. The mass matrix is inverted explicitly so the state equation is in
/// first-order form.
template <typename Scalar>
ClosedLoopMatrix<Scalar> assemble_A(const VehicleParams<Scalar>& p, const ActuatorParams<Scalar>& act,
                                    const Gains<Scalar>& k, Scalar gamma,
                                    Scalar gamma_max = Scalar(1) / Scalar(kMinSpeed),
                                    Scalar gamma_min = Scalar(0)) {
  if (!(gamma > gamma_min && gamma <= gamma_max))
    throw Error(ErrorKind::Domain, "gamma outside the admissible speed range");
  using Matrix6 = typename ClosedLoopMatrix<Scalar>::Matrix6;
  const Matrix2<Scalar> m_inv = mass_matrix(p).inverse();
  const Eigen::Matrix<Scalar, 1, 2> kp(k.ke, k.ktheta);
  const Eigen::Matrix<Scalar, 1, 2> kv(Scalar(0), k.komega);
  const Vector2<Scalar> g(Scalar(0), act.omega_n * act.omega_n);
  Matrix2<Scalar> q;
  q << Scalar(0), Scalar(1), -act.omega_n * act.omega_n, Scalar(-2) * act.zeta * act.omega_n;
  const Eigen::Matrix<Scalar, 1, 2> h(Scalar(1), Scalar(0));

  ClosedLoopMatrix<Scalar> out;
  out.constant = Matrix6::Zero();
  out.slope = Matrix6::Zero();
  out.constant.template block<2, 2>(0, 2) = Matrix2<Scalar>::Identity();
  out.constant.template block<2, 2>(2, 0) = -m_inv * stiffness_matrix(p);
  out.constant.template block<2, 2>(2, 4) = m_inv * steering_input(p) * h * p.cf;
  out.constant.template block<2, 2>(4, 0) = -g * kp;
  out.constant.template block<2, 2>(4, 2) = -g * kv;
  out.constant.template block<2, 2>(4, 4) = q;
  out.slope.template block<2, 2>(2, 2) = -m_inv * damping_matrix_unit(p);
  out.gamma = gamma;
  out.disturbance.setZero();
  out.disturbance.template segment<2>(2) = -m_inv * curvature_disturbance(p, Scalar(1) / gamma);
  return out;
}

template <typename Derived>
typename Derived::Scalar max_real_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Eigen::EigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> solver(a.eval(), false);
  return solver.eigenvalues().real().maxCoeff();
}

// ----------------------------------------------------------------------------
// Stabilizing-set construction (double precision).

struct Axis {
  double lo;
  double hi;
  int count;

  double at(int i) const { return count <= 1 ? lo : lo + (hi - lo) * i / (count - 1); }
  bool operator==(const Axis&) const = default;
};

struct GridSpec {
  Axis ke{0.0, 0.5, 101};
  Axis ktheta{0.0, 3.0, 101};
  Axis komega{0.0, 0.5, 51};

  std::size_t size() const {
    return static_cast<std::size_t>(ke.count) * static_cast<std::size_t>(ktheta.count) *
           static_cast<std::size_t>(komega.count);
  }
  std::size_t index(int i, int j, int l) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(ktheta.count) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(komega.count) +
           static_cast<std::size_t>(l);
  }
  Gains<double> gains(int i, int j, int l) const { return {ke.at(i), ktheta.at(j), komega.at(l)}; }
  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

struct StabRegion {
  GridSpec grid;
  std::vector<double> speeds;  // one entry per constituent speed (m/s)
  std::vector<StabilityClass> classes;

  StabilityClass at(int i, int j, int l) const { return classes[grid.index(i, j, l)]; }
  std::size_t count(StabilityClass c) const;
};

/// Classifies every grid point with char_coeffs + hurwitz. Unstable points sharing a face with a
/// stable point are relabelled Boundary, as are points where the Routh test hits a zero.
StabRegion stab_region(const VehicleParams<double>& p, const ActuatorParams<double>& act, double speed,
                       const GridSpec& grid = {});

/// Pointwise conjunction over speeds. All regions must share one grid.
StabRegion intersect_regions(const std::vector<StabRegion>& regions);

/// A point of the complex-root boundary Delta(j omega; K) = 0 at fixed komega.
struct BoundaryPoint {
  double omega;
  double ke;
  double ktheta;
};

/// Traces the Delta(j omega) = 0 locus in the (ke, ktheta) plane for each omega > 0.
std::vector<BoundaryPoint> complex_root_boundary(const VehicleParams<double>& p, const ActuatorParams<double>& act,
                                                 double speed, double komega, const std::vector<double>& omegas);

/// Uniformly sampled longitudinal speed.
struct SpeedProfile {
  double t0{0};
  double dt{0.01};
  std::vector<double> v;

  double duration() const { return v.empty() ? 0 : dt * static_cast<double>(v.size() - 1); }
  /// Linear interpolation, clamped at both ends.
  double at(double t) const;
  /// Piecewise-constant derivative on each sample interval.
  std::vector<double> acceleration() const;

  static SpeedProfile constant(double speed, double duration, double dt = 0.01);
  static SpeedProfile ramp(double v_start, double v_end, double ramp_time, double duration, double dt = 0.01);
};

struct TimeVaryingReport {
  double v_min;
  double v_max;
  double sigma;
  double max_real_eigenvalue;  // over the gamma grid
  bool eig_margin_ok;
  double accel_energy;        // integral of v_dot^2, m^2/s^3
  double gamma_rate_bound;    // integral of gamma_dot^2 bounded by accel_energy / v_min^4
  double matrix_norm_bound;   // max spectral norm of A(gamma) over the grid
  double derivative_energy_bound;  // ||A1||^2 * gamma_rate_bound
  bool bounded_ok;
  bool energy_ok;
  bool ok() const { return eig_margin_ok && bounded_ok && energy_ok; }
};

/// Checks the frozen-speed conditions for exponential stability of the time-varying loop:
/// eigenvalue margin sigma over gamma in [1/v_max, 1/v_min], bounded A, finite acceleration energy.
TimeVaryingReport check_time_varying(const SpeedProfile& profile, const VehicleParams<double>& p,
                                      const ActuatorParams<double>& act, const Gains<double>& k, double sigma,
                                      double v_min, double v_max, int gamma_points = 200);

/// Maximum real part of the closed-loop eigenvalues at each speed.
std::vector<double> eigen_sweep(const VehicleParams<double>& p, const ActuatorParams<double>& act,
                                const Gains<double>& k, const std::vector<double>& speeds);

}  // namespace convoy
