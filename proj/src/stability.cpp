#include "convoy/stability.hpp"

#include <cmath>
#include <limits>

namespace convoy {

void GridSpec::validate() const {
  for (const Axis* axis : {&ke, &ktheta, &komega}) {
    if (axis->count < 1 || !(axis->hi >= axis->lo) || (axis->count > 1 && !(axis->hi > axis->lo)))
      throw Error(ErrorKind::Domain, "grid axes need count >= 1 and hi > lo");
  }
}

std::size_t StabRegion::count(StabilityClass c) const {
  return static_cast<std::size_t>(std::count(classes.begin(), classes.end(), c));
}

StabRegion stab_region(const VehicleParams<double>& p, const ActuatorParams<double>& act, double speed,
                       const GridSpec& grid) {
  grid.validate();
  p.validate();
  act.validate();
  StabRegion region{grid, {speed}, std::vector<StabilityClass>(grid.size())};

  for (int i = 0; i < grid.ke.count; ++i)
    for (int j = 0; j < grid.ktheta.count; ++j)
      for (int l = 0; l < grid.komega.count; ++l)
        region.classes[grid.index(i, j, l)] = hurwitz(char_coeffs(p, act, grid.gains(i, j, l), speed));

  // Mark the unstable side of every stable/unstable flip.
  std::vector<StabilityClass> marked = region.classes;
  const int di[6] = {1, -1, 0, 0, 0, 0};
  const int dj[6] = {0, 0, 1, -1, 0, 0};
  const int dl[6] = {0, 0, 0, 0, 1, -1};
  for (int i = 0; i < grid.ke.count; ++i)
    for (int j = 0; j < grid.ktheta.count; ++j)
      for (int l = 0; l < grid.komega.count; ++l) {
        if (region.at(i, j, l) != StabilityClass::Unstable) continue;
        for (int n = 0; n < 6; ++n) {
          const int a = i + di[n], b = j + dj[n], c = l + dl[n];
          if (a < 0 || b < 0 || c < 0 || a >= grid.ke.count || b >= grid.ktheta.count || c >= grid.komega.count)
            continue;
          if (region.at(a, b, c) == StabilityClass::Stable) {
            marked[grid.index(i, j, l)] = StabilityClass::Boundary;
            break;
          }
        }
      }
  region.classes = std::move(marked);
  return region;
}

StabRegion intersect_regions(const std::vector<StabRegion>& regions) {
  if (regions.empty()) throw Error(ErrorKind::GridMismatch, "no regions to intersect");
  StabRegion out = regions.front();
  for (std::size_t r = 1; r < regions.size(); ++r) {
    const StabRegion& next = regions[r];
    if (!(next.grid == out.grid) || next.classes.size() != out.classes.size())
      throw Error(ErrorKind::GridMismatch, "regions do not share one grid");
    out.speeds.insert(out.speeds.end(), next.speeds.begin(), next.speeds.end());
    for (std::size_t k = 0; k < out.classes.size(); ++k) {
      const StabilityClass a = out.classes[k], b = next.classes[k];
      if (a == StabilityClass::Unstable || b == StabilityClass::Unstable)
        out.classes[k] = StabilityClass::Unstable;
      else if (a == StabilityClass::Boundary || b == StabilityClass::Boundary)
        out.classes[k] = StabilityClass::Boundary;
    }
  }
  return out;
}

std::vector<BoundaryPoint> complex_root_boundary(const VehicleParams<double>& p, const ActuatorParams<double>& act,
                                                 double speed, double komega, const std::vector<double>& omegas) {
  // The coefficients are affine in the gains; recover each gain's contribution exactly.
  const auto base = char_coeffs(p, act, {0.0, 0.0, komega}, speed).coeffs;
  const auto with_ke = char_coeffs(p, act, {1.0, 0.0, komega}, speed).coeffs;
  const auto with_kt = char_coeffs(p, act, {0.0, 1.0, komega}, speed).coeffs;

  auto split = [](const std::array<double, 7>& c, double w) {
    // Delta(j w) = (c0 - c2 w^2 + c4 w^4 - c6 w^6) + j (c1 w - c3 w^3 + c5 w^5)
    const double w2 = w * w;
    const double re = c[0] - c[2] * w2 + c[4] * w2 * w2 - c[6] * w2 * w2 * w2;
    const double im = w * (c[1] - c[3] * w2 + c[5] * w2 * w2);
    return std::pair{re, im};
  };

  std::vector<BoundaryPoint> out;
  for (const double w : omegas) {
    if (!(w > 0)) continue;
    std::array<double, 7> e{}, t{};
    for (std::size_t k = 0; k < 7; ++k) {
      e[k] = with_ke[k] - base[k];
      t[k] = with_kt[k] - base[k];
    }
    const auto [b_re, b_im] = split(base, w);
    const auto [e_re, e_im] = split(e, w);
    const auto [t_re, t_im] = split(t, w);
    Eigen::Matrix2d m;
    m << e_re, t_re, e_im, t_im;
    const double det = m.determinant();
    if (std::abs(det) <= 1e-12 * m.cwiseAbs().maxCoeff() * m.cwiseAbs().maxCoeff()) continue;
    const Eigen::Vector2d k = m.partialPivLu().solve(Eigen::Vector2d(-b_re, -b_im));
    out.push_back({w, k(0), k(1)});
  }
  return out;
}

double SpeedProfile::at(double t) const {
  if (v.empty()) throw Error(ErrorKind::Domain, "empty speed profile");
  const double u = (t - t0) / dt;
  if (u <= 0) return v.front();
  const auto last = static_cast<double>(v.size() - 1);
  if (u >= last) return v.back();
  const auto i = static_cast<std::size_t>(std::floor(u));
  const double f = u - static_cast<double>(i);
  return v[i] + f * (v[i + 1] - v[i]);
}

std::vector<double> SpeedProfile::acceleration() const {
  std::vector<double> a;
  if (v.size() < 2) return a;
  a.reserve(v.size() - 1);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) a.push_back((v[i + 1] - v[i]) / dt);
  return a;
}

SpeedProfile SpeedProfile::constant(double speed, double duration, double dt) {
  const auto n = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  return {0.0, dt, std::vector<double>(n, speed)};
}

SpeedProfile SpeedProfile::ramp(double v_start, double v_end, double ramp_time, double duration, double dt) {
  SpeedProfile prof = constant(v_start, duration, dt);
  for (std::size_t i = 0; i < prof.v.size(); ++i) {
    const double t = dt * static_cast<double>(i);
    prof.v[i] = t >= ramp_time ? v_end : v_start + (v_end - v_start) * t / ramp_time;
  }
  return prof;
}

TimeVaryingReport check_time_varying(const SpeedProfile& profile, const VehicleParams<double>& p,
                                      const ActuatorParams<double>& act, const Gains<double>& k, double sigma,
                                      double v_min, double v_max, int gamma_points) {
  if (!(v_min >= kMinSpeed && v_max >= v_min)) throw Error(ErrorKind::Domain, "invalid speed bounds");
  if (profile.v.empty()) throw Error(ErrorKind::Domain, "empty speed profile");
  for (const double v : profile.v)
    if (!(v >= v_min - 1e-12 && v <= v_max + 1e-12))
      throw Error(ErrorKind::Domain, "speed profile leaves [v_min, v_max]");

  TimeVaryingReport r{};
  r.v_min = v_min;
  r.v_max = v_max;
  r.sigma = sigma;

  const double g_lo = 1.0 / v_max, g_hi = 1.0 / v_min;
  const auto loop = assemble_A(p, act, k, g_lo);
  r.max_real_eigenvalue = -std::numeric_limits<double>::infinity();
  r.matrix_norm_bound = 0;
  const int n = std::max(gamma_points, 2);
  for (int i = 0; i < n; ++i) {
    const double g = g_lo + (g_hi - g_lo) * i / (n - 1);
    const Eigen::Matrix<double, 6, 6> a = loop.at(g);
    r.max_real_eigenvalue = std::max(r.max_real_eigenvalue, max_real_eigenvalue(a));
    Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(a);
    r.matrix_norm_bound = std::max(r.matrix_norm_bound, svd.singularValues()(0));
  }
  r.eig_margin_ok = r.max_real_eigenvalue <= -sigma;

  r.accel_energy = 0;
  for (const double a : profile.acceleration()) r.accel_energy += a * a * profile.dt;
  r.gamma_rate_bound = r.accel_energy / std::pow(v_min, 4);
  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> slope_svd(loop.slope);
  const double slope_norm = slope_svd.singularValues()(0);
  r.derivative_energy_bound = slope_norm * slope_norm * r.gamma_rate_bound;
  r.energy_ok = std::isfinite(r.accel_energy);
  r.bounded_ok = std::isfinite(r.matrix_norm_bound);
  return r;
}

std::vector<double> eigen_sweep(const VehicleParams<double>& p, const ActuatorParams<double>& act,
                                const Gains<double>& k, const std::vector<double>& speeds) {
  std::vector<double> out;
  out.reserve(speeds.size());
  for (const double v : speeds) {
    require_speed(v);
    out.push_back(max_real_eigenvalue(assemble_A(p, act, k, 1.0 / v).matrix()));
  }
  return out;
}

}  // namespace convoy
