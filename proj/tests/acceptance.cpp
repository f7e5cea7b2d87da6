// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "convoy/io.hpp"

using namespace convoy;
using Pt = Point<double>;

namespace {

const auto P = VehicleParams<double>::mkz();
const auto ACT = ActuatorParams<double>::mkz();
const Gains<double> K{0.06, 0.96, 0.08};
const double kDesignMph[] = {10, 20, 30, 40, 50, 60, 67};

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  fmt::print("{} {:>2} {}: {}\n", ok ? "PASS" : "FAIL", id, name, detail);
  failures += ok ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
void guarded(int id, const std::string& name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

ConvoyConfig lane_change_scenario() {
  ConvoyConfig c;
  c.vehicles = 4;
  c.speed = 30;
  c.lane_offset = 3.5;
  c.schedule = {{8, 15}, {24, 30}};
  return c;
}

std::vector<TraceRecord> of_vehicle(const ConvoyTrace& trace, int v) {
  std::vector<TraceRecord> out;
  for (const auto& r : trace)
    if (r.vehicle == v) out.push_back(r);
  return out;
}

std::string list(const std::vector<double>& v, int digits = 4) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt::format("{:.{}f}", v[i], digits);
  return s + "]";
}

// Shared checks for criteria 4 and 5.
struct ConvoyVerdict {
  bool band{true};
  bool timing{true};
  bool monotone{true};
};

ConvoyVerdict judge(const ConvoyConfig& c, const StringStabilityReport& rep) {
  std::vector<double> edges;
  for (const auto& w : c.schedule) {
    edges.push_back(w.start);
    edges.push_back(w.end);
  }
  ConvoyVerdict v;
  for (std::size_t i = 1; i < rep.peaks.size(); ++i) {
    v.band = v.band && rep.peaks[i] >= 0.02 && rep.peaks[i] <= 0.15;
    double nearest = INFINITY;
    for (double e : edges) nearest = std::min(nearest, std::abs(rep.road_times[i] - e));
    v.timing = v.timing && nearest <= 2.0;
  }
  v.monotone = non_increasing(std::vector<double>(rep.peaks.begin() + 1, rep.peaks.end()), 0.05);
  return v;
}

std::vector<std::complex<double>> eigenvalues(const Eigen::Matrix<double, 6, 6>& a) {
  const Eigen::VectorXcd ev = a.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

// Plain normal equations in extended precision, no centring.
CircleFit<double> oracle_fit(const std::vector<Pt>& pts) {
  using Mat = Eigen::Matrix<long double, 3, 3>;
  using Vec = Eigen::Matrix<long double, 3, 1>;
  Mat N = Mat::Zero();
  Vec r = Vec::Zero();
  for (const auto& q : pts) {
    const long double x = q.x(), y = q.y();
    const Vec phi(2 * x, 2 * y, 1);
    N += phi * phi.transpose();
    r += phi * (x * x + y * y);
  }
  const Vec s = N.fullPivLu().solve(r);
  return {Pt(double(s(0)), double(s(1))), double(std::sqrt(s(2) + s(0) * s(0) + s(1) * s(1)))};
}

std::vector<Pt> arc_points(const Pt& c, double R, double phi0, double sweep, int n) {
  std::vector<Pt> out;
  for (int i = 0; i < n; ++i) {
    const double phi = phi0 + sweep * i / (n - 1);
    out.push_back(c + R * Pt(std::cos(phi), std::sin(phi)));
  }
  return out;
}

// ----------------------------------------------------------------------------

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = -INFINITY, worst_ball = -INFINITY;
  int neighbours = 0;
  const double h = 0.0025;
  for (double mph : kDesignMph) {
    const double gamma = 1 / (mph * kMphToMps);
    worst = std::max(worst, max_real_eigenvalue(assemble_A(P, ACT, K, gamma).matrix()));
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j)
        for (int l = -2; l <= 2; ++l) {
          if (i * i + j * j + l * l > 4) continue;
          const Gains<double> g{K.ke + i * h, K.ktheta + j * h, K.komega + l * h};
          worst_ball = std::max(worst_ball, max_real_eigenvalue(assemble_A(P, ACT, g, gamma).matrix()));
          ++neighbours;
        }
  }
  const double took = seconds_since(t0);
  report(1, "stabilizing gains", worst < 0 && worst_ball < 0 && took < 10,
         fmt::format("max Re at 7 speeds {:.4f}, over {} ball neighbours (radius 0.005) {:.4f}, {:.2f} s", worst,
                     neighbours, worst_ball, took));
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240);
  std::uniform_real_distribution<double> u(0, 1);
  auto span = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto p = P;
    p.mass = span(1000, 3000);
    p.yaw_inertia = span(1500, 5000);
    p.cf = span(5e4, 4e6);
    p.cr = span(5e4, 4e5);
    p.a = span(1.0, 1.8);
    p.b = span(1.0, 1.8);
    const ActuatorParams<double> act{span(0.3, 1.0), span(10, 30)};
    const Gains<double> k{span(0, 0.5), span(0, 3), span(0, 0.5)};
    const double v = span(5, 35);
    auto roots = poly_roots(char_coeffs(p, act, k, v).coeffs);
    auto eig = eigenvalues(assemble_A(p, act, k, 1 / v).matrix());
    for (const auto& x : roots) {
      auto it = std::min_element(eig.begin(), eig.end(),
                                 [&](const auto& a, const auto& b) { return std::abs(a - x) < std::abs(b - x); });
      worst = std::max(worst, std::abs(*it - x));
      eig.erase(it);
    }
  }
  const double took = seconds_since(t0);
  report(2, "polynomial/matrix oracle", worst < 1e-6 && took < 5,
         fmt::format("max root-eigenvalue distance {:.3e} over 100 draws, {:.2f} s", worst, took));
}

void criterion3() {
  double worst = 0;
  for (int trial = 0; trial < 3; ++trial) {
    const Gains<double> k = trial == 0 ? K : Gains<double>{0.1 * trial, 0.5 * trial, 0.05 * trial};
    const double gammas[5] = {1 / 30.0, 1 / 20.0, 1 / 12.0, 1 / 7.0, 1 / 4.4704};
    Eigen::Matrix<double, 5, 3> V;
    Eigen::Matrix<double, 5, 7> Y;
    for (int i = 0; i < 5; ++i) {
      V.row(i) << 1, gammas[i], gammas[i] * gammas[i];
      const auto c = char_coeffs(P, ACT, k, 1 / gammas[i]);
      for (int j = 0; j < 7; ++j) Y(i, j) = c[j];
    }
    for (int j = 0; j < 7; ++j) {
      const Eigen::Matrix<double, 5, 1> y = Y.col(j);
      const Eigen::Vector3d fit = V.colPivHouseholderQr().solve(y);
      if (y.norm() > 0) worst = std::max(worst, (V * fit - y).norm() / y.norm());
    }
  }
  report(3, "quadratic in gamma", worst < 1e-9, fmt::format("max relative residual {:.3e}", worst));
}

ConvoyResult composite_run;

void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = lane_change_scenario();
  composite_run = run(c);
  const double took = seconds_since(t0);
  const auto& rep = composite_run.report;
  const auto v = judge(c, rep);
  report(4, "composite convoy", v.band && v.timing && v.monotone && took < 60,
         fmt::format("peaks {} band {} road-times {} timing {} monotone {} {:.2f} s", list(rep.peaks),
                     v.band ? "ok" : "no", list(rep.road_times, 2), v.timing ? "ok" : "no", v.monotone ? "yes" : "no",
                     took));
}

void criterion5() {
  auto c = lane_change_scenario();
  c.architecture = {Architecture::Separate, 0.5};
  const auto sep = run(c);
  const auto& rep = sep.report;
  const auto v = judge(c, rep);
  double diff = 0;
  const auto& a = composite_run.trace;
  const auto& b = sep.trace;
  bool aligned = a.size() == b.size();
  for (std::size_t i = 0; aligned && i < a.size(); ++i) {
    aligned = a[i].vehicle == b[i].vehicle && a[i].t == b[i].t;
    diff = std::max({diff, std::abs(a[i].ground.y - b[i].ground.y), std::abs(a[i].errors.e_lat - b[i].errors.e_lat)});
  }
  report(5, "separate convoy", v.band && v.timing && v.monotone && aligned && diff < 0.05,
         fmt::format("peaks {} band {} timing {} monotone {} max pointwise difference {:.2e} m", list(rep.peaks),
                     v.band ? "ok" : "no", v.timing ? "ok" : "no", v.monotone ? "yes" : "no", diff));
}

void criterion6() {
  auto c = lane_change_scenario();
  c.lead_data = false;
  const auto pre = run(c);
  const bool informed = composite_run.report.monotone;
  const bool preceding_only = pre.report.monotone;
  report(6, "string-instability contrast", informed && !preceding_only,
         fmt::format("lead-informed monotone {} peaks {}; preceding-only monotone {} peaks {}", informed,
                     list(composite_run.report.peaks), preceding_only, list(pre.report.peaks)));
}

void criterion7() {
  ConvoyConfig c;
  c.vehicles = 2;
  c.schedule = {};
  c.duration = 25;
  c.speed_profile = SpeedProfile::ramp(20, 30, 10, c.duration);
  c.initial_offsets = {0.2, 0.2};
  const auto res = run(c);

  const auto prof = *c.speed_profile;
  double energy = 0;
  for (std::size_t i = 1; i < prof.v.size(); ++i) {
    const double a = (prof.v[i] - prof.v[i - 1]) / prof.dt;
    energy += a * a * prof.dt;
  }

  // Least-squares slope of log|e_lat| against time, per vehicle, while above the noise floor.
  double worst_rate = -INFINITY, worst_tail = 0;
  for (int v = 0; v < c.vehicles; ++v) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& r : of_vehicle(res.trace, v)) {
      const double e = std::abs(r.errors.e_lat);
      if (r.t >= 20) worst_tail = std::max(worst_tail, e);
      if (e < 1e-9) continue;
      const double y = std::log(e);
      sx += r.t;
      sy += y;
      sxx += r.t * r.t;
      sxy += r.t * y;
      ++n;
    }
    const double rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    worst_rate = std::max(worst_rate, rate);
  }

  const auto prop = check_time_varying(prof, P, ACT, K, 0.05, 4.47, 30.0);
  const bool ok = worst_rate < 0 && worst_tail < 1e-3 && prop.max_real_eigenvalue <= -0.05 &&
                  std::abs(energy - 10) < 1e-9;
  report(7, "time-varying speed", ok,
         fmt::format("energy {:.6f}, fitted rate {:.3f} 1/s, max |e_lat| after 20 s {:.2e} m, max Re over gamma "
                     "[1/30, 1/4.47] {:.4f}",
                     energy, worst_rate, worst_tail, prop.max_real_eigenvalue));
}

void criterion8() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);

  // (a) circumscribed triples
  double err_a = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pt c(100 * u(rng), 100 * u(rng));
    const double R = 1 + 500 * std::abs(u(rng));
    std::vector<Pt> tri;
    for (int k = 0; k < 3; ++k) {
      const double phi = 0.5 * u(rng) + 2.1 * k;
      tri.push_back(c + R * Pt(std::cos(phi), std::sin(phi)));
    }
    const auto fit = std::get<CircleFit<double>>(fit_circle<double>(tri, {}, 1.0));
    err_a = std::max({err_a, (fit.center - c).norm(), std::abs(fit.radius - R)});
  }

  // (b) noisy data against the extended-precision normal equations
  double err_b = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::normal_distribution<double> n(0, 0.02);
    const double R = 20 + 480 * std::abs(u(rng));
    auto pts = arc_points({0, R}, R, -M_PI / 2, 30 / R, 31);
    for (auto& q : pts) q += Pt(n(rng), n(rng));
    const auto got = std::get<CircleFit<double>>(fit_circle<double>(pts, {}, 1.0));
    const auto want = oracle_fit(pts);
    err_b = std::max({err_b, (got.center - want.center).norm(), std::abs(got.radius - want.radius)});
  }

  // (c) rigid motion
  double err_c = 0;
  {
    std::normal_distribution<double> n(0, 0.02);
    auto p = arc_points({0, 50}, 50, -M_PI / 2, 0.6, 16);
    auto l = arc_points({0, 50.2}, 50.2, -M_PI / 2, 0.6, 16);
    for (auto& q : p) q += Pt(n(rng), n(rng));
    const auto base = std::get<CircleFit<double>>(fit_circle<double>(p, l, 0.5));
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Rotation2Dd rot(M_PI * u(rng));
      const Pt shift(100 * u(rng), 100 * u(rng));
      auto mp = p, ml = l;
      for (auto& q : mp) q = rot * q + shift;
      for (auto& q : ml) q = rot * q + shift;
      const auto moved = std::get<CircleFit<double>>(fit_circle<double>(mp, ml, 0.5));
      err_c = std::max({err_c, (moved.center - (rot * base.center + shift)).norm(),
                        std::abs(moved.radius - base.radius)});
    }
  }

  // (d) Monte-Carlo median radius
  std::vector<double> radii;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 r(seed);
    std::normal_distribution<double> n(0, 0.02);
    auto pts = arc_points({0, 500}, 500, -M_PI / 2, 30.0 / 500, 31);
    for (auto& q : pts) q += Pt(n(r), n(r));
    const auto fit = fit_circle<double>(pts, {}, 1.0);
    const auto* c = std::get_if<CircleFit<double>>(&fit);
    radii.push_back(c ? c->radius : INFINITY);
  }
  std::sort(radii.begin(), radii.end());
  const double median = 0.5 * (radii[49] + radii[50]);

  const bool ok = err_a <= 1e-9 && err_b <= 1e-9 && err_c <= 1e-9 && std::abs(median - 500) <= 50;
  report(8, "circle fit", ok,
         fmt::format("(a) {:.2e} (b) {:.2e} (c) {:.2e} (d) median radius {:.1f} m", err_a, err_b, err_c, median));
}

void criterion9() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  auto pose = [](const Pt& p, double heading) { return GroundState<double>{p.x(), p.y(), heading, 0, 20, 0}; };

  // (a) a 0.1 m step to the left of the reference raises e_lat by 0.1
  double sign_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double kappa = (u(rng) > 0 ? 1 : -1) / (20 + 500 * std::abs(u(rng)));
    const Arc<double> arc{Pt(10 * u(rng), 10 * u(rng)), 1 / std::abs(kappa), kappa, M_PI * u(rng), 1.0};
    const double dir = M_PI * u(rng);
    const Line<double> line{Pt(u(rng), u(rng)), Pt(std::cos(dir), std::sin(dir)), 50};
    for (const PathSegment<double>& seg : {PathSegment<double>(arc), PathSegment<double>(line)}) {
      const double s = 0.5 * segment_length(seg) * (u(rng) + 1);
      Pt p = std::visit([&](const auto& g) { return g.point_at(s); }, seg);
      const auto base = errors(pose(p, 0), seg);
      const double th = base.reference_heading;
      p += 0.1 * Pt(-std::sin(th), std::cos(th));
      sign_err = std::max(sign_err, std::abs(errors(pose(p, 0), seg).e_lat - base.e_lat - 0.1));
    }
  }

  // (b) large radius against the tangent line
  double limit_err = 0;
  {
    const double R = 1e6;
    const Arc<double> arc{Pt(0, R), R, 1 / R, -M_PI / 2, 30 / R};
    const Line<double> tangent{Pt(0, 0), Pt(1, 0), 30};
    for (int trial = 0; trial < 100; ++trial) {
      GroundState<double> g{15 + 15 * u(rng), u(rng), 0.1 * u(rng), 0.1 * u(rng), 30, 0};
      const auto a = errors_arc(g, arc), l = errors_line(g, tangent);
      limit_err = std::max({limit_err, std::abs(a.e_lat - l.e_lat), std::abs(a.heading_error - l.heading_error),
                            std::abs(a.heading_error_rate - l.heading_error_rate)});
    }
  }

  // (c) brute-force projection onto a dense polyline
  double proj_err = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double R = 10 + 200 * std::abs(u(rng));
    const Arc<double> arc{Pt(5 * u(rng), 5 * u(rng)), R, (u(rng) > 0 ? 1 : -1) / R, M_PI * u(rng), 20 / R};
    const Pt on = arc.point_at(arc.length() * (0.5 + 0.4 * u(rng)));
    const Pt p = on + 2 * Pt(u(rng), u(rng));
    const int n = 20000;
    double best = INFINITY;
    Pt prev = arc.point_at(0);
    for (int i = 1; i <= n; ++i) {
      const Pt cur = arc.point_at(arc.length() * i / n);
      const Pt d = cur - prev;
      const double t = std::clamp((p - prev).dot(d) / d.squaredNorm(), 0.0, 1.0);
      best = std::min(best, (prev + t * d - p).norm());
      prev = cur;
    }
    proj_err = std::max(proj_err, std::abs(std::abs(errors_arc(pose(p, 0), arc).e_lat) - best));
  }

  report(9, "error geometry", sign_err < 1e-6 && limit_err < 1e-3 && proj_err < 1e-4,
         fmt::format("sign {:.2e}, R=1e6 limit {:.2e}, projection oracle {:.2e} m", sign_err, limit_err, proj_err));
}

void criterion10() {
  const auto c = lane_change_scenario();
  std::ostringstream a, b;
  io::write_trace_csv(a, run(c).trace);
  io::write_trace_csv(b, run(c).trace);
  const bool same = a.str() == b.str();
  report(10, "determinism", same && !a.str().empty(), fmt::format("{} bytes, identical {}", a.str().size(), same));
}

}  // namespace

int main() {
  guarded(1, "stabilizing gains", criterion1);
  guarded(2, "polynomial/matrix oracle", criterion2);
  guarded(3, "quadratic in gamma", criterion3);
  guarded(4, "composite convoy", criterion4);
  guarded(5, "separate convoy", criterion5);
  guarded(6, "string-instability contrast", criterion6);
  guarded(7, "time-varying speed", criterion7);
  guarded(8, "circle fit", criterion8);
  guarded(9, "error geometry", criterion9);
  guarded(10, "determinism", criterion10);
  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
