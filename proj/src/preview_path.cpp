#include "convoy/preview_path.hpp"

#include <algorithm>

namespace convoy {

void PreviewBuffer::ingest(const GpsSample& sample, const GroundState<double>& ego) {
  if (!std::isfinite(sample.x) || !std::isfinite(sample.y) || !std::isfinite(sample.time))
    throw Error(ErrorKind::Domain, "non-finite GPS sample");
  const double d = distance_ahead(ego, sample.x, sample.y);
  const auto pos = std::upper_bound(samples_.begin(), samples_.end(), d, [&](double key, const GpsSample& s) {
    return key < distance_ahead(ego, s.x, s.y);
  });
  samples_.insert(pos, sample);
  std::erase_if(samples_, [&](const GpsSample& s) {
    return distance_ahead(ego, s.x, s.y) < -config_.behind_margin;
  });
}

std::vector<GpsSample> PreviewBuffer::window(const GroundState<double>& ego, std::optional<Source> only) const {
  std::vector<std::pair<double, GpsSample>> keyed;
  for (const GpsSample& s : samples_) {
    if (only && s.source != *only) continue;
    const double d = distance_ahead(ego, s.x, s.y);
    if (d >= -config_.behind_margin && d <= config_.preview_length) keyed.emplace_back(d, s);
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first < r.first;
    return l.second.time < r.second.time;
  });
  std::vector<GpsSample> out;
  out.reserve(keyed.size());
  for (auto& [d, s] : keyed) out.push_back(s);
  return out;
}

namespace {

std::optional<Line<double>> fitted_line(std::span<const Point<double>> pts) {
  Point<double> centroid = Point<double>::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  const LineFit<double> fit = detail::tls_line<double>({{pts, 1.0}}, centroid, pts.front(), pts.back());
  const double s0 = (pts.front() - fit.point).dot(fit.direction);
  const double s1 = (pts.back() - fit.point).dot(fit.direction);
  if (!(s1 > s0)) return std::nullopt;
  return Line<double>{fit.point + s0 * fit.direction, fit.direction, s1 - s0};
}

}  // namespace

std::optional<ArcSpline<double>> build_target(std::span<const GpsSample> ordered, double epsilon) {
  const std::size_t n = ordered.size();
  if (n < 3) return std::nullopt;
  std::vector<Point<double>> pts;
  pts.reserve(n);
  for (const auto& s : ordered) pts.push_back(s.position());

  const auto whole_line = [&]() -> std::optional<ArcSpline<double>> {
    auto line = fitted_line(pts);
    if (!line) return std::nullopt;
    return ArcSpline<double>{{*line}};
  };

  const std::optional<std::size_t> k = line_prefix_split<double>(pts, epsilon);
  if (k && *k == n) return whole_line();

  // Line over points [0, k), arc fitted to points [k - 1, n).
  const auto compose = [&](std::optional<std::size_t> split) -> std::optional<ArcSpline<double>> {
    const std::size_t arc_begin = split ? *split - 1 : 0;
    if (n - arc_begin < 3) return whole_line();
    std::vector<Point<double>> prec, lead;
    for (std::size_t i = arc_begin; i < n; ++i)
      (ordered[i].source == Source::Lead ? lead : prec).push_back(pts[i]);
    const double alpha = lead.empty() ? 1.0 : prec.empty() ? 0.0 : 0.5;
    const auto fit = fit_circle<double>(prec, lead, alpha);
    const auto* circle = std::get_if<CircleFit<double>>(&fit);
    if (!circle) return whole_line();

    ArcSpline<double> spline;
    Point<double> arc_start = pts[arc_begin];
    if (split) {
      auto line = fitted_line(std::span<const Point<double>>(pts).first(*split));
      if (!line) return whole_line();
      arc_start = line->end();
      if (std::abs((arc_start - circle->center).norm() - circle->radius) >= epsilon) return std::nullopt;
      spline.segments.emplace_back(*line);
    }
    const Point<double>& arc_end = pts.back();
    // Net signed angle swept about the center by consecutive samples.
    double swept = 0;
    for (std::size_t i = arc_begin + 1; i < n; ++i) {
      const Point<double> u = pts[i - 1] - circle->center, w = pts[i] - circle->center;
      swept += std::atan2(cross2<double>(u, w), u.dot(w));
    }
    const double turn = swept > 0 ? 1.0 : -1.0;
    const double phi0 = std::atan2(arc_start.y() - circle->center.y(), arc_start.x() - circle->center.x());
    const double phi1 = std::atan2(arc_end.y() - circle->center.y(), arc_end.x() - circle->center.x());
    double sweep = std::fmod(turn * (phi1 - phi0), 2 * std::numbers::pi);
    if (sweep < 0) sweep += 2 * std::numbers::pi;
    if (!(sweep > 0)) return whole_line();
    spline.segments.emplace_back(Arc<double>{circle->center, circle->radius, turn / circle->radius, phi0, sweep});
    return spline;
  };

  // A prefix whose arc does not meet the line end within epsilon is dropped: one arc spans the window.
  if (k)
    if (auto spline = compose(k)) return spline;
  return compose(std::nullopt);
}

std::optional<ArcSpline<double>> build_target(const PreviewBuffer& buffer, const GroundState<double>& ego,
                                              TargetMode mode) {
  std::optional<Source> only;
  if (mode == TargetMode::SeparateLead) only = Source::Lead;
  if (mode == TargetMode::SeparatePreceding) only = Source::Preceding;
  const std::vector<GpsSample> window = buffer.window(ego, only);
  return build_target(window, buffer.config().epsilon);
}

}  // namespace convoy
