#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "convoy/error.hpp"
#include "convoy/vehicle_model.hpp"

namespace convoy {

template <typename Scalar>
using Point = Eigen::Matrix<Scalar, 2, 1>;

inline Eigen::Vector2d left_normal(const Eigen::Vector2d& d) { return {-d.y(), d.x()}; }

template <typename Scalar>
Scalar cross2(const Point<Scalar>& u, const Point<Scalar>& v) {
  return u.x() * v.y() - u.y() * v.x();
}

// ----------------------------------------------------------------------------
// Path segments

/// Straight segment from `anchor` along unit `direction` for `length` metres.
template <typename Scalar>
struct Line {
  Point<Scalar> anchor;
  Point<Scalar> direction;
  Scalar length;

  Scalar curvature() const { return Scalar(0); }
  Point<Scalar> point_at(Scalar s) const { return anchor + s * direction; }
  Point<Scalar> start() const { return anchor; }
  Point<Scalar> end() const { return point_at(length); }
  Scalar heading() const { return std::atan2(direction.y(), direction.x()); }
  Scalar param(const Point<Scalar>& p) const { return (p - anchor).dot(direction); }
};

/// Circular arc traversed from `start_angle` through `sweep` radians in the direction given by
/// the sign of `curvature` (positive: counter-clockwise, a left turn).
template <typename Scalar>
struct Arc {
  Point<Scalar> center;
  Scalar radius;
  Scalar curvature;
  Scalar start_angle;
  Scalar sweep;

  Scalar turn() const { return curvature >= 0 ? Scalar(1) : Scalar(-1); }
  Scalar length() const { return radius * sweep; }
  Point<Scalar> point_at(Scalar s) const {
    const Scalar phi = start_angle + turn() * s / radius;
    return center + radius * Point<Scalar>(std::cos(phi), std::sin(phi));
  }
  Point<Scalar> start() const { return point_at(Scalar(0)); }
  Point<Scalar> end() const { return point_at(length()); }
  /// Arc length of the radial projection of p, measured from the start along travel. Angles are
  /// wrapped about the arc midpoint so the result is continuous over the whole arc.
  Scalar param(const Point<Scalar>& p) const {
    const Scalar phi = std::atan2(p.y() - center.y(), p.x() - center.x());
    const Scalar rel = wrap_angle(turn() * (phi - start_angle) - sweep / 2) + sweep / 2;
    return rel * radius;
  }
};

template <typename Scalar>
using PathSegment = std::variant<Line<Scalar>, Arc<Scalar>>;

template <typename Scalar>
Scalar segment_length(const PathSegment<Scalar>& seg) {
  return std::visit([](const auto& s) -> Scalar {
    if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Line<Scalar>>) return s.length;
    else return s.length();
  }, seg);
}

template <typename Scalar>
Scalar segment_curvature(const PathSegment<Scalar>& seg) {
  if (const auto* arc = std::get_if<Arc<Scalar>>(&seg)) return arc->curvature;
  return Scalar(0);
}

template <typename Scalar>
Point<Scalar> segment_start(const PathSegment<Scalar>& seg) {
  return std::visit([](const auto& s) { return s.start(); }, seg);
}

template <typename Scalar>
Point<Scalar> segment_end(const PathSegment<Scalar>& seg) {
  return std::visit([](const auto& s) { return s.end(); }, seg);
}

template <typename Scalar>
bool is_arc(const PathSegment<Scalar>& seg) {
  return std::holds_alternative<Arc<Scalar>>(seg);
}

/// Piecewise-constant-curvature target: an optional line followed by an optional arc.
template <typename Scalar>
struct ArcSpline {
  std::vector<PathSegment<Scalar>> segments;

  bool empty() const { return segments.empty(); }
  /// Largest position gap between consecutive segments.
  Scalar max_junction_gap() const {
    Scalar gap(0);
    for (std::size_t i = 1; i < segments.size(); ++i)
      gap = std::max(gap, (segment_end(segments[i - 1]) - segment_start(segments[i])).norm());
    return gap;
  }
};

// ----------------------------------------------------------------------------
// Line-prefix test

/// Largest k >= 3 such that points 2..k-1 lie within `epsilon` of the line through points 1
/// and k (1-based). Returns std::nullopt if even k = 3 fails.
template <typename Scalar>
std::optional<std::size_t> line_prefix_split(std::span<const Point<Scalar>> pts, Scalar epsilon) {
  if (pts.size() < 3) throw Error(ErrorKind::InsufficientData, "line prefix test needs at least 3 points");
  for (std::size_t k = pts.size(); k >= 3; --k) {
    const Point<Scalar>& first = pts[0];
    const Point<Scalar> chord = pts[k - 1] - first;
    const Scalar len = chord.norm();
    bool ok = true;
    for (std::size_t i = 1; i + 1 < k && ok; ++i) {
      const Point<Scalar> d = pts[i] - first;
      const Scalar dist = len > Scalar(0) ? std::abs(cross2<Scalar>(chord, d)) / len : d.norm();
      ok = dist <= epsilon;
    }
    if (ok) return k;
  }
  return std::nullopt;
}

// ----------------------------------------------------------------------------
// Weighted algebraic circle fit

template <typename Scalar>
struct CircleFit {
  Point<Scalar> center;
  Scalar radius;
};

/// Total-least-squares line through weighted points, oriented along input order.
template <typename Scalar>
struct LineFit {
  Point<Scalar> point;
  Point<Scalar> direction;
};

template <typename Scalar>
using CircleFitResult = std::variant<CircleFit<Scalar>, LineFit<Scalar>>;

inline constexpr double kFitRcondThreshold = 1e-10;

namespace detail {

template <typename Scalar>
struct WeightedSet {
  std::span<const Point<Scalar>> pts;
  Scalar weight;
};

template <typename Scalar>
LineFit<Scalar> tls_line(std::initializer_list<WeightedSet<Scalar>> sets, const Point<Scalar>& centroid,
                         const Point<Scalar>& first, const Point<Scalar>& last) {
  Eigen::Matrix<Scalar, 2, 2> cov = Eigen::Matrix<Scalar, 2, 2>::Zero();
  for (const auto& set : sets)
    for (const auto& p : set.pts) {
      const Point<Scalar> d = p - centroid;
      cov += set.weight * d * d.transpose();
    }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 2, 2>> es(cov);
  Point<Scalar> dir = es.eigenvectors().col(1);
  if (dir.dot(last - first) < Scalar(0)) dir = -dir;
  return {centroid, dir.normalized()};
}

}  // namespace detail

/// Minimizes w_p sum e(p_i)^2 + w_l sum e(l_j)^2 with e(x, y) = (x - Xc)^2 + (y - Yc)^2 - R^2
/// through the 3x3 normal equations in (Xc, Yc, R^2 - Xc^2 - Yc^2). The points are centred and
/// scaled first, which leaves the minimizer unchanged. A near-singular system (reciprocal
/// condition below kFitRcondThreshold) yields the weighted total-least-squares line.
template <typename Scalar>
CircleFitResult<Scalar> fit_circle_weighted(std::span<const Point<Scalar>> preceding, Scalar w_preceding,
                                            std::span<const Point<Scalar>> lead, Scalar w_lead) {
  if (!(w_preceding >= 0 && w_lead >= 0)) throw Error(ErrorKind::Domain, "fit weights must be non-negative");
  const std::size_t effective =
      (w_preceding > 0 ? preceding.size() : 0) + (w_lead > 0 ? lead.size() : 0);
  if (effective < 3) throw Error(ErrorKind::InsufficientData, "circle fit needs at least 3 weighted points");

  const std::initializer_list<detail::WeightedSet<Scalar>> sets = {{preceding, w_preceding}, {lead, w_lead}};
  Scalar total(0);
  Point<Scalar> centroid = Point<Scalar>::Zero();
  for (const auto& set : sets)
    for (const auto& p : set.pts) {
      centroid += set.weight * p;
      total += set.weight;
    }
  centroid /= total;
  Scalar spread(0);
  for (const auto& set : sets)
    for (const auto& p : set.pts) spread += set.weight * (p - centroid).squaredNorm();
  const Scalar scale = std::sqrt(spread / total);

  const Point<Scalar>& first = w_preceding > 0 && !preceding.empty() ? preceding.front() : lead.front();
  const Point<Scalar>& last = w_lead > 0 && !lead.empty() ? lead.back() : preceding.back();
  if (!(scale > 0)) return detail::tls_line<Scalar>(sets, centroid, first, last);

  Eigen::Matrix<Scalar, 3, 3> normal = Eigen::Matrix<Scalar, 3, 3>::Zero();
  Eigen::Matrix<Scalar, 3, 1> rhs = Eigen::Matrix<Scalar, 3, 1>::Zero();
  for (const auto& set : sets) {
    if (set.weight == Scalar(0)) continue;
    for (const auto& p : set.pts) {
      const Point<Scalar> u = (p - centroid) / scale;
      const Eigen::Matrix<Scalar, 3, 1> phi(2 * u.x(), 2 * u.y(), Scalar(1));
      normal += set.weight * phi * phi.transpose();
      rhs += set.weight * phi * u.squaredNorm();
    }
  }
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, 3, 3>> svd(normal, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(2) > Scalar(kFitRcondThreshold) * sv(0))) return detail::tls_line<Scalar>(sets, centroid, first, last);
  const Eigen::Matrix<Scalar, 3, 1> sol = svd.solve(rhs);
  const Scalar r2 = sol(2) + sol(0) * sol(0) + sol(1) * sol(1);
  if (!(r2 > 0) || !sol.allFinite()) return detail::tls_line<Scalar>(sets, centroid, first, last);
  return CircleFit<Scalar>{centroid + scale * Point<Scalar>(sol(0), sol(1)), scale * std::sqrt(r2)};
}

/// alpha weights the preceding-vehicle points, 1 - alpha the lead-vehicle points.
template <typename Scalar>
CircleFitResult<Scalar> fit_circle(std::span<const Point<Scalar>> preceding, std::span<const Point<Scalar>> lead,
                                   Scalar alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw Error(ErrorKind::Domain, "alpha must lie in [0, 1]");
  return fit_circle_weighted(preceding, alpha, lead, Scalar(1) - alpha);
}

// ----------------------------------------------------------------------------
// Preview buffer

enum class Source { Lead, Preceding };

struct GpsSample {
  double x;
  double y;
  Source source;
  double time;

  Eigen::Vector2d position() const { return {x, y}; }
};

struct PreviewConfig {
  double preview_length{30.0};  // m ahead of ego
  double behind_margin{2.0};    // m behind ego kept in storage and window
  double epsilon{0.10};         // line-prefix threshold, m
};

/// Per-vehicle store of communicated samples from the lead and preceding vehicles.
class PreviewBuffer {
 public:
  explicit PreviewBuffer(PreviewConfig config = {}) : config_(config) {}

  /// Inserts in order of distance ahead of `ego` and evicts samples that fell behind the margin.
  void ingest(const GpsSample& sample, const GroundState<double>& ego);

  /// Samples within [-behind_margin, preview_length] ahead of ego, sorted by projected
  /// distance along the ego heading with ties broken by time stamp.
  std::vector<GpsSample> window(const GroundState<double>& ego, std::optional<Source> only = std::nullopt) const;

  std::size_t size() const { return samples_.size(); }
  const std::vector<GpsSample>& samples() const { return samples_; }
  const PreviewConfig& config() const { return config_; }

 private:
  PreviewConfig config_;
  std::vector<GpsSample> samples_;
};

/// Signed distance of p ahead of the ego along its heading.
inline double distance_ahead(const GroundState<double>& ego, double x, double y) {
  return (x - ego.x) * std::cos(ego.heading) + (y - ego.y) * std::sin(ego.heading);
}

enum class TargetMode { Composite, SeparateLead, SeparatePreceding };

/// Builds the target from the active window: at most one line prefix, then at most one arc fitted
/// to the remainder. Composite mode merges both sources with equal weight. Returns std::nullopt
/// when the window holds fewer than three points.
std::optional<ArcSpline<double>> build_target(const PreviewBuffer& buffer, const GroundState<double>& ego,
                                              TargetMode mode);

/// The same construction applied to an already ordered sample list.
std::optional<ArcSpline<double>> build_target(std::span<const GpsSample> ordered, double epsilon);

}  // namespace convoy
