#include "shrinkerlab/curvegeo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "shrinkerlab/errors.hpp"

namespace shrinkerlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinMetricSpeed = 1e-10;
constexpr double kMaxSpacingRatio = 10.0;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Sign of the orientation of (a, b, c): +1 ccw, -1 cw, 0 colinear.
int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  const double scale = (b - a).norm() * (c - a).norm();
  if (std::abs(v) <= 1e-14 * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orient(p1, p2, q1);
  const int o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1);
  const int o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

std::vector<Vec2> to_points(const ComplexField& z) {
  std::vector<Vec2> pts(static_cast<size_t>(z.size()));
  for (Eigen::Index j = 0; j < z.size(); ++j) pts[static_cast<size_t>(j)] = Vec2(z[j].real(), z[j].imag());
  return pts;
}

// Uniform bucket grid over the segments of a closed polyline, answering
// nearest-distance queries by expanding Chebyshev rings of cells.
class SegmentGrid {
 public:
  explicit SegmentGrid(const std::vector<Vec2>& pts) : pts_(pts) {
    const int n = static_cast<int>(pts_.size());
    Vec2 lo = pts_[0], hi = pts_[0];
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      lo = lo.cwiseMin(pts_[j]);
      hi = hi.cwiseMax(pts_[j]);
      total += (pts_[(j + 1) % n] - pts_[j]).norm();
    }
    const double extent = std::max(hi.x() - lo.x(), hi.y() - lo.y());
    cell_ = std::max({2.0 * total / n, extent / 2048.0, 1e-300});
    origin_ = lo;
    nx_ = static_cast<int>((hi.x() - lo.x()) / cell_) + 1;
    ny_ = static_cast<int>((hi.y() - lo.y()) / cell_) + 1;
    cells_.assign(static_cast<size_t>(nx_) * ny_, {});
    for (int j = 0; j < n; ++j) {
      const Vec2& a = pts_[j];
      const Vec2& b = pts_[(j + 1) % n];
      const int i0 = clamp_x(std::min(a.x(), b.x()));
      const int i1 = clamp_x(std::max(a.x(), b.x()));
      const int k0 = clamp_y(std::min(a.y(), b.y()));
      const int k1 = clamp_y(std::max(a.y(), b.y()));
      for (int k = k0; k <= k1; ++k)
        for (int i = i0; i <= i1; ++i) cells_[static_cast<size_t>(k) * nx_ + i].push_back(j);
    }
  }

  double distance(const Vec2& p) const {
    const int n = static_cast<int>(pts_.size());
    const int cx = static_cast<int>(std::floor((p.x() - origin_.x()) / cell_));
    const int cy = static_cast<int>(std::floor((p.y() - origin_.y()) / cell_));
    const int dx = std::max({0, -cx, cx - (nx_ - 1)});
    const int dy = std::max({0, -cy, cy - (ny_ - 1)});
    const int r_max = std::max({cx, nx_ - 1 - cx, cy, ny_ - 1 - cy, 0}) + 1;
    double best = std::numeric_limits<double>::infinity();
    auto visit = [&](int i, int k) {
      for (int s : cells_[static_cast<size_t>(k) * nx_ + i])
        best = std::min(best, point_segment_distance(p, pts_[s], pts_[(s + 1) % n]));
    };
    for (int r = std::max(dx, dy); r <= r_max; ++r) {
      const int k_lo = std::max(cy - r, 0), k_hi = std::min(cy + r, ny_ - 1);
      for (int k = k_lo; k <= k_hi; ++k) {
        if (std::abs(k - cy) == r) {
          for (int i = std::max(cx - r, 0); i <= std::min(cx + r, nx_ - 1); ++i) visit(i, k);
        } else {
          if (cx - r >= 0 && cx - r < nx_) visit(cx - r, k);
          if (r > 0 && cx + r >= 0 && cx + r < nx_) visit(cx + r, k);
        }
      }
      if (best <= r * cell_) break;
    }
    return best;
  }

 private:
  int clamp_x(double x) const {
    return std::clamp(static_cast<int>((x - origin_.x()) / cell_), 0, nx_ - 1);
  }
  int clamp_y(double y) const {
    return std::clamp(static_cast<int>((y - origin_.y()) / cell_), 0, ny_ - 1);
  }

  const std::vector<Vec2>& pts_;
  Vec2 origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> cells_;
};

double directed_distance(const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
  SegmentGrid grid(to);
  double worst = 0.0;
  for (const auto& p : from) worst = std::max(worst, grid.distance(p));
  return worst;
}

// First and second theta-derivatives sharing one forward transform.
void theta_derivatives(const ComplexField& z, DiffScheme scheme, ComplexField& dz, ComplexField& ddz) {
  if (scheme == DiffScheme::FourthOrder) {
    dz = d1(z, scheme);
    ddz = d2(z, scheme);
    return;
  }
  const int n = static_cast<int>(z.size());
  const ComplexField zh = fft(z);
  ComplexField a(n), b(n);
  for (int j = 0; j < n; ++j) {
    const double k = wavenumber(j, n);
    a[j] = (2 * j == n) ? Complex(0.0) : zh[j] * Complex(0.0, k);
    b[j] = zh[j] * (-k * k);
  }
  dz = ifft(a);
  ddz = ifft(b);
}

}  // namespace

// ---------------------------------------------------------------------------

DiscreteCurve::DiscreteCurve(std::vector<Vec2> points) : DiscreteCurve(std::move(points), true) {}

DiscreteCurve DiscreteCurve::trusted(std::vector<Vec2> points) {
  return DiscreteCurve(std::move(points), false);
}

DiscreteCurve DiscreteCurve::from_complex(const ComplexField& z, bool check_simple) {
  return DiscreteCurve(to_points(z), check_simple);
}

DiscreteCurve::DiscreteCurve(std::vector<Vec2> points, bool check_simple) : points_(std::move(points)) {
  const int m = size();
  if (m < 16 || m % 2 != 0)
    throw InvalidCurve("node count must be even and >= 16, got " + std::to_string(m));
  for (const auto& p : points_)
    if (!std::isfinite(p.x()) || !std::isfinite(p.y())) throw InvalidCurve("non-finite node");
  const double ratio = spacing_ratio(points_);
  if (!(ratio <= kMaxSpacingRatio))
    throw InvalidCurve("node spacing ratio " + std::to_string(ratio) + " exceeds 10");
  if (check_simple && !is_simple_polyline(points_)) throw InvalidCurve("polyline self-intersects");
  if (shoelace_area(points_) < 0.0) {
    std::reverse(points_.begin() + 1, points_.end());
    reoriented_ = true;
  }
}

ComplexField DiscreteCurve::as_complex() const {
  ComplexField z(size());
  for (int j = 0; j < size(); ++j) z[j] = Complex(points_[j].x(), points_[j].y());
  return z;
}

// ---------------------------------------------------------------------------

GeometryFields geometry(const DiscreteCurve& curve, DiffScheme scheme) {
  const int m = curve.size();
  ComplexField dz, ddz;
  theta_derivatives(curve.as_complex(), scheme, dz, ddz);
  GeometryFields geom;
  geom.scheme = scheme;
  geom.tangent.resize(m);
  geom.normal.resize(m);
  geom.curvature.resize(m);
  geom.metric_speed.resize(m);
  const double dtheta = 2.0 * kPi / m;
  for (int j = 0; j < m; ++j) {
    const double g = std::abs(dz[j]);
    if (!(g >= kMinMetricSpeed))
      throw DegenerateCurve("metric speed " + std::to_string(g) + " at node " + std::to_string(j));
    const Vec2 t(dz[j].real() / g, dz[j].imag() / g);
    geom.tangent[j] = t;
    geom.normal[j] = Vec2(-t.y(), t.x());
    geom.curvature[j] = (std::conj(dz[j]) * ddz[j]).imag() / (g * g * g);
    geom.metric_speed[j] = g;
  }
  geom.norm_sq_A = geom.curvature.array().square();
  geom.arclength_weights = geom.metric_speed * dtheta;
  return geom;
}

Field shrinker_quantity(const DiscreteCurve& curve, const GeometryFields& geom) {
  Field phi(curve.size());
  for (int j = 0; j < curve.size(); ++j)
    phi[j] = geom.curvature[j] + 0.5 * curve[j].dot(geom.normal[j]);
  return phi;
}

Field shrinker_quantity(const DiscreteCurve& curve, DiffScheme scheme) {
  return shrinker_quantity(curve, geometry(curve, scheme));
}

Field gaussian_weights(const DiscreteCurve& curve, const GeometryFields& geom) {
  Field w(curve.size());
  for (int j = 0; j < curve.size(); ++j)
    w[j] = geom.arclength_weights[j] * std::exp(-curve[j].squaredNorm() / 4.0);
  return w;
}

double f_functional(const DiscreteCurve& curve, DiffScheme scheme) {
  const auto geom = geometry(curve, scheme);
  return gaussian_weights(curve, geom).sum() / std::sqrt(4.0 * kPi);
}

double shrinker_f_value() { return std::sqrt(2.0 * kPi) * std::exp(-0.5); }

double curve_length(const DiscreteCurve& curve) {
  const ComplexField dz = d1(curve.as_complex());
  return dz.cwiseAbs().sum() * 2.0 * kPi / curve.size();
}

double enclosed_area(const DiscreteCurve& curve) {
  const ComplexField z = curve.as_complex();
  const ComplexField dz = d1(z);
  double s = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) s += (std::conj(z[j]) * dz[j]).imag();
  return 0.5 * s * 2.0 * kPi / curve.size();
}

Vec2 area_centroid(const DiscreteCurve& curve) {
  const ComplexField z = curve.as_complex();
  const ComplexField dz = d1(z);
  double sx = 0.0, sy = 0.0, area = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double x = z[j].real(), y = z[j].imag();
    sx += x * x * dz[j].imag();
    sy -= y * y * dz[j].real();
    area += x * dz[j].imag() - y * dz[j].real();
  }
  area *= 0.5;
  // Common factor dtheta cancels.
  return Vec2(sx, sy) / (2.0 * area);
}

double polyline_length(const DiscreteCurve& curve) {
  double s = 0.0;
  const int m = curve.size();
  for (int j = 0; j < m; ++j) s += (curve[(j + 1) % m] - curve[j]).norm();
  return s;
}

double spacing_ratio(const std::vector<Vec2>& points) {
  const size_t m = points.size();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (size_t j = 0; j < m; ++j) {
    const double d = (points[(j + 1) % m] - points[j]).norm();
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

double min_spacing(const std::vector<Vec2>& points) {
  const size_t m = points.size();
  double lo = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < m; ++j) lo = std::min(lo, (points[(j + 1) % m] - points[j]).norm());
  return lo;
}

bool is_simple_polyline(const std::vector<Vec2>& pts) {
  const int m = static_cast<int>(pts.size());
  for (int i = 0; i < m; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % m];
    const double xlo = std::min(a.x(), b.x()), xhi = std::max(a.x(), b.x());
    const double ylo = std::min(a.y(), b.y()), yhi = std::max(a.y(), b.y());
    for (int j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;  // adjacent through the wrap
      const Vec2& c = pts[j];
      const Vec2& d = pts[(j + 1) % m];
      if (std::max(c.x(), d.x()) < xlo || std::min(c.x(), d.x()) > xhi ||
          std::max(c.y(), d.y()) < ylo || std::min(c.y(), d.y()) > yhi)
        continue;
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

double shoelace_area(const std::vector<Vec2>& pts) {
  const size_t m = pts.size();
  double s = 0.0;
  for (size_t j = 0; j < m; ++j) s += cross(pts[j], pts[(j + 1) % m]);
  return 0.5 * s;
}

double hausdorff_distance(const DiscreteCurve& a, const DiscreteCurve& b, int refine) {
  if (refine <= 1) {
    return std::max(directed_distance(a.points(), b.points()),
                    directed_distance(b.points(), a.points()));
  }
  const auto pa = to_points(upsample(a.as_complex(), refine));
  const auto pb = to_points(upsample(b.as_complex(), refine));
  return std::max(directed_distance(pa, pb), directed_distance(pb, pa));
}

double hausdorff_to_circle(const DiscreteCurve& curve, const Vec2& center, double radius, int refine) {
  const ComplexField z = upsample(curve.as_complex(), std::max(refine, 1));
  const Complex c(center.x(), center.y());
  double worst = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j)
    worst = std::max(worst, std::abs(std::abs(z[j] - c) - radius));
  return worst;
}

DiscreteCurve resample(const DiscreteCurve& curve, int m_new) {
  if (m_new < 16 || m_new % 2 != 0)
    throw InterpolationFailure("target node count must be even and >= 16");
  const ComplexField z = curve.as_complex();
  const Field g = d1(z).cwiseAbs();
  const double mean_g = g.mean();
  const double length = 2.0 * kPi * mean_g;
  // s(theta) = mean_g * theta + S(theta) - S(0), S periodic antiderivative.
  const Field periodic = antiderivative(g.array() - mean_g);
  const TrigInterpolant s_interp(periodic.cast<Complex>());
  const TrigInterpolant z_interp(z);
  const double s0 = periodic[0];

  std::vector<Vec2> out(static_cast<size_t>(m_new));
  double theta = 0.0;
  for (int j = 0; j < m_new; ++j) {
    const double target = length * j / m_new;
    if (j > 0) theta += 2.0 * kPi / m_new;  // initial guess
    bool converged = (j == 0);
    for (int it = 0; it < 50 && !converged; ++it) {
      Complex sv, sd, sdd;
      s_interp.evaluate(theta, sv, sd, sdd);
      const double s = mean_g * theta + sv.real() - s0;
      const double ds = mean_g + sd.real();
      if (!(ds > 0.0)) throw InterpolationFailure("arclength map is not monotone");
      const double step = (s - target) / ds;
      theta -= step;
      converged = std::abs(step) < 1e-15 * (1.0 + std::abs(theta));
    }
    if (!converged) throw InterpolationFailure("arclength inversion did not converge at node " + std::to_string(j));
    const Complex p = z_interp.value(theta);
    out[j] = Vec2(p.real(), p.imag());
  }
  try {
    return DiscreteCurve(std::move(out));
  } catch (const InvalidCurve& e) {
    throw InterpolationFailure(e.what());
  }
}

DiscreteCurve make_circle(int m, double radius, const Vec2& center) {
  std::vector<Vec2> pts(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const double t = 2.0 * kPi * j / m;
    pts[j] = center + radius * Vec2(std::cos(t), std::sin(t));
  }
  return DiscreteCurve(std::move(pts));
}

DiscreteCurve make_ellipse(int m, double a, double b, double angle, const Vec2& center) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<Vec2> pts(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const double t = 2.0 * kPi * j / m;
    const double x = a * std::cos(t), y = b * std::sin(t);
    pts[j] = center + Vec2(c * x - s * y, s * x + c * y);
  }
  return DiscreteCurve(std::move(pts));
}

DiscreteCurve make_polar(int m, double r0, const std::vector<PolarMode>& modes, const Vec2& center) {
  std::vector<Vec2> pts(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    const double t = 2.0 * kPi * j / m;
    double r = r0;
    for (const auto& mode : modes) r += mode.cos_coeff * std::cos(mode.k * t) + mode.sin_coeff * std::sin(mode.k * t);
    if (!(r > 0.0)) throw InvalidCurve("polar radius must stay positive");
    pts[j] = center + r * Vec2(std::cos(t), std::sin(t));
  }
  return DiscreteCurve(std::move(pts));
}

}  // namespace shrinkerlab
