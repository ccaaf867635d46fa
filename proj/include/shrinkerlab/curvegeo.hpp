#pragma once

#include <numbers>
#include <vector>

#include "shrinkerlab/fourier.hpp"

namespace shrinkerlab {

/// Radius of the round self-shrinking circle (phi = H + <x, nu>/2 vanishes).
inline constexpr double kShrinkerRadius = std::numbers::sqrt2;

/// Closed plane curve sampled on the uniform periodic grid theta_j = 2 pi j / m.
///
/// Construction enforces: m even and >= 16, consecutive spacing ratio
/// max/min <= 10, and (unless built through `trusted`) a simple polyline.
/// Clockwise input is reversed to counterclockwise keeping node 0 in place,
/// so geometry is orientation independent; `reoriented()` reports whether
/// that happened.
class DiscreteCurve {
 public:
  explicit DiscreteCurve(std::vector<Vec2> points);

  /// Same checks except the O(m^2) self-intersection test. For integrator
  /// stages and exact similarity transforms of curves already known simple.
  static DiscreteCurve trusted(std::vector<Vec2> points);

  static DiscreteCurve from_complex(const ComplexField& z, bool check_simple = true);

  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<Vec2>& points() const { return points_; }
  const Vec2& operator[](int j) const { return points_[static_cast<size_t>(j)]; }
  bool reoriented() const { return reoriented_; }
  ComplexField as_complex() const;

 private:
  DiscreteCurve(std::vector<Vec2> points, bool check_simple);

  std::vector<Vec2> points_;
  bool reoriented_ = false;
};

/// Pointwise geometry of a DiscreteCurve. The normal is inner pointing and
/// the curvature is positive on convex curves, so the round circle of radius
/// r has H = 1/r and <x, nu> = -r when centred at the origin.
struct GeometryFields {
  std::vector<Vec2> tangent;
  std::vector<Vec2> normal;
  Field curvature;         // H (= signed curvature kappa for curves)
  Field norm_sq_A;         // |A|^2 = H^2
  Field arclength_weights; // trapezoid weights g_j * 2 pi / m
  Field metric_speed;      // g = |d x / d theta|
  DiffScheme scheme = DiffScheme::Spectral;
};

/// Throws DegenerateCurve when the metric speed drops below 1e-10.
GeometryFields geometry(const DiscreteCurve& curve, DiffScheme scheme = DiffScheme::Spectral);

/// phi = H + <x, nu>/2 per node.
Field shrinker_quantity(const DiscreteCurve& curve, const GeometryFields& geom);
Field shrinker_quantity(const DiscreteCurve& curve, DiffScheme scheme = DiffScheme::Spectral);

/// Gaussian quadrature weights w_j * exp(-|x_j|^2 / 4).
Field gaussian_weights(const DiscreteCurve& curve, const GeometryFields& geom);

/// F[M] = (4 pi)^{-1/2} * integral of exp(-|x|^2/4) ds.
double f_functional(const DiscreteCurve& curve, DiffScheme scheme = DiffScheme::Spectral);

/// F of the shrinking circle, sqrt(2 pi) e^{-1/2}.
double shrinker_f_value();

/// Length and enclosed area of the trigonometric interpolant of the nodes.
double curve_length(const DiscreteCurve& curve);
double enclosed_area(const DiscreteCurve& curve);
Vec2 area_centroid(const DiscreteCurve& curve);

double polyline_length(const DiscreteCurve& curve);
double spacing_ratio(const std::vector<Vec2>& points);
double min_spacing(const std::vector<Vec2>& points);
bool is_simple_polyline(const std::vector<Vec2>& points);
/// Signed shoelace area of the polyline (positive when counterclockwise).
double shoelace_area(const std::vector<Vec2>& points);

/// Two-sided Hausdorff distance between closed polylines, measured
/// vertex-to-segment in both directions. With refine > 1 both curves are
/// first replaced by their trigonometric interpolants sampled refine times
/// more densely, which shrinks the chord-sag floor by refine^2.
double hausdorff_distance(const DiscreteCurve& a, const DiscreteCurve& b, int refine = 1);

/// Hausdorff distance from a curve that is star shaped about `center` to the
/// exact circle, evaluated on the refined interpolant. For a radial graph
/// over the circle max ||x - c| - r| is the two-sided distance.
double hausdorff_to_circle(const DiscreteCurve& curve, const Vec2& center, double radius,
                           int refine = 8);

/// Arclength-uniform resampling to m_new nodes through the trigonometric
/// interpolant; node 0 is kept. Throws InterpolationFailure if the inversion
/// of the arclength map fails or the result is not a valid curve.
DiscreteCurve resample(const DiscreteCurve& curve, int m_new);

// Builders. Nodes are at uniform parameter angle, not uniform arclength.
DiscreteCurve make_circle(int m, double radius, const Vec2& center = Vec2::Zero());
DiscreteCurve make_ellipse(int m, double a, double b, double angle = 0.0,
                           const Vec2& center = Vec2::Zero());

/// One Fourier mode of a polar perturbation r(theta) = r0 + sum a cos k theta + b sin k theta.
struct PolarMode {
  int k = 0;
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};
DiscreteCurve make_polar(int m, double r0, const std::vector<PolarMode>& modes,
                         const Vec2& center = Vec2::Zero());

}  // namespace shrinkerlab
