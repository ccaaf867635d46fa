#pragma once

#include <array>

#include <json.hpp>

#include "shrinkerlab/curvegeo.hpp"
#include "shrinkerlab/flowcore.hpp"

namespace shrinkerlab {

/// Height u along the inner normal of `base`, with its arclength derivatives.
struct GraphFunction {
  DiscreteCurve base;
  Field u;
  Field du;   // d u / d s
  Field d2u;  // d^2 u / d s^2

  GraphFunction(DiscreteCurve base_curve, Field values, DiffScheme scheme = DiffScheme::Spectral);
};

/// Largest |H| inverse; the graph window is +-reach/2.
double reach(const DiscreteCurve& base, DiffScheme scheme = DiffScheme::Spectral);

enum class TargetModel {
  /// Intersect with the polyline, then polish on the target's trigonometric
  /// interpolant (removes the chord-sag bias of the polyline).
  Spectral,
  /// Intersection with the target polyline itself.
  Polyline,
};

/// u with base[j] + u_j nu_j on the target for every node. Throws NotAGraph
/// when a normal line meets the target in other than exactly one point within
/// +-reach/2, or when the polish leaves that window.
GraphFunction normal_graph(const DiscreteCurve& base, const DiscreteCurve& target,
                           TargetModel model = TargetModel::Spectral,
                           DiffScheme scheme = DiffScheme::Spectral);

/// The curve base + u nu (validated, simple).
DiscreteCurve reconstruct(const DiscreteCurve& base, const Field& u,
                          DiffScheme scheme = DiffScheme::Spectral);

/// L u = u_ss - 1/2 <x, t> u_s + (|A|^2 + 1/2) u.
Field apply_L(const DiscreteCurve& base, const Field& u, DiffScheme scheme = DiffScheme::Spectral);
Field apply_L(const GraphFunction& graph);

inline constexpr double kResidualFloor = 1e-14;

struct ResidualReport {
  double tau = 0.0;
  Field r;  // d_tau u - L u
  double max_residual = 0.0;
  /// max_j |r_j| / (|u_j| + |du_j| + kResidualFloor)
  double fitted_c = 0.0;
  /// sup norms of u, du/ds, d^2u/ds^2
  std::array<double, 3> norms_u{};
  /// max|r| / (||u||_C2 (||u|| + ||du||)) with ||u||_C2 the sum of the three norms
  double quad_ratio = 0.0;
};

/// d_tau u along the normal of the moving base: the fixed-node central
/// difference minus alpha du/ds, alpha being the tangential node velocity of
/// the base. `um`, `up` are graphs over the neighbouring base frames.
Field normal_time_derivative(const DiscreteCurve& base_minus, const DiscreteCurve& base_plus,
                             const GraphFunction& centre, const Field& um, const Field& up,
                             double dtau, DiffScheme scheme = DiffScheme::Spectral);

/// Residual of the linearised equation at frame time tau, using the frames at
/// tau -+ delta of both trajectories (delta = neighbouring frame spacing,
/// which must be symmetric). Throws FrameMissing.
ResidualReport residual(const FlowTrajectory& base_traj, const FlowTrajectory& target_traj, double tau,
                        TargetModel model = TargetModel::Spectral);

/// {tau, maxResidual, fittedC, normsU: [C0, C1, C2], quadRatio}
nlohmann::json to_json(const ResidualReport& report);

}  // namespace shrinkerlab
