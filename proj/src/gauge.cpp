#include "shrinkerlab/gauge.hpp"

#include <cmath>
#include <string>

#include "shrinkerlab/errors.hpp"

namespace shrinkerlab {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// d/ds on the base: d/dtheta divided by the metric speed.
Field ds(const Field& f, const Field& g, DiffScheme scheme) {
  return d1(f, scheme).cwiseQuotient(g);
}

// Newton on x + s nu = Z(theta) for (theta, s), Z the target interpolant.
bool polish(const TrigInterpolant& target, const Vec2& x, const Vec2& nu, double& theta, double& s) {
  for (int it = 0; it < 30; ++it) {
    Complex z, dz, ddz;
    target.evaluate(theta, z, dz, ddz);
    const Vec2 f(z.real() - x.x() - s * nu.x(), z.imag() - x.y() - s * nu.y());
    // Jacobian columns: dZ/dtheta and -nu.
    const Vec2 a(dz.real(), dz.imag());
    const Vec2 b = -nu;
    const double det = cross(a, b);
    if (det == 0.0) return false;
    const double dtheta = cross(f, b) / det;
    const double dsv = cross(a, f) / det;
    theta -= dtheta;
    s -= dsv;
    // Steps settle at a few ulp of |x|, the rounding floor of the interpolant.
    if (std::abs(dsv) <= 1e-14 * (1.0 + x.norm() + std::abs(s)) && std::abs(dtheta) <= 1e-13) return true;
  }
  return false;
}

}  // namespace

GraphFunction::GraphFunction(DiscreteCurve base_curve, Field values, DiffScheme scheme)
    : base(std::move(base_curve)), u(std::move(values)) {
  if (u.size() != base.size()) throw std::invalid_argument("graph values must match the base node count");
  const Field g = geometry(base, scheme).metric_speed;
  du = ds(u, g, scheme);
  d2u = ds(du, g, scheme);
}

double reach(const DiscreteCurve& base, DiffScheme scheme) {
  return 1.0 / geometry(base, scheme).curvature.cwiseAbs().maxCoeff();
}

GraphFunction normal_graph(const DiscreteCurve& base, const DiscreteCurve& target, TargetModel model,
                           DiffScheme scheme) {
  const GeometryFields geom = geometry(base, scheme);
  const double window = 0.5 / geom.curvature.cwiseAbs().maxCoeff();
  const int m = base.size();
  const int mt = target.size();
  const auto& P = target.points();
  std::vector<double> side(static_cast<size_t>(mt));
  const TrigInterpolant interp(target.as_complex());

  Field u(m);
  for (int j = 0; j < m; ++j) {
    const Vec2& x = base[j];
    const Vec2& nu = geom.normal[j];
    // A coincident target node is an exact zero height; polishing would
    // only add rounding noise.
    if (mt == m && P[j] == x) {
      u[j] = 0.0;
      continue;
    }
    for (int i = 0; i < mt; ++i) side[i] = cross(nu, P[i] - x);
    int hits = 0;
    double s_hit = 0.0, theta_hit = 0.0;
    for (int i = 0; i < mt; ++i) {
      const double a = side[i], b = side[(i + 1) % mt];
      // Half-open sign test so a vertex on the line is counted once.
      if ((a >= 0.0) == (b >= 0.0)) continue;
      const double t = a / (a - b);
      const Vec2 p = P[i] + t * (P[(i + 1) % mt] - P[i]);
      const double s = (p - x).dot(nu);
      if (std::abs(s) > window) continue;
      ++hits;
      s_hit = s;
      theta_hit = 2.0 * std::numbers::pi * (i + t) / mt;
    }
    if (hits != 1)
      throw NotAGraph("normal line at node " + std::to_string(j) + " meets the target " + std::to_string(hits) +
                      " times within +-" + std::to_string(window));
    if (model == TargetModel::Spectral) {
      if (!polish(interp, x, nu, theta_hit, s_hit))
        throw NotAGraph("Newton polish failed at node " + std::to_string(j));
      if (std::abs(s_hit) > window) throw NotAGraph("polished height leaves the graph window at node " + std::to_string(j));
    }
    u[j] = s_hit;
  }
  return GraphFunction(base, std::move(u), scheme);
}

DiscreteCurve reconstruct(const DiscreteCurve& base, const Field& u, DiffScheme scheme) {
  const GeometryFields geom = geometry(base, scheme);
  std::vector<Vec2> pts(static_cast<size_t>(base.size()));
  for (int j = 0; j < base.size(); ++j) pts[j] = base[j] + u[j] * geom.normal[j];
  return DiscreteCurve(std::move(pts));
}

// Divergence form (1/(g E)) d/dtheta(E u_theta / g) + V u with E = exp(-|x|^2/4),
// which equals u_ss - <x,t> u_s / 2 + V u and is exactly self-adjoint for the
// node weights g E dtheta because d1 is skew-symmetric on the grid.
Field apply_L(const DiscreteCurve& base, const Field& u, DiffScheme scheme) {
  const GeometryFields geom = geometry(base, scheme);
  const int m = base.size();
  Field E(m);
  for (int j = 0; j < m; ++j) E[j] = std::exp(-base[j].squaredNorm() / 4.0);
  const Field& g = geom.metric_speed;
  const Field flux = E.cwiseProduct(d1(u, scheme)).cwiseQuotient(g);
  const Field div = d1(flux, scheme).cwiseQuotient(g.cwiseProduct(E));
  return div + (geom.norm_sq_A.array() + 0.5).matrix().cwiseProduct(u);
}

Field apply_L(const GraphFunction& graph) { return apply_L(graph.base, graph.u); }

Field normal_time_derivative(const DiscreteCurve& base_minus, const DiscreteCurve& base_plus,
                             const GraphFunction& centre, const Field& um, const Field& up, double dtau,
                             DiffScheme scheme) {
  const GeometryFields geom = geometry(centre.base, scheme);
  const int m = centre.base.size();
  Field w(m);
  for (int j = 0; j < m; ++j) {
    const double alpha = (base_plus[j] - base_minus[j]).dot(geom.tangent[j]) / (2.0 * dtau);
    w[j] = (up[j] - um[j]) / (2.0 * dtau) - alpha * centre.du[j];
  }
  return w;
}

ResidualReport residual(const FlowTrajectory& base_traj, const FlowTrajectory& target_traj, double tau,
                        TargetModel model) {
  const auto jb = base_traj.find(tau);
  if (!jb) throw FrameMissing("base has no frame at tau = " + std::to_string(tau));
  if (*jb == 0 || *jb + 1 >= base_traj.size())
    throw FrameMissing("base has no neighbouring frames around tau = " + std::to_string(tau));
  const Frame& bm = base_traj[*jb - 1];
  const Frame& b0 = base_traj[*jb];
  const Frame& bp = base_traj[*jb + 1];
  const double delta = b0.time - bm.time;
  if (std::abs((bp.time - b0.time) - delta) > 1e-9 * (1.0 + delta))
    throw FrameMissing("frames around tau = " + std::to_string(tau) + " are not symmetric");
  auto target_at = [&](double t) -> const DiscreteCurve& {
    const auto k = target_traj.find(t);
    if (!k) throw FrameMissing("target has no frame at tau = " + std::to_string(t));
    return target_traj[*k].curve;
  };

  const GraphFunction centre = normal_graph(b0.curve, target_at(b0.time), model);
  const Field um = normal_graph(bm.curve, target_at(bm.time), model).u;
  const Field up = normal_graph(bp.curve, target_at(bp.time), model).u;
  const Field w = normal_time_derivative(bm.curve, bp.curve, centre, um, up, delta);

  ResidualReport rep;
  rep.tau = b0.time;
  rep.r = w - apply_L(centre);
  rep.max_residual = rep.r.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < rep.r.size(); ++j)
    rep.fitted_c = std::max(rep.fitted_c, std::abs(rep.r[j]) /
                                              (std::abs(centre.u[j]) + std::abs(centre.du[j]) + kResidualFloor));
  rep.norms_u = {centre.u.cwiseAbs().maxCoeff(), centre.du.cwiseAbs().maxCoeff(),
                 centre.d2u.cwiseAbs().maxCoeff()};
  const double c2 = rep.norms_u[0] + rep.norms_u[1] + rep.norms_u[2];
  const double c1 = rep.norms_u[0] + rep.norms_u[1];
  rep.quad_ratio = rep.max_residual / (c2 * c1 + kResidualFloor);
  return rep;
}

nlohmann::json to_json(const ResidualReport& report) {
  return {{"tau", report.tau},
          {"maxResidual", report.max_residual},
          {"fittedC", report.fitted_c},
          {"normsU", {report.norms_u[0], report.norms_u[1], report.norms_u[2]}},
          {"quadRatio", report.quad_ratio}};
}

}  // namespace shrinkerlab
