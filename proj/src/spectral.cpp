#include "shrinkerlab/spectral.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "shrinkerlab/errors.hpp"

namespace shrinkerlab {

namespace {

constexpr double kPi = std::numbers::pi;

// Staggered derivative at theta_{j+1/2}, fourth order.
Field staggered_derivative(const Field& u) {
  const int m = static_cast<int>(u.size());
  const double h = 2.0 * kPi / m;
  Field r(m);
  for (int j = 0; j < m; ++j) {
    const double um1 = u[(j - 1 + m) % m], u0 = u[j], u1 = u[(j + 1) % m], u2 = u[(j + 2) % m];
    r[j] = (27.0 * (u1 - u0) - (u2 - um1)) / (24.0 * h);
  }
  return r;
}

// Fourth-order interpolation to theta_{j+1/2}.
Field staggered_value(const Field& u) {
  const int m = static_cast<int>(u.size());
  Field r(m);
  for (int j = 0; j < m; ++j) {
    const double um1 = u[(j - 1 + m) % m], u0 = u[j], u1 = u[(j + 1) % m], u2 = u[(j + 2) % m];
    r[j] = (-um1 + 9.0 * u0 + 9.0 * u1 - u2) / 16.0;
  }
  return r;
}

}  // namespace

DirichletForm::DirichletForm(const DiscreteCurve& base, DiffScheme scheme) : scheme_(scheme) {
  const GeometryFields geom = geometry(base, scheme);
  const int m = base.size();
  w_ = gaussian_weights(base, geom);
  V_ = (geom.norm_sq_A.array() + 0.5).matrix();
  Field x(m), y(m);
  for (int j = 0; j < m; ++j) {
    x[j] = base[j].x();
    y[j] = base[j].y();
  }
  if (scheme == DiffScheme::Spectral) {
    const Field xf = upsample(x, 2), yf = upsample(y, 2);
    const Field dxf = upsample_derivative(x, 2), dyf = upsample_derivative(y, 2);
    const double dtheta = 2.0 * kPi / (2 * m);
    rho_.resize(2 * m);
    for (int f = 0; f < 2 * m; ++f) {
      const double g = std::hypot(dxf[f], dyf[f]);
      if (!(g >= 1e-10)) throw DegenerateCurve("metric speed vanished on the refined grid");
      rho_[f] = std::exp(-(xf[f] * xf[f] + yf[f] * yf[f]) / 4.0) * dtheta / g;
    }
  } else {
    const Field xm = staggered_value(x), ym = staggered_value(y);
    const Field gm = staggered_value(geom.metric_speed);
    const double dtheta = 2.0 * kPi / m;
    rho_.resize(m);
    for (int j = 0; j < m; ++j) rho_[j] = std::exp(-(xm[j] * xm[j] + ym[j] * ym[j]) / 4.0) * dtheta / gm[j];
  }
}

Field DirichletForm::gradient(const Field& u) const {
  return scheme_ == DiffScheme::Spectral ? upsample_derivative(u, 2) : staggered_derivative(u);
}

double DirichletForm::gradient_energy(const Field& u) const {
  const Field du = gradient(u);
  return (rho_.array() * du.array().square()).sum();
}

double DirichletForm::gradient_energy(const Field& u, const Field& f) const {
  const Field du = gradient(u);
  const Field fg = scheme_ == DiffScheme::Spectral ? upsample(f, 2) : staggered_value(f);
  return (rho_.array() * fg.array() * du.array().square()).sum();
}

double DirichletForm::operator()(const Field& u, const Field& v) const {
  const Field du = gradient(u);
  const Field dv = gradient(v);
  return -(rho_.array() * du.array() * dv.array()).sum() + (w_.array() * V_.array() * u.array() * v.array()).sum();
}

WeightedOperator assemble(const DiscreteCurve& base, DiffScheme scheme) {
  const DirichletForm form(base, scheme);
  const int m = base.size();
  const int nf = static_cast<int>(form.gradient_weights().size());
  Eigen::MatrixXd D(nf, m);
  Field e = Field::Zero(m);
  for (int j = 0; j < m; ++j) {
    e[j] = 1.0;
    D.col(j) = form.gradient(e);
    e[j] = 0.0;
  }
  WeightedOperator op;
  op.scheme = scheme;
  op.w = form.node_weights();
  op.K.noalias() = -D.transpose() * form.gradient_weights().asDiagonal() * D;
  op.K.diagonal() += form.node_weights().cwiseProduct(form.potential());
  // Exact symmetry regardless of summation order.
  op.K = 0.5 * (op.K + op.K.transpose()).eval();
  return op;
}

namespace {

Eigen::MatrixXd scaled_matrix(const WeightedOperator& op) {
  const Field s = op.w.cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * op.K * s.asDiagonal();
}

}  // namespace

Spectrum eigenpairs(const WeightedOperator& op, int k) {
  const int m = static_cast<int>(op.w.size());
  if (k < 1 || k > m) throw std::invalid_argument("eigenpairs: k must lie in [1, m]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scaled_matrix(op));
  if (solver.info() != Eigen::Success) throw ConvergenceFailure("symmetric eigensolver did not converge");
  const Field s = op.w.cwiseSqrt().cwiseInverse();
  Spectrum out;
  for (int i = 0; i < k; ++i) {
    const int col = m - 1 - i;  // Eigen sorts ascending
    const double lambda = solver.eigenvalues()[col];
    const Field v = s.cwiseProduct(solver.eigenvectors().col(col));
    const Field Lv = op.K * v;
    // ||W^{-1} K v - lambda v||_mu = ||W^{-1/2}(K v - lambda W v)||
    const double res = s.cwiseProduct(Lv - lambda * op.w.cwiseProduct(v)).norm();
    if (!(res <= 1e-8 * std::max(1.0, std::abs(lambda))))
      throw ConvergenceFailure("eigenpair " + std::to_string(i) + " residual " + std::to_string(res));
    out.eigenvalues.push_back(lambda);
    out.eigenfunctions.push_back(v);
  }
  out.Lambda = out.eigenvalues.front();
  return out;
}

double top_eigenvalue(const WeightedOperator& op) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scaled_matrix(op), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw ConvergenceFailure("symmetric eigensolver did not converge");
  return solver.eigenvalues().maxCoeff();
}

RayleighBound rayleigh_bound(const FlowTrajectory& traj, int stride, DiffScheme scheme) {
  if (stride < 1) throw std::invalid_argument("rayleigh_bound: stride must be >= 1");
  RayleighBound out;
  out.sup = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < traj.size(); ++j) {
    if (j % static_cast<size_t>(stride) != 0 && j + 1 != traj.size()) continue;
    const double L = top_eigenvalue(assemble(traj[j].curve, scheme));
    out.tau.push_back(traj[j].time);
    out.Lambda.push_back(L);
    out.sup = std::max(out.sup, L);
  }
  return out;
}

nlohmann::json to_json(const Spectrum& spectrum, int m) {
  return {{"m", m}, {"eigenvalues", spectrum.eigenvalues}, {"Lambda", spectrum.Lambda}};
}

}  // namespace shrinkerlab
