#pragma once

#include <vector>

#include <json.hpp>

#include "shrinkerlab/curvegeo.hpp"
#include "shrinkerlab/flowcore.hpp"

namespace shrinkerlab {

/// The quadratic form of L in the Gaussian-weighted inner product,
///   form(u, v) = -int <grad u, grad v> dmu + int (|A|^2 + 1/2) u v dmu,
/// discretised as -(D u)^T diag(rho) (D v) + sum_j w_j V_j u_j v_j.
///
/// Spectral scheme: D samples the derivative of the trigonometric interpolant
/// of u on a 2m grid (keeping the Nyquist mode, whose gradient would vanish at
/// the nodes). FourthOrder: D is the staggered midpoint derivative.
class DirichletForm {
 public:
  explicit DirichletForm(const DiscreteCurve& base, DiffScheme scheme = DiffScheme::Spectral);

  double operator()(const Field& u, const Field& v) const;
  /// int |grad u|^2 dmu
  double gradient_energy(const Field& u) const;
  /// int f |grad u|^2 dmu, f given at the nodes and interpolated to the gradient grid.
  double gradient_energy(const Field& u, const Field& f) const;
  /// D u on the gradient grid (d/dtheta).
  Field gradient(const Field& u) const;

  const Field& node_weights() const { return w_; }
  const Field& potential() const { return V_; }
  const Field& gradient_weights() const { return rho_; }
  DiffScheme scheme() const { return scheme_; }
  int size() const { return static_cast<int>(w_.size()); }

 private:
  DiffScheme scheme_;
  Field w_;    // Gaussian node weights
  Field V_;    // |A|^2 + 1/2
  Field rho_;  // exp(-|x|^2/4) dtheta / g on the gradient grid
};

/// Symmetric matrix K with form(u, v) = u^T K v, plus the node weights W, so
/// L is represented by W^{-1} K.
struct WeightedOperator {
  Eigen::MatrixXd K;
  Field w;
  DiffScheme scheme = DiffScheme::Spectral;
};

WeightedOperator assemble(const DiscreteCurve& base, DiffScheme scheme = DiffScheme::Spectral);

struct Spectrum {
  std::vector<double> eigenvalues;     // descending
  std::vector<Field> eigenfunctions;   // mu-orthonormal
  double Lambda = 0.0;
};

/// Top-k eigenpairs of W^{-1} K by a dense symmetric solve of
/// W^{-1/2} K W^{-1/2}. Throws ConvergenceFailure if the solver fails or a
/// residual ||L v - lambda v||_mu exceeds 1e-8 max(1, |lambda|).
Spectrum eigenpairs(const WeightedOperator& op, int k);

/// Largest eigenvalue only.
double top_eigenvalue(const WeightedOperator& op);

struct RayleighBound {
  std::vector<double> tau;
  std::vector<double> Lambda;
  double sup = 0.0;
};

/// Top eigenvalue on every `stride`-th frame (and the last); `sup` is the
/// uniform bound over the sampled frames.
RayleighBound rayleigh_bound(const FlowTrajectory& traj, int stride = 1,
                             DiffScheme scheme = DiffScheme::Spectral);

/// {m, eigenvalues, Lambda}
nlohmann::json to_json(const Spectrum& spectrum, int m);

}  // namespace shrinkerlab
