#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "shrinkerlab/curvegeo.hpp"
#include "shrinkerlab/errors.hpp"
#include "shrinkerlab/gauge.hpp"
#include "shrinkerlab/spectral.hpp"

using namespace shrinkerlab;

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::numbers::sqrt2;

Field mode(int m, int k, double amp, bool sine = false) {
  Field u(m);
  for (int j = 0; j < m; ++j) {
    const double t = 2 * kPi * j / m;
    u[j] = amp * (sine ? std::sin(k * t) : std::cos(k * t));
  }
  return u;
}

double sup(const Field& f) { return f.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("normal graph of concentric and identical curves") {
  const auto base = make_circle(256, kSqrt2);
  CHECK(sup(normal_graph(base, base).u) < 1e-14);
  const auto g = normal_graph(base, make_circle(256, kSqrt2 + 1e-2));
  // the inner normal points to the centre, so the larger circle sits at -eps
  CHECK(sup(g.u.array() + 1e-2) < 1e-8);
  CHECK(sup(g.du) < 1e-8);
  CHECK(std::abs(reach(base) - kSqrt2) < 1e-10);
}

TEST_CASE("graph extraction inverts reconstruct") {
  const auto base = make_circle(512, kSqrt2);
  const Field u = mode(512, 2, 1e-2);
  const auto g = normal_graph(base, reconstruct(base, u));
  CHECK(sup(g.u - u) < 1e-6);
  SUBCASE("polyline target model carries the chord-sag bias only") {
    const auto gp = normal_graph(base, reconstruct(base, u), TargetModel::Polyline);
    CHECK(sup(gp.u - u) < 1e-4);
  }
}

TEST_CASE("property: round trip on non-circular bases") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const auto base = make_ellipse(256, 1.6, 1.2, 0.2);
  const double r = reach(base);
  for (int trial = 0; trial < 5; ++trial) {
    Field u = mode(256, 2, U(rng)) + mode(256, 3, U(rng), true) + mode(256, 5, 0.3 * U(rng));
    u *= (r / 8) / sup(u);
    CHECK(sup(normal_graph(base, reconstruct(base, u)).u - u) < 1e-8);
  }
}

TEST_CASE("graph failures") {
  const auto base = make_circle(128, 1.0);
  CHECK_THROWS_AS(normal_graph(base, make_circle(128, 1.0, Vec2(3.0, 0.0))), NotAGraph);
  CHECK_THROWS_AS(normal_graph(base, make_circle(128, 0.2)), NotAGraph);
  CHECK_THROWS_AS(GraphFunction(base, Field::Zero(64)), std::invalid_argument);
}

TEST_CASE("drift operator on the shrinker circle") {
  const auto base = make_circle(512, kSqrt2);
  CHECK(sup(apply_L(base, Field::Constant(512, 0.7)).array() - 0.7) < 1e-10);
  for (int k = 1; k <= 8; ++k) {
    for (bool sine : {false, true}) {
      const Field u = mode(512, k, 1.0, sine);
      CHECK(sup(apply_L(base, u) - (1.0 - k * k / 2.0) * u) < 1e-4);
    }
  }
}

TEST_CASE("property: L is self-adjoint in the Gaussian inner product") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  const auto base = make_polar(128, 1.3, {{2, 0.1, 0.0}, {3, 0.0, 0.05}}, Vec2(0.1, 0.0));
  const Field w = gaussian_weights(base, geometry(base));
  for (int trial = 0; trial < 5; ++trial) {
    // smooth random fields: low modes only
    Field v = Field::Zero(128), z = Field::Zero(128);
    for (int k = 0; k < 10; ++k) {
      v += mode(128, k, g(rng)) + mode(128, k, g(rng), true);
      z += mode(128, k, g(rng)) + mode(128, k, g(rng), true);
    }
    const double a = (w.array() * v.array() * apply_L(base, z).array()).sum();
    const double b = (w.array() * apply_L(base, v).array() * z.array()).sum();
    CHECK(std::abs(a - b) < 1e-8 * (std::abs(a) + std::abs(b)));
    // agrees with the assembled quadratic form
    const DirichletForm form(base);
    CHECK(std::abs(form(v, z) - a) < 1e-8 * std::abs(a) + 1e-10);
  }
}

TEST_CASE("residual of identical trajectories vanishes") {
  FlowTrajectory t(Picture::RMCF);
  for (int i = 0; i < 3; ++i) t.append(0.1 * i, make_ellipse(128, 1.5, 1.3));
  const auto rep = residual(t, t, 0.1);
  CHECK(rep.max_residual == 0.0);
  CHECK(rep.fitted_c == 0.0);
  CHECK_THROWS_AS(residual(t, t, 0.0), FrameMissing);
  const auto j = to_json(rep);
  CHECK(j.at("normsU").size() == 3);
  CHECK(j.contains("quadRatio"));
}

TEST_CASE("property: residual is quadratically small along the rescaled flow") {
  const auto base = make_circle(256, kSqrt2);
  const double dtau = 1e-3;
  FlowTrajectory b(Picture::RMCF);
  for (int i = 0; i < 3; ++i) b.append(dtau * i, base);
  StepControl ctl;
  RunOptions opts;
  opts.output_interval = dtau;
  double c_prev = 0.0;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const auto t = run_rmcf(reconstruct(base, mode(256, 2, eps)), 0.0, 2 * dtau, ctl, opts);
    const auto rep = residual(b, t, dtau);
    CHECK(rep.quad_ratio < 2.0);
    if (c_prev > 0.0) CHECK(rep.fitted_c < 0.2 * c_prev);
    c_prev = rep.fitted_c;
  }
}
