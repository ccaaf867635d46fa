#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "shrinkerlab/curvegeo.hpp"
#include "shrinkerlab/errors.hpp"
#include "shrinkerlab/frequency.hpp"
#include "shrinkerlab/gauge.hpp"
#include "shrinkerlab/spectral.hpp"

using namespace shrinkerlab;

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::numbers::sqrt2;

Field cos_mode(int m, int k, double amp = 1.0) {
  Field u(m);
  for (int j = 0; j < m; ++j) u[j] = amp * std::cos(k * 2 * kPi * j / m);
  return u;
}

// Circles r(tau) solving dr/dtau = 1/r - r/2 (the radial rescaled flow run
// backwards), which converge to the shrinker radius; classical RK4.
FlowTrajectory converging_circles(double r0, double tau_end, double dtau, int m) {
  auto f = [](double x) { return 1.0 / x - 0.5 * x; };
  FlowTrajectory t(Picture::RMCF);
  double r = r0;
  const int sub = 100;
  const double h = dtau / sub;
  const int frames = static_cast<int>(std::lround(tau_end / dtau));
  for (int i = 0; i <= frames; ++i) {
    t.append(i * dtau, make_circle(m, r));
    for (int s = 0; s < sub; ++s) {
      const double k1 = f(r), k2 = f(r + 0.5 * h * k1), k3 = f(r + 0.5 * h * k2), k4 = f(r + h * k3);
      r += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
  }
  return t;
}

FlowTrajectory static_circles(double r, int frames, double dtau, int m) {
  FlowTrajectory t(Picture::RMCF);
  for (int i = 0; i < frames; ++i) t.append(i * dtau, make_circle(m, r));
  return t;
}

}  // namespace

TEST_CASE("energy closed forms on the shrinker circle") {
  const auto c = make_circle(256, kSqrt2);
  const double e = std::exp(-0.5);
  CHECK(std::abs(energy_I(c, Field::Ones(256)) - 2 * kPi * kSqrt2 * e) < 1e-12);
  for (int k = 1; k <= 6; ++k) {
    CHECK(std::abs(energy_I(c, cos_mode(256, k)) - kPi * kSqrt2 * e) < 1e-12);
    CHECK(std::abs(frequency_U(c, cos_mode(256, k)) - 2 * (1 - k * k / 2.0)) < 1e-10);
  }
  CHECK(std::abs(frequency_U(c, Field::Ones(256)) - 2.0) < 1e-12);
}

TEST_CASE("frequency of an eigenfunction is twice its eigenvalue") {
  const auto base = make_ellipse(128, 1.6, 1.2, 0.3);
  const auto spec = eigenpairs(assemble(base), 4);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(frequency_U(base, spec.eigenfunctions[i]) - 2 * spec.eigenvalues[i]) < 1e-9);
}

TEST_CASE("frequency underflow") {
  const auto c = make_circle(64, kSqrt2);
  CHECK_THROWS_AS(frequency_U(c, Field::Zero(64)), EnergyUnderflow);
  try {
    frequency_U(c, Field::Constant(64, 1e-9));
  } catch (const EnergyUnderflow& e) {
    CHECK(std::string(e.what()).find("EnergyUnderflow: I = ") == 0);
  }
}

TEST_CASE("Dirichlet-Einstein quantity") {
  // phi = 1/2 on the unit circle: (1/4) 2 pi e^{-1/4}
  CHECK(std::abs(dirichlet_einstein(make_circle(256, 1.0)) - 0.25 * 2 * kPi * std::exp(-0.25)) < 1e-12);
  CHECK(dirichlet_einstein(make_circle(256, kSqrt2)) < 1e-20);
}

TEST_CASE("D coefficient") {
  SUBCASE("static shrinker") {
    const auto t = static_circles(kSqrt2, 3, 0.1, 128);
    CHECK(d_coefficient(t, size_t{1}).total < 1e-8);
    CHECK_THROWS_AS(d_coefficient(t, size_t{0}), FrameMissing);
    CHECK_THROWS_AS(d_coefficient(t, size_t{2}), FrameMissing);
    CHECK_THROWS_AS(d_coefficient(t, 0.05), FrameMissing);
  }
  SUBCASE("static unit circle") {
    const auto t = static_circles(1.0, 3, 0.1, 128);
    const auto d = d_coefficient(t, 0.1);
    CHECK(std::abs(d.phi - 0.5) < 1e-12);
    CHECK(std::abs(d.metric - 1.0) < 1e-10);
    CHECK(std::abs(d.curvature_rate - 1.0) < 1e-8);
    CHECK(d.phi_rate < 1e-8);
    CHECK(d.total >= d.phi);
  }
  SUBCASE("property: D dominates sup |phi| along a flow") {
    const auto t = converging_circles(1.2, 1.0, 0.1, 64);
    for (size_t i = 1; i + 1 < t.size(); ++i) {
      const auto d = d_coefficient(t, i);
      CHECK(d.total >= d.phi);
      CHECK(d.phi == doctest::Approx(shrinker_quantity(t[i].curve).cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("Lojasiewicz exponent on converging circles") {
  const auto t = converging_circles(1.5, 8.0, 0.1, 64);
  const auto fit = lojasiewicz_fit(t, shrinker_f_value());
  CHECK(fit.status == LojasiewiczStatus::Fitted);
  // |F - F*| ~ delta^2 and ||phi|| ~ delta
  CHECK(std::abs(fit.theta - 0.5) < 1e-2);
  CHECK(fit.partial_sums.size() == t.size());
  for (size_t i = 1; i < fit.partial_sums.size(); ++i) CHECK(fit.partial_sums[i] >= fit.partial_sums[i - 1]);
  CHECK(fit.tau.size() == fit.bound_holds.size());

  SUBCASE("exact shrinker") {
    const auto s = lojasiewicz_fit(static_circles(kSqrt2, 30, 0.1, 64), shrinker_f_value());
    CHECK(s.status == LojasiewiczStatus::ExactShrinker);
    CHECK(std::isnan(s.theta));
  }
  SUBCASE("short window") {
    CHECK_THROWS_AS(lojasiewicz_fit(converging_circles(1.5, 2.0, 0.1, 64), shrinker_f_value()), WindowTooShort);
  }
}

TEST_CASE("monitor on the linearized flow over the shrinker") {
  const auto base = make_circle(256, kSqrt2);
  FlowTrajectory b(Picture::RMCF), t(Picture::RMCF);
  const int k = 2;
  const double lambda = 1 - k * k / 2.0;
  for (int i = 0; i <= 40; ++i) {
    const double tau = 0.025 * i;
    b.append(tau, base);
    t.append(tau, reconstruct(base, cos_mode(256, k, 1e-4 * std::exp(lambda * tau))));
  }
  const auto trace = monitor(b, t);
  REQUIRE(trace.records.size() == 41);
  CHECK(std::abs(trace.Lambda - 1.0) < 1e-10);
  CHECK(trace.rayleigh_ok);
  CHECK(trace.chain_ok);
  CHECK_FALSE(trace.collapse);
  CHECK(std::abs(trace.lambda_fit + 2 * lambda) < 1e-3);
  for (const auto& r : trace.records) {
    CHECK_FALSE(r.underflow);
    CHECK(std::abs(r.U - 2 * lambda) < 1e-3);
    CHECK(r.U <= 2 * trace.Lambda + 1e-10);
  }
  for (size_t i = 1; i + 1 < trace.records.size(); ++i) CHECK(std::abs(trace.records[i].dlogI - 2 * lambda) < 1e-3);

  SUBCASE("csv and summary") {
    const std::string csv = trace_csv(trace);
    CHECK(csv.rfind("tau,I,U,Itilde,F,dFdtau,phiL2,D,fittedC,dlogI,Vmain,Verr,underflow\n", 0) == 0);
    const auto j = summary_json(trace, std::nullopt);
    CHECK(j.at("thetaFit").is_null());
    CHECK(j.at("Lambda").get<double>() == doctest::Approx(1.0));
  }
}

TEST_CASE("identical flows underflow") {
  const auto t = converging_circles(1.3, 0.5, 0.1, 64);
  const auto trace = monitor(t, t);
  CHECK(trace.all_underflow);
  for (const auto& r : trace.records) CHECK(r.underflow);
  const auto ft = flow_trace(t);
  CHECK(ft.records.size() == t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    CHECK(ft.records[i].underflow);
    CHECK(ft.records[i].F == doctest::Approx(f_functional(t[i].curve)).epsilon(1e-14));
    CHECK(ft.records[i].phiL2 == doctest::Approx(std::sqrt(dirichlet_einstein(t[i].curve))).epsilon(1e-14));
  }
}

TEST_CASE("line fits and collapse detection") {
  const auto f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_line({1.0}, {2.0}), std::invalid_argument);
  std::vector<double> tau, lin, quad;
  for (int i = 0; i <= 40; ++i) {
    tau.push_back(0.1 * i);
    lin.push_back(-2.0 * tau.back());
    quad.push_back(-tau.back() * tau.back() * tau.back());
  }
  CHECK_FALSE(superexponential_collapse(tau, lin));
  CHECK(superexponential_collapse(tau, quad));
  CHECK_FALSE(superexponential_collapse({0, 1, 2}, {0, -1, -10}));
}

TEST_CASE("property: U <= 2 Lambda for random graph functions") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const auto base = make_polar(128, 1.4, {{2, 0.1, 0.0}, {3, 0.0, 0.05}});
  const double Lambda = top_eigenvalue(assemble(base));
  for (int trial = 0; trial < 20; ++trial) {
    Field u(128);
    for (int j = 0; j < 128; ++j) u[j] = g(rng);
    CHECK(frequency_U(base, u) <= 2 * Lambda + 1e-10);
  }
}
