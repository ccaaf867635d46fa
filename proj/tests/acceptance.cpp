// Acceptance run: one PASS/FAIL line per criterion; exit status is the
// number of failed criteria (0 when all pass).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "shrinkerlab/curvegeo.hpp"
#include "shrinkerlab/flowcore.hpp"
#include "shrinkerlab/frequency.hpp"
#include "shrinkerlab/gauge.hpp"
#include "shrinkerlab/io.hpp"
#include "shrinkerlab/labcli.hpp"
#include "shrinkerlab/spectral.hpp"

using namespace shrinkerlab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Field cos_mode(int m, int k, double amp) {
  Field u(m);
  for (int j = 0; j < m; ++j) u[j] = amp * std::cos(k * 2.0 * kPi * j / m);
  return u;
}

FlowTrajectory static_trajectory(const DiscreteCurve& c, const std::vector<double>& taus) {
  FlowTrajectory t(Picture::RMCF);
  for (double tau : taus) t.append(tau, c);
  return t;
}

std::vector<double> grid(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i <= n; ++i) out.push_back(a + (b - a) * i / n);
  return out;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1. Shrinker identity on the origin circle of radius sqrt 2.
Outcome shrinker_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const DiscreteCurve c = make_circle(512, std::sqrt(2.0));
  const double phi = shrinker_quantity(c).cwiseAbs().maxCoeff();
  const double F = f_functional(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double exact = std::sqrt(2.0 * kPi) * std::exp(-0.5);
  const bool ok = phi < 1e-6 && std::abs(F - exact) < 1e-6 && std::abs(F - 1.520347) < 1e-6 && secs < 1.0;
  return {ok, fmt("max|phi| = %.2e, F - sqrt(2pi)e^-1/2 = %.2e, %.3fs", phi, F - exact, secs)};
}

// 2. Circle spectrum 1 - k^2/2, k = 0..6, pairs for k >= 1.
Outcome circle_spectrum() {
  const auto t0 = std::chrono::steady_clock::now();
  const Spectrum sp = eigenpairs(assemble(make_circle(512, std::sqrt(2.0))), 13);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double err = std::abs(sp.eigenvalues[0] - 1.0), gap = 0.0;
  for (int k = 1; k <= 6; ++k) {
    const double want = 1.0 - k * k / 2.0;
    err = std::max({err, std::abs(sp.eigenvalues[2 * k - 1] - want), std::abs(sp.eigenvalues[2 * k] - want)});
    gap = std::max(gap, std::abs(sp.eigenvalues[2 * k - 1] - sp.eigenvalues[2 * k]));
  }
  return {err < 1e-3 && gap < 1e-8 && secs < 10.0, fmt("max error %.2e, pair gap %.2e, %.2fs", err, gap, secs)};
}

// 3. dF/dtau = -int phi^2 along unaligned RMCF runs, with the Gaussian measure
// normalised like F, (4 pi)^{-1/2} exp(-|x|^2/4) ds; Itilde itself is unnormalised.
Outcome gradient_flow_identity() {
  const double norm = 1.0 / std::sqrt(4.0 * kPi);
  const std::vector<DiscreteCurve> starts = {
      make_ellipse(256, std::sqrt(2.0) * 1.1, std::sqrt(2.0) / 1.1),
      make_polar(256, std::sqrt(2.0), {{3, 0.05, 0.0}}),
      make_circle(256, 1.3),
  };
  double worst = 0.0, slowest = 0.0;
  for (const auto& c : starts) {
    const auto t0 = std::chrono::steady_clock::now();
    StepControl ctl;
    RunOptions o;
    o.output_interval = 0.005;
    const FlowTrajectory traj = run_rmcf(c, 0.0, 1.0, ctl, o);
    const FrequencyTrace tr = flow_trace(traj);
    for (const auto& r : tr.records)
      if (norm * r.Itilde > 1e-8)
        worst = std::max(worst, std::abs(r.dFdtau + norm * r.Itilde) / (norm * r.Itilde));
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return {worst < 1e-3 && slowest < 30.0, fmt("max relative defect %.2e over 3 runs, slowest run %.1fs", worst, slowest)};
}

// 4. Partial sums of int ||phi|| and int D settle past tau = 12.
Outcome integrability() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = parse_config(
      "initial_curves = ellipse(1.1, 0.9090909090909091)\nm = 128\ntau_end = 14\n", Scenario::Rate);
  const RateReport rep = experiment_rate(cfg);
  const FrequencyTrace tr = flow_trace(rep.rmcf);
  const size_t n = rep.tau.size();
  std::vector<double> Sphi(n, 0.0), SD(n, 0.0);
  for (size_t j = 1; j < n; ++j) {
    const double dt = rep.tau[j] - rep.tau[j - 1];
    Sphi[j] = Sphi[j - 1] + 0.5 * (rep.phi_norm[j] + rep.phi_norm[j - 1]) * dt;
    // D is defined on interior frames; the end frames reuse their neighbour.
    const double Dj = std::isfinite(tr.records[j].D) ? tr.records[j].D : tr.records[j - 1].D;
    const double Dp = std::isfinite(tr.records[j - 1].D) ? tr.records[j - 1].D : Dj;
    SD[j] = SD[j - 1] + 0.5 * (Dj + Dp) * dt;
  }
  double inc_phi = 0.0, inc_D = 0.0;
  for (size_t a = 0; a < n; ++a) {
    if (rep.tau[a] < 12.0) continue;
    for (size_t b = a; b < n && rep.tau[b] <= rep.tau[a] + 1.0 + 1e-9; ++b) {
      if (rep.tau[b] < rep.tau[a] + 1.0 - 1e-9) continue;
      inc_phi = std::max(inc_phi, Sphi[b] - Sphi[a]);
      inc_D = std::max(inc_D, SD[b] - SD[a]);
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = inc_phi < 1e-4 && inc_D < 1e-4 && rep.tau.back() >= 13.0;
  return {ok, fmt("unit-tau increments past 12: int||phi|| %.2e, int D %.2e, %.1fs", inc_phi, inc_D, secs)};
}

// 5. Quadratic residual ratio bounded across a 100x amplitude sweep.
Outcome linearization_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  const int m = 256;
  const DiscreteCurve circle = make_circle(m, std::sqrt(2.0));
  std::vector<double> ratios;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    StepControl ctl;
    RunOptions o;
    o.output_interval = 1e-3;
    const FlowTrajectory target = run_rmcf(reconstruct(circle, cos_mode(m, 2, eps)), 0.0, 0.1, ctl, o);
    const FlowTrajectory base = static_trajectory(circle, target.times());
    double worst = 0.0;
    for (size_t j = 1; j + 1 < base.size(); j += 10)
      worst = std::max(worst, residual(base, target, base[j].time).quad_ratio);
    ratios.push_back(worst);
  }
  const double hi = std::max({ratios[0], ratios[1], ratios[2]});
  const double lo = std::min({ratios[0], ratios[1], ratios[2]});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // One constant K = 2 for the whole sweep, and no systematic drift with the amplitude.
  const bool ok = hi <= 2.0 && hi / lo <= 10.0;
  return {ok, fmt("ratio %.3g .. %.3g across eps 1e-2..1e-4, %.1fs", lo, hi, secs)};
}

// 6. Frequency on synthetic eigenmodes and a two-mode mixture.
Outcome frequency_mechanics() {
  const auto t0 = std::chrono::steady_clock::now();
  const int m = 256;
  const DiscreteCurve circle = make_circle(m, std::sqrt(2.0));
  const std::vector<double> taus = grid(0.0, 2.0, 40);
  const FlowTrajectory base = static_trajectory(circle, taus);
  double u_err = 0.0, i_err = 0.0;
  for (int k : {2, 3}) {
    const double lam = 1.0 - k * k / 2.0;
    FlowTrajectory target(Picture::RMCF);
    for (double tau : taus) target.append(tau, reconstruct(circle, cos_mode(m, k, 1e-3 * std::exp(lam * tau))));
    MonitorOptions mo;
    mo.Lambda = 1.0;
    const FrequencyTrace tr = monitor(base, target, mo);
    const double I0 = tr.records.front().I;
    for (const auto& r : tr.records) {
      u_err = std::max(u_err, std::abs(r.U - 2.0 * lam));
      i_err = std::max(i_err, std::abs(r.I / (I0 * std::exp(r.U * r.tau)) - 1.0));
    }
  }
  FlowTrajectory mix(Picture::RMCF);
  const std::vector<double> mtaus = grid(0.0, 4.0, 80);
  for (double tau : mtaus)
    mix.append(tau, reconstruct(circle, cos_mode(m, 2, 1e-3 * std::exp(-tau)) + cos_mode(m, 3, 1e-3 * std::exp(-3.5 * tau))));
  MonitorOptions mo;
  mo.Lambda = 1.0;
  const FrequencyTrace tr = monitor(static_trajectory(circle, mtaus), mix, mo);
  double worst_drop = 0.0;
  for (size_t j = 1; j < tr.records.size(); ++j)
    worst_drop = std::max(worst_drop, tr.records[j - 1].U - tr.records[j].U);
  const double final_gap = std::abs(tr.records.back().U + 2.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = u_err < 1e-4 && i_err < 1e-3 && worst_drop <= 1e-10 && final_gap < 1e-4;
  char buf[256];
  std::snprintf(buf, sizeof buf, "|U - 2lam| %.2e, I rel %.2e, mixture max drop %.1e, |U(4) + 2| %.1e, %.1fs", u_err,
                i_err, worst_drop, final_gap, secs);
  return {ok, buf};
}

// 7. Separation of an ellipse and the circle of equal area at m = 512.
Outcome separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = parse_config(
      "initial_curves = circle(1); ellipse(1.1, 0.9090909090909091)\nm = 512\n", Scenario::Separation);
  const SeparationReport rep = experiment_separation(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = std::abs(rep.dH_slope + 1.0) <= 0.15 && std::isfinite(rep.U_inf) &&
                  std::abs(rep.U_late + 2.0) <= 0.2 && rep.verdict == Verdict::Consistent && secs < 60.0;
  char buf[256];
  std::snprintf(buf, sizeof buf, "log dH slope %.4f, U late %.4f, U inf %.4f, verdict %s, %.1fs", rep.dH_slope,
                rep.U_late, rep.U_inf, to_string(rep.verdict), secs);
  return {ok, buf};
}

// 8. Singular time and point from the MCF phase.
Outcome singularity_estimation() {
  StepControl ctl;
  RunOptions o;
  o.output_interval = 0.01;
  o.stop_area_fraction = 0.1;
  const Vec2 centre(0.3, -0.2);
  const SingularityEstimate ec = estimate_singularity(run_mcf(make_circle(256, 2.0, centre), 0.0, 4.0, ctl, o));
  const double a = 1.5, b = 1.0;
  const SingularityEstimate ee = estimate_singularity(run_mcf(make_ellipse(256, a, b), 0.0, 2.0, ctl, o));
  const double T_ellipse = kPi * a * b / (2.0 * kPi);
  const double e1 = std::abs(ec.T - 2.0), e2 = (ec.x0 - centre).norm(), e3 = std::abs(ee.T - T_ellipse);
  return {e1 < 1e-3 && e2 < 1e-3 && e3 < 1e-3,
          fmt("circle |T - 2| %.1e, |x0 - c| %.1e; ellipse |T - A0/2pi| %.1e", e1, e2, e3)};
}

// 9. Byte-identical trace.csv on reruns of every scenario.
Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "shrinkerlab_acceptance";
  const std::vector<std::pair<Scenario, std::string>> cases = {
      {Scenario::Simulate, "initial_curves = ellipse(1.2, 0.8)\npicture = rmcf\ntau_end = 0.5\nm = 64\n"},
      {Scenario::Spectrum, "initial_curves = ellipse(1.5, 1.3333333333333333)\nm = 64\n"},
      {Scenario::GaugeResidual,
       "initial_curves = circle(1.4142135623730951)\nm = 64\ntau_end = 0.2\noutput_interval = 0.01\n"
       "perturb_amplitude = 0.001\nseed = 7\n"},
      {Scenario::Separation, "initial_curves = circle(1); ellipse(1.1, 0.9090909090909091)\nm = 64\ntau_end = 5\n"},
      {Scenario::Rate, "initial_curves = fourier(1, 2, 0.05, 0.02)\nm = 64\ntau_end = 6\n"},
  };
  int identical = 0;
  for (const auto& [s, text] : cases) {
    const ScenarioConfig cfg = parse_config(text, s);
    const auto a = root / (std::string(to_string(s)) + "_a");
    const auto b = root / (std::string(to_string(s)) + "_b");
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
    run(cfg, a);
    run(cfg, b);
    const std::string ta = read_text(a / "trace.csv");
    if (!ta.empty() && ta == read_text(b / "trace.csv") &&
        read_text(a / "manifest.json") == read_text(b / "manifest.json"))
      ++identical;
  }
  std::filesystem::remove_all(root);
  return {identical == static_cast<int>(cases.size()),
          fmt("%.0f of %.0f scenarios byte-identical (trace.csv and manifest.json)", identical, cases.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"shrinker identity", shrinker_identity},
      {"circle spectrum", circle_spectrum},
      {"gradient-flow identity", gradient_flow_identity},
      {"integrability", integrability},
      {"linearization bound", linearization_bound},
      {"frequency mechanics", frequency_mechanics},
      {"separation", separation},
      {"singularity estimation", singularity_estimation},
      {"determinism", determinism},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
