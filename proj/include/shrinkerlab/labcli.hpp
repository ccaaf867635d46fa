#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shrinkerlab/flowcore.hpp"
#include "shrinkerlab/frequency.hpp"

namespace shrinkerlab {

enum class Scenario { Simulate, Spectrum, GaugeResidual, Separation, Rate };

const char* to_string(Scenario scenario);
/// Throws ConfigInvalid for unknown names.
Scenario parse_scenario(const std::string& name);

/// Builtin initial curve: circle(r[, cx, cy]), ellipse(a, b[, angle]) or
/// fourier(r0, k1, a1, b1, k2, a2, b2, ...) for r(theta) = r0 + sum a cos k theta + b sin k theta.
struct CurveSpec {
  enum class Kind { Circle, Ellipse, Fourier };
  Kind kind = Kind::Circle;
  std::vector<double> args;
  std::string text;  // as written in the config
};

/// Throws ConfigInvalid naming `field` on malformed input.
CurveSpec parse_curve_spec(const std::string& text, const std::string& field = "initial_curves");
DiscreteCurve build_curve(const CurveSpec& spec, int m);

struct ScenarioConfig {
  Scenario scenario = Scenario::Simulate;
  std::vector<CurveSpec> initial_curves;
  int m = 512;
  Picture picture = Picture::MCF;
  StepControl step;
  std::optional<double> t_end;
  std::optional<double> tau_end;
  double output_interval = 0.05;
  double stop_area_fraction = 0.0;
  double fit_window = 0.4;
  std::uint64_t seed = 0;
  double perturb_amplitude = 0.0;
  std::vector<int> perturb_modes{2, 3};
  int eigen_count = 8;
  int lambda_stride = 10;
  /// Key-value pairs as given (after overrides), in key order.
  std::map<std::string, std::string> entries;
};

/// Flat `key = value` text with `#` comments. Keys outside the scenario's
/// set, missing required keys and malformed values throw ConfigInvalid with
/// the key name first in the message. `overrides` win over the text.
ScenarioConfig parse_config(const std::string& text, std::optional<Scenario> scenario = std::nullopt,
                            const std::map<std::string, std::string>& overrides = {});

/// Canonical `key = value` rendering of the parsed entries; its SHA-256 is
/// the config hash.
std::string canonical_config(const ScenarioConfig& config);

/// Initial curve `index` with the seeded random perturbation applied along
/// the normal (when perturb_amplitude > 0).
DiscreteCurve initial_curve(const ScenarioConfig& config, size_t index);

enum class Verdict { Consistent, SuperexponentialFlagged };
const char* to_string(Verdict verdict);

struct SeparationReport {
  double tau_switch = 0.0;
  std::vector<SingularityEstimate> singular;  // per flow
  std::vector<double> tau;
  std::vector<double> dH;
  double dH_slope = 0.0;     // d log d_H / d tau over the fit window
  double lambda_fit = 0.0;   // from log I
  double offset_fit = 0.0;
  double U_inf = 0.0;
  double U_late = 0.0;       // U at the last non-underflow frame
  double Lambda = 0.0;
  bool dH_collapse = false;
  bool I_underflow = false;  // u vanished identically
  Verdict verdict = Verdict::Consistent;
  FrequencyTrace trace;
  std::vector<FlowTrajectory> mcf;   // MCF phase per flow
  std::vector<FlowTrajectory> rmcf;  // aligned RMCF phase per flow
};

/// MCF of both curves to 10% of their area, (T, x0) per flow, switch at the
/// common tau = min_i -log(T_i - t_i), rescale and continue by aligned RMCF on
/// a shared tau grid; u is the graph of flow 2 over flow 1.
SeparationReport experiment_separation(const ScenarioConfig& config);

struct RateReport {
  LojasiewiczStatus status = LojasiewiczStatus::Fitted;
  SingularityEstimate singular;
  double tau_switch = 0.0;
  std::vector<double> tau;
  std::vector<double> dH;        // to the circle of radius sqrt 2
  std::vector<double> phi_norm;  // ||phi||_{L^2(dmu)}
  double dH_slope = 0.0;
  double phi_slope = 0.0;
  int dominant_mode = 0;          // largest radial mode k >= 2 at the window start
  double predicted_slope = 0.0;   // 1 - k^2/2
  std::optional<LojasiewiczFit> lojasiewicz;  // empty when F reaches its limit to rounding too early
  FlowTrajectory mcf{Picture::MCF};
  FlowTrajectory rmcf{Picture::RMCF};
};

/// MCF to 10% area, rescale at the estimated (T, x0), aligned RMCF to tau_end.
RateReport experiment_rate(const ScenarioConfig& config);

struct RunResult {
  int exit_code = 0;
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;  // relative to the output directory
};

/// Runs the scenario and writes frames/, trace.csv, summary.json and
/// manifest.json (file hashes, config hash, versions) under `out_dir`.
/// Exit code 0 on success or a consistent verdict, 2 on a flagged verdict.
RunResult run(const ScenarioConfig& config, const std::filesystem::path& out_dir);

std::string version_string();

}  // namespace shrinkerlab
