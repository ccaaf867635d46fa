#include "shrinkerlab/labcli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Core>
#include <fftw3.h>
#include <openssl/crypto.h>

#include "shrinkerlab/errors.hpp"
#include "shrinkerlab/gauge.hpp"
#include "shrinkerlab/io.hpp"
#include "shrinkerlab/spectral.hpp"

#ifndef SHRINKERLAB_VERSION
#define SHRINKERLAB_VERSION "0.0.0"
#endif

namespace shrinkerlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ConfigInvalid(key + ": expected a finite number, got '" + v + "'");
  return x;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigInvalid(key + ": expected an integer, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigInvalid(key + ": expected true or false, got '" + v + "'");
}

double positive(const std::string& key, double x) {
  if (!(x > 0.0)) throw ConfigInvalid(key + ": must be positive");
  return x;
}

const std::set<std::string>& allowed_keys(Scenario s) {
  static const std::set<std::string> simulate = {
      "scenario", "initial_curves", "m",     "scheme",          "seed",     "perturb_amplitude", "perturb_modes",
      "picture",  "cfl",            "max_curvature", "t_end", "tau_end", "output_interval",   "align",
      "stop_area_fraction"};
  static const std::set<std::string> spectrum = {"scenario", "initial_curves",    "m",           "scheme",
                                                 "seed",     "perturb_amplitude", "perturb_modes", "eigen_count"};
  static const std::set<std::string> gauge = {
      "scenario",      "initial_curves", "m",       "scheme",          "seed",  "perturb_amplitude",
      "perturb_modes", "cfl",            "max_curvature", "tau_end", "output_interval", "align", "fit_window",
      "lambda_stride"};
  static const std::set<std::string> separation = {
      "scenario",      "initial_curves", "m",       "scheme",          "seed",      "perturb_amplitude",
      "perturb_modes", "cfl",            "max_curvature", "tau_end", "output_interval", "fit_window",
      "lambda_stride"};
  static const std::set<std::string> rate = {
      "scenario",      "initial_curves", "m",       "scheme",          "seed",      "perturb_amplitude",
      "perturb_modes", "cfl",            "max_curvature", "tau_end", "output_interval", "fit_window"};
  switch (s) {
    case Scenario::Simulate: return simulate;
    case Scenario::Spectrum: return spectrum;
    case Scenario::GaugeResidual: return gauge;
    case Scenario::Separation: return separation;
    case Scenario::Rate: return rate;
  }
  return simulate;
}

// Uniform in [-1, 1) from the top 53 bits; identical on every platform.
double symmetric_unit(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

// Slope of log y against tau over the last `fraction` of samples with y > 0.
std::optional<LineFit> window_log_fit(const std::vector<double>& tau, const std::vector<double>& y, double fraction,
                                      std::vector<double>* wt = nullptr, std::vector<double>* wl = nullptr) {
  const size_t n = tau.size();
  const size_t count = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
  std::vector<double> t, l;
  for (size_t j = n - std::min(count, n); j < n; ++j) {
    if (!(y[j] > 0.0)) continue;
    t.push_back(tau[j]);
    l.push_back(std::log(y[j]));
  }
  if (wt) *wt = t;
  if (wl) *wl = l;
  if (t.size() < 2) return std::nullopt;
  return fit_line(t, l);
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json singular_json(const SingularityEstimate& e) {
  return {{"T", e.T}, {"TError", e.T_error}, {"x0", {e.x0.x(), e.x0.y()}}, {"x0Error", e.x0_error},
          {"areaRate", e.area_rate}};
}

DiscreteCurve rescale_curve(const DiscreteCurve& c, double tau, const Vec2& x0) {
  std::vector<Vec2> pts = c.points();
  const double s = std::exp(tau / 2.0);
  for (auto& p : pts) p = s * (p - x0);
  return DiscreteCurve::trusted(std::move(pts));
}

// Radial Fourier amplitudes of |x| - sqrt 2 in the polar angle, k = 2..kmax.
int dominant_radial_mode(const DiscreteCurve& c, int kmax) {
  const int m = c.size();
  std::vector<double> psi(static_cast<size_t>(m)), r(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    psi[j] = std::atan2(c[j].y(), c[j].x());
    r[j] = c[j].norm() - kShrinkerRadius;
  }
  int best = 2;
  double best_amp = -1.0;
  for (int k = 2; k <= kmax; ++k) {
    double re = 0.0, im = 0.0;
    for (int j = 0; j < m; ++j) {
      const int jn = (j + 1) % m;
      double dpsi = psi[jn] - psi[j];
      if (dpsi < -std::numbers::pi) dpsi += 2.0 * std::numbers::pi;
      if (dpsi > std::numbers::pi) dpsi -= 2.0 * std::numbers::pi;
      const double a = 0.5 * (r[j] * std::cos(k * psi[j]) + r[jn] * std::cos(k * psi[jn]));
      const double b = 0.5 * (r[j] * std::sin(k * psi[j]) + r[jn] * std::sin(k * psi[jn]));
      re += a * dpsi;
      im += b * dpsi;
    }
    const double amp = std::hypot(re, im);
    if (amp > best_amp) {
      best_amp = amp;
      best = k;
    }
  }
  return best;
}

struct McfPhase {
  FlowTrajectory traj{Picture::MCF};
  SingularityEstimate est;
};

McfPhase mcf_to_tenth(const DiscreteCurve& c, const StepControl& ctl) {
  RunOptions o;
  o.output_interval = 0.01;
  o.stop_area_fraction = 0.1;
  McfPhase p;
  // The stop fraction ends the run long before this horizon.
  const double horizon = 2.0 * enclosed_area(c) / (2.0 * std::numbers::pi);
  p.traj = run_mcf(c, 0.0, horizon, ctl, o);
  p.est = estimate_singularity(p.traj);
  p.traj.set_singular_data({p.est.T, p.est.x0});
  return p;
}

StepControl rmcf_control(const ScenarioConfig& cfg) {
  StepControl rc = cfg.step;
  rc.align = true;
  return rc;
}

}  // namespace

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::Simulate: return "simulate";
    case Scenario::Spectrum: return "spectrum";
    case Scenario::GaugeResidual: return "gauge-residual";
    case Scenario::Separation: return "separation";
    case Scenario::Rate: return "rate";
  }
  return "?";
}

Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::Simulate, Scenario::Spectrum, Scenario::GaugeResidual, Scenario::Separation,
                     Scenario::Rate})
    if (name == to_string(s)) return s;
  throw ConfigInvalid("scenario: unknown scenario '" + name + "'");
}

const char* to_string(Verdict v) { return v == Verdict::Consistent ? "consistent" : "superexponential-flagged"; }

CurveSpec parse_curve_spec(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  const auto open = t.find('(');
  if (open == std::string::npos || t.back() != ')')
    throw ConfigInvalid(field + ": curve spec '" + t + "' must look like name(args)");
  const std::string name = trim(t.substr(0, open));
  CurveSpec spec;
  spec.text = t;
  for (const auto& a : split(t.substr(open + 1, t.size() - open - 2), ','))
    spec.args.push_back(parse_double(field, a));
  const size_t n = spec.args.size();
  if (name == "circle") {
    spec.kind = CurveSpec::Kind::Circle;
    if (n != 1 && n != 3) throw ConfigInvalid(field + ": circle takes (r) or (r, cx, cy)");
    positive(field, spec.args[0]);
  } else if (name == "ellipse") {
    spec.kind = CurveSpec::Kind::Ellipse;
    if (n != 2 && n != 3) throw ConfigInvalid(field + ": ellipse takes (a, b) or (a, b, angle)");
    positive(field, spec.args[0]);
    positive(field, spec.args[1]);
  } else if (name == "fourier") {
    spec.kind = CurveSpec::Kind::Fourier;
    if (n < 1 || (n - 1) % 3 != 0) throw ConfigInvalid(field + ": fourier takes (r0, k, a, b, ...)");
    positive(field, spec.args[0]);
    for (size_t i = 1; i < n; i += 3)
      if (spec.args[i] < 1 || spec.args[i] != std::floor(spec.args[i]))
        throw ConfigInvalid(field + ": fourier mode numbers must be positive integers");
  } else {
    throw ConfigInvalid(field + ": unknown curve '" + name + "'");
  }
  return spec;
}

DiscreteCurve build_curve(const CurveSpec& spec, int m) {
  const auto& a = spec.args;
  switch (spec.kind) {
    case CurveSpec::Kind::Circle:
      return make_circle(m, a[0], a.size() == 3 ? Vec2(a[1], a[2]) : Vec2::Zero());
    case CurveSpec::Kind::Ellipse:
      return make_ellipse(m, a[0], a[1], a.size() == 3 ? a[2] : 0.0);
    case CurveSpec::Kind::Fourier: {
      std::vector<PolarMode> modes;
      for (size_t i = 1; i + 3 <= a.size(); i += 3) {
        modes.push_back({static_cast<int>(a[i]), a[i + 1], a[i + 2]});
      }
      return make_polar(m, a[0], modes);
    }
  }
  throw ConfigInvalid("initial_curves: unknown curve kind");
}

ScenarioConfig parse_config(const std::string& text, std::optional<Scenario> scenario,
                            const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigInvalid("line " + std::to_string(lineno) + ": empty key");
    if (value.empty()) throw ConfigInvalid(key + ": empty value");
    if (!kv.emplace(key, value).second) throw ConfigInvalid(key + ": given more than once");
  }
  for (const auto& [k, v] : overrides) kv[k] = v;

  ScenarioConfig cfg;
  if (scenario) {
    cfg.scenario = *scenario;
    kv["scenario"] = to_string(*scenario);
  } else {
    const auto it = kv.find("scenario");
    if (it == kv.end()) throw ConfigInvalid("scenario: required");
    cfg.scenario = parse_scenario(it->second);
  }
  const Scenario s = cfg.scenario;
  const auto& allowed = allowed_keys(s);
  for (const auto& [k, v] : kv)
    if (!allowed.count(k)) throw ConfigInvalid(k + ": not a key of scenario " + to_string(s));

  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  const auto curves = get("initial_curves");
  if (!curves) throw ConfigInvalid(std::string("initial_curves: required by scenario ") + to_string(s));
  for (const auto& c : split(*curves, ';'))
    if (!c.empty()) cfg.initial_curves.push_back(parse_curve_spec(c));
  const size_t nc = cfg.initial_curves.size();
  const bool two = s == Scenario::Separation;
  if (two && nc != 2) throw ConfigInvalid("initial_curves: separation needs exactly two curves");
  if (s == Scenario::GaugeResidual && (nc < 1 || nc > 2))
    throw ConfigInvalid("initial_curves: gauge-residual takes one or two curves");
  if (!two && s != Scenario::GaugeResidual && nc != 1)
    throw ConfigInvalid(std::string("initial_curves: scenario ") + to_string(s) + " takes exactly one curve");

  if (auto v = get("m")) {
    const long long m = parse_int("m", *v);
    if (m < 16 || m % 2 != 0 || m > 4096) throw ConfigInvalid("m: must be even and in [16, 4096]");
    cfg.m = static_cast<int>(m);
  }
  const bool experiment = s == Scenario::Separation || s == Scenario::Rate || s == Scenario::GaugeResidual;
  if (experiment && cfg.m < 64) throw ConfigInvalid("m: experiments need m >= 64");

  if (auto v = get("scheme")) {
    if (*v == "spectral")
      cfg.step.scheme = DiffScheme::Spectral;
    else if (*v == "fourth-order")
      cfg.step.scheme = DiffScheme::FourthOrder;
    else
      throw ConfigInvalid("scheme: expected spectral or fourth-order");
  }
  if (s == Scenario::Separation) cfg.step.cfl = 0.9;
  if (auto v = get("cfl")) {
    cfg.step.cfl = parse_double("cfl", *v);
    if (!(cfg.step.cfl > 0.0 && cfg.step.cfl <= 1.0)) throw ConfigInvalid("cfl: must lie in (0, 1]");
  }
  if (auto v = get("max_curvature")) cfg.step.max_curvature = positive("max_curvature", parse_double("max_curvature", *v));
  if (auto v = get("align")) cfg.step.align = parse_bool("align", *v);
  if (auto v = get("output_interval"))
    cfg.output_interval = positive("output_interval", parse_double("output_interval", *v));
  if (auto v = get("stop_area_fraction")) {
    cfg.stop_area_fraction = parse_double("stop_area_fraction", *v);
    if (!(cfg.stop_area_fraction >= 0.0 && cfg.stop_area_fraction < 1.0))
      throw ConfigInvalid("stop_area_fraction: must lie in [0, 1)");
  }
  if (auto v = get("fit_window")) {
    cfg.fit_window = parse_double("fit_window", *v);
    if (!(cfg.fit_window > 0.0 && cfg.fit_window <= 1.0)) throw ConfigInvalid("fit_window: must lie in (0, 1]");
  }
  if (auto v = get("seed")) {
    const long long seed = parse_int("seed", *v);
    if (seed < 0) throw ConfigInvalid("seed: must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  if (auto v = get("perturb_amplitude")) {
    cfg.perturb_amplitude = parse_double("perturb_amplitude", *v);
    if (cfg.perturb_amplitude < 0.0) throw ConfigInvalid("perturb_amplitude: must be nonnegative");
  }
  if (auto v = get("perturb_modes")) {
    cfg.perturb_modes.clear();
    for (const auto& k : split(*v, ',')) {
      const long long mode = parse_int("perturb_modes", k);
      if (mode < 0) throw ConfigInvalid("perturb_modes: modes must be nonnegative");
      cfg.perturb_modes.push_back(static_cast<int>(mode));
    }
    if (cfg.perturb_modes.empty()) throw ConfigInvalid("perturb_modes: empty list");
  }
  if (auto v = get("eigen_count")) {
    const long long k = parse_int("eigen_count", *v);
    if (k < 1 || k > cfg.m) throw ConfigInvalid("eigen_count: must lie in [1, m]");
    cfg.eigen_count = static_cast<int>(k);
  }
  if (auto v = get("lambda_stride")) {
    const long long k = parse_int("lambda_stride", *v);
    if (k < 1) throw ConfigInvalid("lambda_stride: must be >= 1");
    cfg.lambda_stride = static_cast<int>(k);
  }
  if (auto v = get("t_end")) cfg.t_end = positive("t_end", parse_double("t_end", *v));
  if (auto v = get("tau_end")) cfg.tau_end = positive("tau_end", parse_double("tau_end", *v));

  if (s == Scenario::Simulate) {
    const auto pic = get("picture");
    if (!pic) throw ConfigInvalid("picture: required by scenario simulate");
    if (*pic == "mcf")
      cfg.picture = Picture::MCF;
    else if (*pic == "rmcf")
      cfg.picture = Picture::RMCF;
    else
      throw ConfigInvalid("picture: expected mcf or rmcf");
    if (cfg.picture == Picture::MCF) {
      if (!cfg.t_end) throw ConfigInvalid("t_end: required by an mcf simulation");
      if (cfg.tau_end) throw ConfigInvalid("tau_end: not used by an mcf simulation (use t_end)");
      if (cfg.step.align) throw ConfigInvalid("align: only meaningful for rmcf");
    } else {
      if (!cfg.tau_end) throw ConfigInvalid("tau_end: required by an rmcf simulation");
      if (cfg.t_end) throw ConfigInvalid("t_end: not used by an rmcf simulation (use tau_end)");
      if (cfg.stop_area_fraction > 0.0) throw ConfigInvalid("stop_area_fraction: only meaningful for mcf");
    }
  }
  if (s == Scenario::GaugeResidual && !cfg.tau_end) throw ConfigInvalid("tau_end: required by scenario gauge-residual");
  if (s == Scenario::GaugeResidual && nc == 1 && !(cfg.perturb_amplitude > 0.0))
    throw ConfigInvalid("perturb_amplitude: a single-curve gauge-residual run needs a positive amplitude");
  if ((s == Scenario::Separation || s == Scenario::Rate) && !cfg.tau_end) cfg.tau_end = 8.0;

  cfg.entries = kv;
  return cfg;
}

std::string canonical_config(const ScenarioConfig& config) {
  std::string out;
  for (const auto& [k, v] : config.entries) out += k + " = " + v + "\n";
  return out;
}

DiscreteCurve initial_curve(const ScenarioConfig& config, size_t index) {
  if (index >= config.initial_curves.size() &&
      !(config.scenario == Scenario::GaugeResidual && index == 1 && config.initial_curves.size() == 1))
    throw ConfigInvalid("initial_curves: no curve number " + std::to_string(index + 1));
  const size_t source = std::min(index, config.initial_curves.size() - 1);
  const DiscreteCurve base = build_curve(config.initial_curves[source], config.m);
  // The perturbation acts on the last curve (a perturbed copy in single-curve gauge runs).
  const size_t last = config.scenario == Scenario::GaugeResidual ? 1 : config.initial_curves.size() - 1;
  if (!(config.perturb_amplitude > 0.0) || index != last) return base;
  std::mt19937_64 rng(config.seed);
  const int m = config.m;
  Field u = Field::Zero(m);
  for (int k : config.perturb_modes) {
    const double a = config.perturb_amplitude * symmetric_unit(rng);
    const double b = k == 0 ? 0.0 : config.perturb_amplitude * symmetric_unit(rng);
    for (int j = 0; j < m; ++j) {
      const double th = 2.0 * std::numbers::pi * j / m;
      u[j] += a * std::cos(k * th) + b * std::sin(k * th);
    }
  }
  return reconstruct(base, u, config.step.scheme);
}

SeparationReport experiment_separation(const ScenarioConfig& config) {
  if (config.initial_curves.size() != 2) throw ConfigInvalid("initial_curves: separation needs exactly two curves");
  SeparationReport rep;
  const StepControl ctl = config.step;
  std::vector<DiscreteCurve> last;
  double tau_switch = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < 2; ++i) {
    McfPhase p = mcf_to_tenth(initial_curve(config, i), ctl);
    tau_switch = std::min(tau_switch, -std::log(p.est.T - p.traj.back().time));
    rep.singular.push_back(p.est);
    rep.mcf.push_back(std::move(p.traj));
  }
  rep.tau_switch = tau_switch;
  if (!(*config.tau_end > tau_switch + 20.0 * config.output_interval))
    throw WindowTooShort("tau_end " + format_double(*config.tau_end) + " leaves too few frames after the switch at tau " +
                         format_double(tau_switch));

  const StepControl rc = rmcf_control(config);
  RunOptions ro;
  ro.output_interval = config.output_interval;
  for (size_t i = 0; i < 2; ++i) {
    const FlowTrajectory& tr = rep.mcf[i];
    const double target = rep.singular[i].T - std::exp(-tau_switch);
    size_t k = tr.size() - 1;
    while (k > 0 && tr[k].time > target) --k;
    const DiscreteCurve at = advance_mcf(tr[k].curve, target - tr[k].time, ctl);
    FlowTrajectory r = run_rmcf(rescale_curve(at, tau_switch, rep.singular[i].x0), tau_switch, *config.tau_end, rc, ro);
    r.set_singular_data({rep.singular[i].T, rep.singular[i].x0});
    rep.rmcf.push_back(std::move(r));
  }

  const FlowTrajectory& r1 = rep.rmcf[0];
  const FlowTrajectory& r2 = rep.rmcf[1];
  for (size_t j = 0; j < r1.size(); ++j) {
    rep.tau.push_back(r1[j].time);
    rep.dH.push_back(hausdorff_distance(r1[j].curve, r2[j].curve, 8));
  }

  MonitorOptions mo;
  mo.fit_window = config.fit_window;
  mo.scheme = config.step.scheme;
  mo.lambda_stride = config.lambda_stride;
  rep.trace = monitor(r1, r2, mo);
  rep.lambda_fit = rep.trace.lambda_fit;
  rep.offset_fit = rep.trace.offset_fit;
  rep.U_inf = rep.trace.U_inf;
  rep.Lambda = rep.trace.Lambda;
  rep.I_underflow = rep.trace.all_underflow;
  rep.U_late = kNaN;
  for (auto it = rep.trace.records.rbegin(); it != rep.trace.records.rend(); ++it)
    if (!it->underflow) {
      rep.U_late = it->U;
      break;
    }

  std::vector<double> wt, wl;
  const auto fit = window_log_fit(rep.tau, rep.dH, config.fit_window, &wt, &wl);
  rep.dH_slope = fit ? fit->slope : kNaN;
  rep.dH_collapse = superexponential_collapse(wt, wl);
  const bool flagged = rep.dH_collapse || rep.trace.collapse;
  rep.verdict = flagged ? Verdict::SuperexponentialFlagged : Verdict::Consistent;
  return rep;
}

RateReport experiment_rate(const ScenarioConfig& config) {
  RateReport rep;
  McfPhase p = mcf_to_tenth(initial_curve(config, 0), config.step);
  rep.singular = p.est;
  rep.mcf = std::move(p.traj);
  rep.tau_switch = -std::log(rep.singular.T - rep.mcf.back().time);
  RunOptions ro;
  ro.output_interval = config.output_interval;
  rep.rmcf = run_rmcf(rescale_curve(rep.mcf.back().curve, rep.tau_switch, rep.singular.x0), rep.tau_switch,
                      *config.tau_end, rmcf_control(config), ro);
  rep.rmcf.set_singular_data({rep.singular.T, rep.singular.x0});

  double worst = 0.0;
  for (const auto& f : rep.rmcf.frames()) {
    rep.tau.push_back(f.time);
    rep.dH.push_back(hausdorff_to_circle(f.curve, Vec2::Zero(), kShrinkerRadius, 8));
    rep.phi_norm.push_back(std::sqrt(dirichlet_einstein(f.curve, config.step.scheme)));
    worst = std::max(worst, rep.dH.back());
  }
  if (worst < 1e-8) {
    rep.status = LojasiewiczStatus::ExactShrinker;
    rep.dH_slope = rep.phi_slope = rep.predicted_slope = kNaN;
    return rep;
  }
  const auto fd = window_log_fit(rep.tau, rep.dH, config.fit_window);
  const auto fp = window_log_fit(rep.tau, rep.phi_norm, config.fit_window);
  if (!fd || !fp) throw WindowTooShort("rate fit window has fewer than two usable frames");
  rep.dH_slope = fd->slope;
  rep.phi_slope = fp->slope;
  const size_t n = rep.rmcf.size();
  const size_t start = n - std::min(n, static_cast<size_t>(std::ceil(config.fit_window * static_cast<double>(n))));
  rep.dominant_mode = dominant_radial_mode(rep.rmcf[start].curve, 16);
  rep.predicted_slope = 1.0 - rep.dominant_mode * rep.dominant_mode / 2.0;
  try {
    rep.lojasiewicz = lojasiewicz_fit(rep.rmcf, shrinker_f_value(), config.fit_window, config.step.scheme);
  } catch (const WindowTooShort&) {
    // F reached its limit to rounding before enough frames: no exponent to fit.
  }
  return rep;
}

std::string version_string() { return SHRINKERLAB_VERSION; }

namespace {

struct Outputs {
  std::filesystem::path root;
  std::vector<std::filesystem::path> files;

  void text(const std::filesystem::path& rel, const std::string& content) {
    write_text(root / rel, content);
    files.push_back(rel);
  }
  void trajectory(const std::string& stem, const FlowTrajectory& traj) {
    for (const auto& p : write_trajectory(root / "frames", stem, traj))
      files.push_back(std::filesystem::relative(p, root));
  }
};

std::string series_csv(const std::string& header, const std::vector<std::vector<double>>& cols) {
  std::string out = header + "\n";
  const size_t n = cols.empty() ? 0 : cols.front().size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < cols.size(); ++c) {
      if (c) out += ',';
      out += format_double(cols[c][i]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json libraries_json() {
  nlohmann::json j;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["fftw"] = std::string(fftw_version);
  j["openssl"] = std::string(OpenSSL_version(OPENSSL_VERSION));
  return j;
}

}  // namespace

RunResult run(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  Outputs out{out_dir, {}};
  RunResult result;
  nlohmann::json summary;
  nlohmann::json manifest_extra = nlohmann::json::object();
  const DiffScheme scheme = config.step.scheme;

  switch (config.scenario) {
    case Scenario::Simulate: {
      const DiscreteCurve c = initial_curve(config, 0);
      RunOptions o;
      o.output_interval = config.output_interval;
      FlowTrajectory traj(config.picture);
      if (config.picture == Picture::MCF) {
        o.stop_area_fraction = config.stop_area_fraction;
        traj = run_mcf(c, 0.0, *config.t_end, config.step, o);
      } else {
        traj = run_rmcf(c, 0.0, *config.tau_end, config.step, o);
      }
      const FrequencyTrace trace = flow_trace(traj, scheme);
      summary = summary_json(trace, std::nullopt);
      summary["frames"] = traj.size();
      summary["finalTime"] = traj.back().time;
      summary["finalArea"] = enclosed_area(traj.back().curve);
      summary["finalF"] = trace.records.back().F;
      if (config.picture == Picture::MCF) {
        const SingularityEstimate e = estimate_singularity(traj);
        traj.set_singular_data({e.T, e.x0});
        summary["singularData"] = singular_json(e);
        manifest_extra["singularData"] = singular_json(e);
      }
      out.trajectory("flow", traj);
      out.text("trace.csv", trace_csv(trace));
      break;
    }
    case Scenario::Spectrum: {
      const DiscreteCurve c = initial_curve(config, 0);
      const Spectrum sp = eigenpairs(assemble(c, scheme), config.eigen_count);
      FlowTrajectory one(Picture::RMCF);
      one.append(0.0, c);
      FrequencyTrace trace = flow_trace(one, scheme);
      trace.Lambda = sp.Lambda;
      summary = summary_json(trace, std::nullopt);
      summary["eigenvalues"] = sp.eigenvalues;
      std::vector<double> idx;
      for (size_t i = 0; i < sp.eigenvalues.size(); ++i) idx.push_back(static_cast<double>(i));
      std::string ef = "node";
      for (size_t i = 0; i < sp.eigenfunctions.size(); ++i) ef += ",v" + std::to_string(i);
      std::vector<std::vector<double>> cols(1 + sp.eigenfunctions.size());
      for (int j = 0; j < c.size(); ++j) cols[0].push_back(j);
      for (size_t i = 0; i < sp.eigenfunctions.size(); ++i)
        cols[i + 1].assign(sp.eigenfunctions[i].data(), sp.eigenfunctions[i].data() + c.size());
      out.trajectory("base", one);
      out.text("spectrum.json", to_json(sp, c.size()).dump(2) + "\n");
      out.text("eigenvalues.csv", series_csv("index,eigenvalue", {idx, sp.eigenvalues}));
      out.text("eigenfunctions.csv", series_csv(ef, cols));
      out.text("trace.csv", trace_csv(trace));
      break;
    }
    case Scenario::GaugeResidual: {
      RunOptions o;
      o.output_interval = config.output_interval;
      const FlowTrajectory base = run_rmcf(initial_curve(config, 0), 0.0, *config.tau_end, config.step, o);
      const FlowTrajectory target = run_rmcf(initial_curve(config, 1), 0.0, *config.tau_end, config.step, o);
      MonitorOptions mo;
      mo.fit_window = config.fit_window;
      mo.scheme = scheme;
      mo.lambda_stride = config.lambda_stride;
      const FrequencyTrace trace = monitor(base, target, mo);
      nlohmann::json reports = nlohmann::json::array();
      double max_c = 0.0, max_q = 0.0;
      for (size_t j = 1; j + 1 < base.size(); ++j) {
        const ResidualReport r = residual(base, target, base[j].time);
        max_c = std::max(max_c, r.fitted_c);
        max_q = std::max(max_q, r.quad_ratio);
        reports.push_back(to_json(r));
      }
      summary = summary_json(trace, std::nullopt);
      summary["maxFittedC"] = max_c;
      summary["maxQuadRatio"] = max_q;
      summary["chainOk"] = trace.chain_ok;
      summary["rayleighOk"] = trace.rayleigh_ok;
      out.trajectory("base", base);
      out.trajectory("target", target);
      out.text("residuals.json", reports.dump(2) + "\n");
      out.text("trace.csv", trace_csv(trace));
      break;
    }
    case Scenario::Separation: {
      const SeparationReport rep = experiment_separation(config);
      summary = summary_json(rep.trace, std::nullopt);
      summary["tauSwitch"] = rep.tau_switch;
      summary["dHSlope"] = num(rep.dH_slope);
      summary["logIHalfSlope"] = num(-rep.lambda_fit / 2.0);
      summary["slopesMatch"] = std::isfinite(rep.dH_slope) && std::isfinite(rep.lambda_fit) &&
                               std::abs(rep.dH_slope + rep.lambda_fit / 2.0) <= 0.3;
      summary["Ulate"] = num(rep.U_late);
      summary["dHCollapse"] = rep.dH_collapse;
      summary["logICollapse"] = rep.trace.collapse;
      summary["underflow"] = rep.I_underflow;
      summary["chainOk"] = rep.trace.chain_ok;
      summary["rayleighOk"] = rep.trace.rayleigh_ok;
      summary["verdict"] = to_string(rep.verdict);
      nlohmann::json sing = nlohmann::json::array();
      for (const auto& e : rep.singular) sing.push_back(singular_json(e));
      summary["singularData"] = sing;
      manifest_extra["singularData"] = sing;
      for (size_t i = 0; i < 2; ++i) {
        out.trajectory("mcf" + std::to_string(i + 1), rep.mcf[i]);
        out.trajectory("rmcf" + std::to_string(i + 1), rep.rmcf[i]);
      }
      out.text("separation.csv", series_csv("tau,dH", {rep.tau, rep.dH}));
      out.text("trace.csv", trace_csv(rep.trace));
      if (rep.verdict == Verdict::SuperexponentialFlagged) result.exit_code = 2;
      break;
    }
    case Scenario::Rate: {
      const RateReport rep = experiment_rate(config);
      const FrequencyTrace trace = flow_trace(rep.rmcf, scheme);
      std::optional<double> theta;
      if (rep.lojasiewicz) theta = rep.lojasiewicz->theta;
      summary = summary_json(trace, theta);
      summary["status"] = rep.status == LojasiewiczStatus::ExactShrinker ? "exact-shrinker" : "fitted";
      summary["tauSwitch"] = rep.tau_switch;
      summary["dHSlope"] = num(rep.dH_slope);
      summary["phiSlope"] = num(rep.phi_slope);
      summary["dominantMode"] = rep.dominant_mode;
      summary["predictedSlope"] = num(rep.predicted_slope);
      if (rep.lojasiewicz) {
        summary["phiIntegral"] = rep.lojasiewicz->partial_sums.back();
        summary["lojasiewiczBoundHolds"] =
            std::all_of(rep.lojasiewicz->bound_holds.begin(), rep.lojasiewicz->bound_holds.end(),
                        [](bool b) { return b; });
      }
      summary["singularData"] = singular_json(rep.singular);
      manifest_extra["singularData"] = singular_json(rep.singular);
      out.trajectory("mcf", rep.mcf);
      out.trajectory("rmcf", rep.rmcf);
      out.text("rate.csv", series_csv("tau,dH,phiL2", {rep.tau, rep.dH, rep.phi_norm}));
      out.text("trace.csv", trace_csv(trace));
      break;
    }
  }

  summary["scenario"] = to_string(config.scenario);
  out.text("summary.json", summary.dump(2) + "\n");

  nlohmann::json manifest;
  manifest["version"] = version_string();
  manifest["scenario"] = to_string(config.scenario);
  const std::string canon = canonical_config(config);
  manifest["configHash"] = sha256_hex(canon);
  manifest["config"] = config.entries;
  manifest["libraries"] = libraries_json();
  nlohmann::json files = nlohmann::json::array();
  for (const auto& rel : out.files) {
    const std::string bytes = read_text(out_dir / rel);
    files.push_back({{"path", rel.generic_string()}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }
  manifest["files"] = files;
  for (auto& [k, v] : manifest_extra.items()) manifest[k] = v;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

  result.summary = summary;
  result.files = out.files;
  result.files.push_back("manifest.json");
  return result;
}

}  // namespace shrinkerlab
