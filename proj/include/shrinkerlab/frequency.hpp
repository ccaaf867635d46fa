#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shrinkerlab/curvegeo.hpp"
#include "shrinkerlab/flowcore.hpp"
#include "shrinkerlab/gauge.hpp"
#include "shrinkerlab/spectral.hpp"

namespace shrinkerlab {

/// I below this is treated as zero (flagged, never divided by).
inline constexpr double kEnergyFloor = 1e-14;

/// I = int u^2 dmu
double energy_I(const DiscreteCurve& base, const Field& u, DiffScheme scheme = DiffScheme::Spectral);

/// U = 2 form(u, u) / I, on the same discretisation as the spectral module.
/// Throws EnergyUnderflow if I <= kEnergyFloor.
double frequency_U(const DiscreteCurve& base, const Field& u, DiffScheme scheme = DiffScheme::Spectral);

/// int phi^2 dmu
double dirichlet_einstein(const DiscreteCurve& curve, DiffScheme scheme = DiffScheme::Spectral);

/// Components of D at one frame; `total` is their sum.
struct DCoefficient {
  double metric = 0.0;          // ||2 phi H||
  double curvature_rate = 0.0;  // ||2 H phi_ss + 2 phi H^3||
  double phi = 0.0;             // ||phi||
  double phi_rate = 0.0;        // ||d phi / d tau|| along normals
  double total = 0.0;
};

/// D at frame `index`, with d phi/d tau from the neighbouring frames (central
/// difference, corrected for tangential node motion). Throws FrameMissing at
/// the ends of the trajectory.
DCoefficient d_coefficient(const FlowTrajectory& traj, size_t index, DiffScheme scheme = DiffScheme::Spectral);
DCoefficient d_coefficient(const FlowTrajectory& traj, double tau, DiffScheme scheme = DiffScheme::Spectral);

enum class LojasiewiczStatus { Fitted, ExactShrinker };

struct LojasiewiczFit {
  LojasiewiczStatus status = LojasiewiczStatus::Fitted;
  double theta = 0.0;
  double tau0 = 0.0;             // start of the fit window
  std::vector<double> tau;
  std::vector<double> gap;       // |F - F_limit|
  std::vector<double> phi_norm;  // ||phi||_{L^2(dmu)}
  std::vector<double> partial_sums;  // int_0^tau ||phi|| (trapezoid)
  /// gap^(1 - theta) <= ||phi|| frame by frame (inside the fit window).
  std::vector<bool> bound_holds;
};

/// theta = 1 - slope of log ||phi|| against log |F - F_limit| over the last
/// `window_fraction` of frames; frames with |F - F_limit| <= 1e-11 (rounding
/// level) are not usable. Throws WindowTooShort below 20 usable frames.
LojasiewiczFit lojasiewicz_fit(const FlowTrajectory& traj, double F_limit, double window_fraction = 0.4,
                               DiffScheme scheme = DiffScheme::Spectral);

struct FrequencyRecord {
  double tau = 0.0;
  double I = 0.0;
  double U = 0.0;
  double Itilde = 0.0;
  double F = 0.0;
  double dFdtau = 0.0;
  double phiL2 = 0.0;
  double D = 0.0;
  double fittedC = 0.0;
  double dlogI = 0.0;
  double Vmain = 0.0;
  double Verr = 0.0;
  bool underflow = false;
  // Diagnostics (interior frames only; NaN elsewhere).
  double dUdtau = 0.0;            // central difference of U
  double measure_term = 0.0;      // int phi^2 u^2 / I
  double gradient_ratio = 0.0;    // int |grad u|^2 / I
  double chain_gap = 0.0;         // |dlogI - (U - measure_term)|
  double chain_bound = 0.0;       // 3 (C + D) + C gradient_ratio
  double U_lower_envelope = 0.0;  // min of U up to this record
};

struct MonitorOptions {
  double fit_window = 0.4;
  TargetModel target_model = TargetModel::Spectral;
  DiffScheme scheme = DiffScheme::Spectral;
  /// Rayleigh bound: computed on every `lambda_stride`-th base frame unless given.
  std::optional<double> Lambda;
  int lambda_stride = 1;
  double rayleigh_tol = 1e-10;
};

struct FrequencyTrace {
  std::vector<FrequencyRecord> records;
  double Lambda = 0.0;
  double lambda_fit = 0.0;   // log I >= -lambda tau - offset over the fit window
  double offset_fit = 0.0;
  double U_inf = 0.0;        // minimum U over non-underflow records
  double integral_D = 0.0;
  double integral_C2 = 0.0;
  bool chain_ok = true;      // log-derivative inequality held on every interior frame
  bool rayleigh_ok = true;   // U <= 2 Lambda + tol on every frame
  bool collapse = false;     // super-exponential collapse of log I detected
  bool all_underflow = false;
};

/// Frame-by-frame monitor of u = graph of the target over the base. Both
/// trajectories must share their tau grid.
FrequencyTrace monitor(const FlowTrajectory& base_traj, const FlowTrajectory& target_traj,
                       const MonitorOptions& opts = {});

/// Per-frame flow quantities (F, dF/dtau, Itilde, phiL2, D) of a single
/// trajectory, with u = 0: every record is flagged as underflow.
FrequencyTrace flow_trace(const FlowTrajectory& traj, DiffScheme scheme = DiffScheme::Spectral);

/// Least-squares slope and intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// True when the late slope of y(tau) (second half of the window) falls below
/// the early slope by more than max(0.3, |early|/2): increments diverging
/// below a linear envelope.
bool superexponential_collapse(const std::vector<double>& tau, const std::vector<double>& y);

/// CSV with header tau,I,U,Itilde,F,dFdtau,phiL2,D,fittedC,dlogI,Vmain,Verr,underflow
std::string trace_csv(const FrequencyTrace& trace);

/// {lambdaFit, offsetFit, Uinf, Lambda, thetaFit, integralD, integralC2}
nlohmann::json summary_json(const FrequencyTrace& trace, std::optional<double> theta_fit);

}  // namespace shrinkerlab
