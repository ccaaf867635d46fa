#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "shrinkerlab/curvegeo.hpp"

namespace shrinkerlab {

enum class Picture { MCF, RMCF };

const char* to_string(Picture picture);

/// Singular time and point (T, x0) of an MCF.
struct SingularData {
  double T = 0.0;
  Vec2 x0 = Vec2::Zero();
};

struct Frame {
  double time;
  DiscreteCurve curve;
};

/// Time-ordered frames of one flow, all with the same node count.
/// Frames are immutable once appended.
class FlowTrajectory {
 public:
  explicit FlowTrajectory(Picture picture) : picture_(picture) {}

  /// Throws std::invalid_argument if time does not increase or m changes.
  void append(double time, DiscreteCurve curve);

  Picture picture() const { return picture_; }
  const std::vector<Frame>& frames() const { return frames_; }
  size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  const Frame& operator[](size_t j) const { return frames_[j]; }
  const Frame& back() const { return frames_.back(); }
  int node_count() const { return frames_.empty() ? 0 : frames_.front().curve.size(); }
  std::vector<double> times() const;

  /// Index of the frame stamped `time` (within tol), if any.
  std::optional<size_t> find(double time, double tol = 1e-9) const;

  const std::optional<SingularData>& singular_data() const { return singular_; }
  void set_singular_data(const SingularData& data) { singular_ = data; }

  /// True when enclosed area strictly decreases from frame to frame (the MCF
  /// area law); integrators assert this on every MCF run.
  bool area_strictly_decreasing() const;

 private:
  Picture picture_;
  std::vector<Frame> frames_;
  std::optional<SingularData> singular_;
};

struct StepControl {
  /// Explicit step size; when empty the CFL step is used.
  std::optional<double> dt;
  double cfl = 0.5;
  /// BlowupDetected once max |H| exceeds this.
  double max_curvature = 1e8;
  /// RMCF only: after each step translate the area centroid to the origin and
  /// dilate to enclosed area 2 pi (the exact area of the rescaled flow when
  /// (T, x0) are the true singular data). Suppresses the unstable k = 0, 1 modes.
  bool align = false;
  /// Strength of the tangential relaxation toward uniform node spacing, in
  /// units of the mean squared curvature.
  double relaxation = 5.0;
  DiffScheme scheme = DiffScheme::Spectral;
};

/// CFL bound cfl * h^2 * 2 / pi^2 with h the smallest chord.
double stable_step(const DiscreteCurve& curve, const StepControl& ctl);

/// One Heun (RK2) step of curve shortening flow: normal velocity H nu plus the
/// tangential velocity that keeps nodes arclength-uniform.
DiscreteCurve mcf_step(const DiscreteCurve& curve, const StepControl& ctl);

/// One Heun step of the rescaled flow, normal velocity phi nu = (H + <x,nu>/2) nu.
DiscreteCurve rmcf_step(const DiscreteCurve& curve, const StepControl& ctl);

/// Translate the area centroid to the origin and scale to area 2 pi.
DiscreteCurve align_to_shrinker_gauge(const DiscreteCurve& curve);

struct RunOptions {
  double output_interval = 0.05;
  /// MCF only: stop once the enclosed area falls below this fraction of the
  /// initial area (0 disables).
  double stop_area_fraction = 0.0;
  /// Assert positive curvature on every frame when the initial curve is convex.
  bool check_convexity = true;
  long max_steps = 100'000'000;
};

FlowTrajectory run_mcf(const DiscreteCurve& initial, double t_start, double t_end,
                       const StepControl& ctl, const RunOptions& opts);

FlowTrajectory run_rmcf(const DiscreteCurve& initial, double tau_start, double tau_end,
                        const StepControl& ctl, const RunOptions& opts);

/// Integrate MCF for exactly `duration` (last step clipped).
DiscreteCurve advance_mcf(const DiscreteCurve& curve, double duration, const StepControl& ctl);

struct SingularityEstimate {
  double T = 0.0;
  double T_error = 0.0;
  Vec2 x0 = Vec2::Zero();
  double x0_error = 0.0;
  double area_rate = 0.0;  // fitted dA/dt over the window
  size_t frames_used = 0;
};

/// Extinction time from the area law A(t) = A(t1) - 2 pi (t - t1) and the
/// singular point by extrapolating the area centroid to T, both over the last
/// `window_fraction` of frames. Throws NotShrinking when the fitted dA/dt is
/// not within 5% of -2 pi.
SingularityEstimate estimate_singularity(const FlowTrajectory& traj, double window_fraction = 0.4);

/// N_tau = e^{tau/2} (M_t - x0), tau = -log(T - t). Exact up to rounding.
FlowTrajectory rescale_to_rmcf(const FlowTrajectory& traj, double T, const Vec2& x0);

/// Inverse of rescale_to_rmcf.
FlowTrajectory rescale_to_mcf(const FlowTrajectory& traj, double T, const Vec2& x0);

}  // namespace shrinkerlab
