#include "shrinkerlab/flowcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "shrinkerlab/errors.hpp"

namespace shrinkerlab {

namespace {

constexpr double kPi = std::numbers::pi;
// Metric-speed nonuniformity that triggers a full spectral resample.
constexpr double kResampleThreshold = 1e-3;
constexpr double kMaxSpacingRatio = 10.0;

struct Velocity {
  ComplexField v;
  double max_abs_curvature = 0.0;
  double g_min = 0.0;
  double g_max = 0.0;
};

// Normal velocity (H or phi) along the inner normal plus the tangential
// velocity alpha solving d(alpha)/d(theta) = kappa V g - <kappa V> g + omega (g_mean - g),
// which keeps |dx/dtheta| uniform in theta.
Velocity flow_velocity(const ComplexField& z, Picture picture, const StepControl& ctl) {
  const int m = static_cast<int>(z.size());
  ComplexField dz, ddz;
  if (ctl.scheme == DiffScheme::Spectral) {
    const ComplexField zh = fft(z);
    ComplexField a(m), b(m);
    for (int j = 0; j < m; ++j) {
      const double k = wavenumber(j, m);
      a[j] = (2 * j == m) ? Complex(0.0) : Complex(-k * zh[j].imag(), k * zh[j].real());
      b[j] = zh[j] * (-k * k);
    }
    dz = ifft(a);
    ddz = ifft(b);
  } else {
    dz = d1(z, ctl.scheme);
    ddz = d2(z, ctl.scheme);
  }

  Field g(m), kappa(m), normal_speed(m), tx(m), ty(m);
  double max_k = 0.0, sum_kvg = 0.0, sum_g = 0.0, sum_k2 = 0.0;
  double g_min = std::numeric_limits<double>::infinity(), g_max = 0.0;
  for (int j = 0; j < m; ++j) {
    const double xr = dz[j].real(), xi = dz[j].imag();
    const double gj = std::sqrt(xr * xr + xi * xi);
    if (!(gj > 1e-10)) throw DegenerateCurve("metric speed vanished at node " + std::to_string(j));
    const double k = (xr * ddz[j].imag() - xi * ddz[j].real()) / (gj * gj * gj);
    const double t_x = xr / gj, t_y = xi / gj;
    double v = k;
    // <x, nu> with nu = i t = (-t_y, t_x).
    if (picture == Picture::RMCF) v += 0.5 * (-z[j].real() * t_y + z[j].imag() * t_x);
    g[j] = gj;
    kappa[j] = k;
    normal_speed[j] = v;
    tx[j] = t_x;
    ty[j] = t_y;
    max_k = std::max(max_k, std::abs(k));
    g_min = std::min(g_min, gj);
    g_max = std::max(g_max, gj);
    sum_kvg += k * v * gj;
    sum_g += gj;
    sum_k2 += k * k * gj;
  }
  const double mean_kv = sum_kvg / sum_g;
  const double g_mean = sum_g / m;
  const double omega = ctl.relaxation * sum_k2 / sum_g;
  Field f(m);
  for (int j = 0; j < m; ++j)
    f[j] = kappa[j] * normal_speed[j] * g[j] - mean_kv * g[j] + omega * (g_mean - g[j]);
  const Field alpha = antiderivative(f);

  Velocity out;
  out.v.resize(m);
  // alpha t + V nu
  for (int j = 0; j < m; ++j)
    out.v[j] = Complex(alpha[j] * tx[j] - normal_speed[j] * ty[j], alpha[j] * ty[j] + normal_speed[j] * tx[j]);
  out.max_abs_curvature = max_k;
  out.g_min = g_min;
  out.g_max = g_max;
  return out;
}

// Exponential filter exp(-36 (|k|/(m/2))^36) on the position spectrum. The
// tangential relaxation cannot act on the Nyquist oscillation of g (the
// spectral antiderivative drops it), so the modes feeding it are removed here;
// modes with |k| < m/4 change by less than 1e-9 relative.
ComplexField filter_high_modes(const ComplexField& z) {
  const int m = static_cast<int>(z.size());
  thread_local std::map<int, Field> cache;
  Field& sigma = cache[m];
  if (sigma.size() != m) {
    sigma.resize(m);
    for (int j = 0; j < m; ++j) sigma[j] = std::exp(-36.0 * std::pow(std::abs(wavenumber(j, m)) / (0.5 * m), 36));
  }
  ComplexField zh = fft(z);
  for (int j = 0; j < m; ++j) zh[j] *= sigma[j];
  return ifft(zh);
}

double min_chord(const ComplexField& z) {
  const Eigen::Index m = z.size();
  double h2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < m; ++j) h2 = std::min(h2, std::norm(z[(j + 1) % m] - z[j]));
  return std::sqrt(h2);
}

double cfl_bound(const ComplexField& z, double cfl) {
  const double h = min_chord(z);
  return cfl * h * h * 2.0 / (kPi * kPi);
}

double polygon_area(const ComplexField& z) {
  const Eigen::Index m = z.size();
  double s = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) s += (std::conj(z[j]) * z[(j + 1) % m]).imag();
  return 0.5 * s;
}

// Same quadratures as area_centroid and enclosed_area, sharing one derivative.
ComplexField align_nodes(const ComplexField& z) {
  const ComplexField dz = d1(z);
  double sx = 0.0, sy = 0.0, twice_area = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double x = z[j].real(), y = z[j].imag();
    sx += x * x * dz[j].imag();
    sy -= y * y * dz[j].real();
    twice_area += x * dz[j].imag() - y * dz[j].real();
  }
  const Complex centre(sx / twice_area, sy / twice_area);
  const double area = 0.5 * twice_area * 2.0 * kPi / static_cast<double>(z.size());
  const double scale = std::sqrt(2.0 * kPi / area);
  return scale * (z.array() - centre).matrix();
}

// One Heun step on raw nodes. Per-step validity is the cheap part of the
// DiscreteCurve invariants (finite nodes, metric-speed ratio); the O(m^2)
// simplicity test is left to frame emission.
ComplexField step_nodes(const ComplexField& z_in, Picture picture, const StepControl& ctl, double dt) {
  if (dt < 0.0) throw StepRejected("negative step size");
  if (dt == 0.0) return z_in;
  // A CFL-violating request (beyond cfl = 1) is rejected so the caller can halve it.
  if (dt > cfl_bound(z_in, 1.0) * (1.0 + 1e-12))
    throw StepRejected("step " + std::to_string(dt) + " exceeds the explicit stability bound");

  ComplexField z0 = z_in;
  Velocity k1 = flow_velocity(z0, picture, ctl);
  if (k1.max_abs_curvature > ctl.max_curvature)
    throw BlowupDetected("max |H| = " + std::to_string(k1.max_abs_curvature));
  if (k1.g_max / k1.g_min - 1.0 > kResampleThreshold) {
    try {
      z0 = resample(DiscreteCurve::from_complex(z0, false), static_cast<int>(z0.size())).as_complex();
    } catch (const InterpolationFailure& e) {
      throw StepRejected(e.what());
    }
    k1 = flow_velocity(z0, picture, ctl);
  }
  const ComplexField z1 = z0 + dt * k1.v;
  const Velocity k2 = flow_velocity(z1, picture, ctl);
  if (k2.g_max / k2.g_min > kMaxSpacingRatio) throw StepRejected("node spacing degenerated");
  ComplexField z2 = z0 + (0.5 * dt) * (k1.v + k2.v);
  if (ctl.scheme == DiffScheme::Spectral) z2 = filter_high_modes(z2);

  for (Eigen::Index j = 0; j < z2.size(); ++j)
    if (!std::isfinite(z2[j].real()) || !std::isfinite(z2[j].imag()))
      throw StepRejected("non-finite node after step");
  if (picture == Picture::MCF && !(polygon_area(z2) < polygon_area(z0)))
    throw StepRejected("enclosed area did not decrease");
  if (picture == Picture::RMCF && ctl.align) z2 = align_nodes(z2);
  return z2;
}

// Splits `remaining` into equal steps no larger than `bound`, avoiding a
// final sliver step whose effect is below rounding.
double equal_substep(double remaining, double bound) {
  if (remaining <= bound) return remaining;
  return remaining / std::ceil(remaining / bound);
}

bool is_convex(const DiscreteCurve& curve, DiffScheme scheme) {
  return geometry(curve, scheme).curvature.minCoeff() > 0.0;
}

// Step with halving on rejection; returns the step actually taken.
ComplexField robust_step(const ComplexField& z, Picture picture, const StepControl& ctl, double want,
                         double& taken) {
  double dt = want;
  for (int attempt = 0; attempt < 12; ++attempt) {
    try {
      ComplexField next = step_nodes(z, picture, ctl, dt);
      taken = dt;
      return next;
    } catch (const StepRejected&) {
      if (attempt == 11) throw;
      dt *= 0.5;
    }
  }
  throw StepRejected("unreachable");
}

DiscreteCurve to_frame_curve(const ComplexField& z) {
  try {
    return DiscreteCurve::from_complex(z, true);
  } catch (const InvalidCurve& e) {
    throw StepRejected(e.what());
  }
}

FlowTrajectory run_flow(const DiscreteCurve& initial, Picture picture, double t_start, double t_end,
                        const StepControl& ctl, const RunOptions& opts) {
  if (!(opts.output_interval > 0.0)) throw std::invalid_argument("output_interval must be positive");
  if (!(t_end >= t_start)) throw std::invalid_argument("end time precedes start time");
  FlowTrajectory traj(picture);
  const DiscreteCurve first = (picture == Picture::RMCF && ctl.align) ? align_to_shrinker_gauge(initial) : initial;
  traj.append(t_start, first);
  const bool convex = opts.check_convexity && is_convex(first, ctl.scheme);
  ComplexField z = first.as_complex();
  const double area0 = polygon_area(z);

  double t = t_start;
  long frame_index = 1;
  double next_output = std::min(t_start + opts.output_interval, t_end);
  long steps = 0;
  while (t < t_end) {
    if (++steps > opts.max_steps) throw StepRejected("step budget exhausted");
    const double bound = ctl.dt.value_or(cfl_bound(z, ctl.cfl));
    const double want = equal_substep(next_output - t, bound);
    const bool lands = want == next_output - t;
    double taken = 0.0;
    z = robust_step(z, picture, ctl, want, taken);
    const bool reached = lands && taken == want;
    t = reached ? next_output : t + taken;

    const bool stop_area = picture == Picture::MCF && opts.stop_area_fraction > 0.0 &&
                           polygon_area(z) <= opts.stop_area_fraction * area0;
    if (reached || stop_area) {
      DiscreteCurve checked = to_frame_curve(z);
      if (convex && !is_convex(checked, ctl.scheme))
        throw StepRejected("convexity lost at time " + std::to_string(t));
      traj.append(t, std::move(checked));
      if (stop_area) break;
      ++frame_index;
      next_output = std::min(t_start + static_cast<double>(frame_index) * opts.output_interval, t_end);
    }
  }
  if (picture == Picture::MCF && !traj.area_strictly_decreasing())
    throw StepRejected("MCF area law violated across frames");
  return traj;
}

DiscreteCurve heun_step(const DiscreteCurve& curve, Picture picture, const StepControl& ctl) {
  const double dt = ctl.dt.value_or(stable_step(curve, ctl));
  if (dt == 0.0) return curve;
  const ComplexField z = step_nodes(curve.as_complex(), picture, ctl, dt);
  try {
    return DiscreteCurve::from_complex(z, false);
  } catch (const InvalidCurve& e) {
    throw StepRejected(e.what());
  }
}

}  // namespace

const char* to_string(Picture picture) { return picture == Picture::MCF ? "MCF" : "RMCF"; }

void FlowTrajectory::append(double time, DiscreteCurve curve) {
  if (!frames_.empty()) {
    if (!(time > frames_.back().time))
      throw std::invalid_argument("frame times must strictly increase");
    if (curve.size() != node_count()) throw std::invalid_argument("all frames must share m");
  }
  frames_.push_back(Frame{time, std::move(curve)});
}

std::vector<double> FlowTrajectory::times() const {
  std::vector<double> t;
  t.reserve(frames_.size());
  for (const auto& f : frames_) t.push_back(f.time);
  return t;
}

std::optional<size_t> FlowTrajectory::find(double time, double tol) const {
  auto it = std::lower_bound(frames_.begin(), frames_.end(), time - tol,
                             [](const Frame& f, double t) { return f.time < t; });
  if (it != frames_.end() && std::abs(it->time - time) <= tol)
    return static_cast<size_t>(it - frames_.begin());
  return std::nullopt;
}

bool FlowTrajectory::area_strictly_decreasing() const {
  for (size_t j = 1; j < frames_.size(); ++j)
    if (!(enclosed_area(frames_[j].curve) < enclosed_area(frames_[j - 1].curve))) return false;
  return true;
}

double stable_step(const DiscreteCurve& curve, const StepControl& ctl) {
  const double h = min_spacing(curve.points());
  return ctl.cfl * h * h * 2.0 / (kPi * kPi);
}

DiscreteCurve mcf_step(const DiscreteCurve& curve, const StepControl& ctl) {
  return heun_step(curve, Picture::MCF, ctl);
}

DiscreteCurve rmcf_step(const DiscreteCurve& curve, const StepControl& ctl) {
  return heun_step(curve, Picture::RMCF, ctl);
}

DiscreteCurve align_to_shrinker_gauge(const DiscreteCurve& curve) {
  return DiscreteCurve::from_complex(align_nodes(curve.as_complex()), false);
}

FlowTrajectory run_mcf(const DiscreteCurve& initial, double t_start, double t_end, const StepControl& ctl,
                       const RunOptions& opts) {
  return run_flow(initial, Picture::MCF, t_start, t_end, ctl, opts);
}

FlowTrajectory run_rmcf(const DiscreteCurve& initial, double tau_start, double tau_end,
                        const StepControl& ctl, const RunOptions& opts) {
  return run_flow(initial, Picture::RMCF, tau_start, tau_end, ctl, opts);
}

DiscreteCurve advance_mcf(const DiscreteCurve& curve, double duration, const StepControl& ctl) {
  if (duration < 0.0) throw std::invalid_argument("negative duration");
  ComplexField z = curve.as_complex();
  double done = 0.0;
  while (done < duration) {
    const double bound = ctl.dt.value_or(cfl_bound(z, ctl.cfl));
    const double remaining = duration - done;
    const double want = equal_substep(remaining, bound);
    const bool last = want == remaining;
    double taken = 0.0;
    z = robust_step(z, Picture::MCF, ctl, want, taken);
    done = (last && taken == want) ? duration : done + taken;
  }
  return to_frame_curve(z);
}

SingularityEstimate estimate_singularity(const FlowTrajectory& traj, double window_fraction) {
  if (traj.picture() != Picture::MCF) throw std::invalid_argument("estimate_singularity needs an MCF trajectory");
  const size_t n = traj.size();
  if (n < 3) throw NotShrinking("need at least 3 frames");
  const size_t used = std::clamp<size_t>(static_cast<size_t>(std::ceil(window_fraction * n)), 3, n);
  const size_t first = n - used;

  std::vector<double> t(used), area(used), Tj(used);
  std::vector<Vec2> cent(used);
  for (size_t i = 0; i < used; ++i) {
    const Frame& f = traj[first + i];
    t[i] = f.time;
    area[i] = enclosed_area(f.curve);
    cent[i] = area_centroid(f.curve);
    Tj[i] = t[i] + area[i] / (2.0 * kPi);
  }

  // Least-squares line through (t, A).
  auto fit_line = [&](const std::vector<double>& y, double& slope, double& icept) {
    double mt = 0.0, my = 0.0;
    for (size_t i = 0; i < used; ++i) {
      mt += t[i];
      my += y[i];
    }
    mt /= used;
    my /= used;
    double sxy = 0.0, sxx = 0.0;
    for (size_t i = 0; i < used; ++i) {
      sxy += (t[i] - mt) * (y[i] - my);
      sxx += (t[i] - mt) * (t[i] - mt);
    }
    slope = sxx > 0.0 ? sxy / sxx : 0.0;
    icept = my - slope * mt;
  };

  double rate = 0.0, a0 = 0.0;
  fit_line(area, rate, a0);
  if (!(std::abs(rate + 2.0 * kPi) <= 0.05 * 2.0 * kPi))
    throw NotShrinking("fitted dA/dt = " + std::to_string(rate) + ", expected -2 pi within 5%");

  SingularityEstimate est;
  est.frames_used = used;
  est.area_rate = rate;
  double mean_T = 0.0;
  for (double v : Tj) mean_T += v;
  mean_T /= used;
  double var = 0.0;
  for (double v : Tj) var += (v - mean_T) * (v - mean_T);
  est.T = mean_T;
  est.T_error = std::max(std::sqrt(var / used), std::abs(-a0 / rate - mean_T));

  std::vector<double> cx(used), cy(used);
  for (size_t i = 0; i < used; ++i) {
    cx[i] = cent[i].x();
    cy[i] = cent[i].y();
  }
  double sx = 0.0, ix = 0.0, sy = 0.0, iy = 0.0;
  fit_line(cx, sx, ix);
  fit_line(cy, sy, iy);
  est.x0 = Vec2(ix + sx * est.T, iy + sy * est.T);
  double res = 0.0;
  for (size_t i = 0; i < used; ++i)
    res = std::max(res, (Vec2(ix + sx * t[i], iy + sy * t[i]) - cent[i]).norm());
  est.x0_error = res;
  return est;
}

FlowTrajectory rescale_to_rmcf(const FlowTrajectory& traj, double T, const Vec2& x0) {
  if (traj.picture() != Picture::MCF) throw std::invalid_argument("rescale_to_rmcf needs an MCF trajectory");
  FlowTrajectory out(Picture::RMCF);
  for (const auto& f : traj.frames()) {
    const double remaining = T - f.time;
    if (!(remaining > 0.0))
      throw TimeOutOfRange("frame time " + std::to_string(f.time) + " is not before T = " + std::to_string(T));
    const double scale = 1.0 / std::sqrt(remaining);
    std::vector<Vec2> pts = f.curve.points();
    for (auto& p : pts) p = scale * (p - x0);
    out.append(-std::log(remaining), DiscreteCurve::trusted(std::move(pts)));
  }
  out.set_singular_data({T, x0});
  return out;
}

FlowTrajectory rescale_to_mcf(const FlowTrajectory& traj, double T, const Vec2& x0) {
  if (traj.picture() != Picture::RMCF) throw std::invalid_argument("rescale_to_mcf needs an RMCF trajectory");
  FlowTrajectory out(Picture::MCF);
  for (const auto& f : traj.frames()) {
    const double remaining = std::exp(-f.time);
    const double scale = std::sqrt(remaining);
    std::vector<Vec2> pts = f.curve.points();
    for (auto& p : pts) p = x0 + scale * p;
    out.append(T - remaining, DiscreteCurve::trusted(std::move(pts)));
  }
  out.set_singular_data({T, x0});
  return out;
}

}  // namespace shrinkerlab
