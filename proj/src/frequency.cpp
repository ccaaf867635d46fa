#include "shrinkerlab/frequency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shrinkerlab/errors.hpp"
#include "shrinkerlab/io.hpp"

namespace shrinkerlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// |F - F_limit| below this is rounding in F (about 1e4 ulp of F ~ 1.5).
constexpr double kGapFloor = 1e-11;

// Derivative at `at` of the quadratic through (t[i], f[i]), i = 0..2.
double lagrange_derivative(const double t[3], const double f[3], double at) {
  double out = 0.0;
  for (int i = 0; i < 3; ++i) {
    const int a = (i + 1) % 3, b = (i + 2) % 3;
    const double denom = (t[i] - t[a]) * (t[i] - t[b]);
    out += f[i] * ((at - t[a]) + (at - t[b])) / denom;
  }
  return out;
}

// Second-order derivative of a sampled series at every index (one-sided at the ends).
std::vector<double> series_derivative(const std::vector<double>& t, const std::vector<double>& f) {
  const size_t n = t.size();
  std::vector<double> out(n, kNaN);
  if (n < 3) return out;
  for (size_t j = 0; j < n; ++j) {
    const size_t c = std::clamp<size_t>(j, 1, n - 2);
    const double tt[3] = {t[c - 1], t[c], t[c + 1]};
    const double ff[3] = {f[c - 1], f[c], f[c + 1]};
    out[j] = lagrange_derivative(tt, ff, t[j]);
  }
  return out;
}

double sup_norm(const Field& f) { return f.size() == 0 ? 0.0 : f.cwiseAbs().maxCoeff(); }

Field arclength_derivative(const Field& f, const Field& g, DiffScheme scheme) {
  return d1(f, scheme).cwiseQuotient(g);
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
  double s = 0.0;
  for (size_t j = 1; j < t.size(); ++j) s += 0.5 * (f[j] + f[j - 1]) * (t[j] - t[j - 1]);
  return s;
}

}  // namespace

double energy_I(const DiscreteCurve& base, const Field& u, DiffScheme scheme) {
  const Field w = gaussian_weights(base, geometry(base, scheme));
  return (w.array() * u.array().square()).sum();
}

double frequency_U(const DiscreteCurve& base, const Field& u, DiffScheme scheme) {
  const DirichletForm form(base, scheme);
  const double I = (form.node_weights().array() * u.array().square()).sum();
  if (!(I > kEnergyFloor)) throw EnergyUnderflow("I = " + format_double(I) + " is at or below the floor");
  return 2.0 * form(u, u) / I;
}

double dirichlet_einstein(const DiscreteCurve& curve, DiffScheme scheme) {
  const GeometryFields geom = geometry(curve, scheme);
  const Field phi = shrinker_quantity(curve, geom);
  return (gaussian_weights(curve, geom).array() * phi.array().square()).sum();
}

DCoefficient d_coefficient(const FlowTrajectory& traj, size_t index, DiffScheme scheme) {
  if (index == 0 || index + 1 >= traj.size())
    throw FrameMissing("d_coefficient needs frames on both sides of index " + std::to_string(index));
  const DiscreteCurve& c = traj[index].curve;
  const DiscreteCurve& cm = traj[index - 1].curve;
  const DiscreteCurve& cp = traj[index + 1].curve;
  const GeometryFields geom = geometry(c, scheme);
  const Field& H = geom.curvature;
  const Field& g = geom.metric_speed;
  const Field phi = shrinker_quantity(c, geom);
  const Field phi_s = arclength_derivative(phi, g, scheme);
  const Field phi_ss = arclength_derivative(phi_s, g, scheme);
  const Field phi_m = shrinker_quantity(cm, scheme);
  const Field phi_p = shrinker_quantity(cp, scheme);

  const double tm = traj[index - 1].time, t0 = traj[index].time, tp = traj[index + 1].time;
  const int m = c.size();
  Field rate(m);
  for (int j = 0; j < m; ++j) {
    const double tt[3] = {tm, t0, tp};
    const double ff[3] = {phi_m[j], phi[j], phi_p[j]};
    const double alpha = (cp[j] - cm[j]).dot(geom.tangent[j]) / (tp - tm);
    rate[j] = lagrange_derivative(tt, ff, t0) - alpha * phi_s[j];
  }

  DCoefficient d;
  d.metric = sup_norm(2.0 * phi.cwiseProduct(H));
  d.curvature_rate = sup_norm((2.0 * H.array() * phi_ss.array() + 2.0 * phi.array() * H.array().cube()).matrix());
  d.phi = sup_norm(phi);
  d.phi_rate = sup_norm(rate);
  d.total = d.metric + d.curvature_rate + d.phi + d.phi_rate;
  return d;
}

DCoefficient d_coefficient(const FlowTrajectory& traj, double tau, DiffScheme scheme) {
  const auto j = traj.find(tau);
  if (!j) throw FrameMissing("no frame at tau = " + format_double(tau));
  return d_coefficient(traj, *j, scheme);
}

LojasiewiczFit lojasiewicz_fit(const FlowTrajectory& traj, double F_limit, double window_fraction,
                               DiffScheme scheme) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw std::invalid_argument("lojasiewicz_fit: window fraction must lie in (0, 1]");
  LojasiewiczFit fit;
  const size_t n = traj.size();
  std::vector<double> tau(n), gap(n), phi(n);
  for (size_t j = 0; j < n; ++j) {
    tau[j] = traj[j].time;
    gap[j] = std::abs(f_functional(traj[j].curve, scheme) - F_limit);
    phi[j] = std::sqrt(dirichlet_einstein(traj[j].curve, scheme));
  }
  std::vector<double> partial(n, 0.0);
  for (size_t j = 1; j < n; ++j) partial[j] = partial[j - 1] + 0.5 * (phi[j] + phi[j - 1]) * (tau[j] - tau[j - 1]);

  const size_t count = static_cast<size_t>(std::ceil(window_fraction * static_cast<double>(n)));
  const size_t start = n - std::min(count, n);
  fit.tau0 = n ? tau[start] : 0.0;
  fit.tau.assign(tau.begin() + start, tau.end());
  fit.gap.assign(gap.begin() + start, gap.end());
  fit.phi_norm.assign(phi.begin() + start, phi.end());
  fit.partial_sums = partial;

  const bool exact = n > 0 && std::all_of(phi.begin(), phi.end(), [](double p) { return p < 1e-10; }) &&
                     std::all_of(gap.begin(), gap.end(), [](double q) { return q < 1e-10; });
  if (exact) {
    fit.status = LojasiewiczStatus::ExactShrinker;
    fit.theta = kNaN;
    fit.bound_holds.assign(fit.tau.size(), true);
    return fit;
  }

  std::vector<double> lx, ly;
  for (size_t j = start; j < n; ++j) {
    if (gap[j] > kGapFloor && phi[j] > 0.0) {
      lx.push_back(std::log(gap[j]));
      ly.push_back(std::log(phi[j]));
    }
  }
  if (lx.size() < 20)
    throw WindowTooShort("Lojasiewicz fit window has " + std::to_string(lx.size()) + " usable frames, need 20");
  fit.theta = 1.0 - fit_line(lx, ly).slope;
  for (size_t k = 0; k < fit.tau.size(); ++k)
    fit.bound_holds.push_back(std::pow(fit.gap[k], 1.0 - fit.theta) <= fit.phi_norm[k]);
  return fit;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: abscissae coincide");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

bool superexponential_collapse(const std::vector<double>& tau, const std::vector<double>& y) {
  const size_t n = tau.size();
  if (n < 6) return false;
  const size_t h = n / 2;
  const std::vector<double> te(tau.begin(), tau.begin() + h + 1), ye(y.begin(), y.begin() + h + 1);
  const std::vector<double> tl(tau.begin() + h, tau.end()), yl(y.begin() + h, y.end());
  const double early = fit_line(te, ye).slope;
  const double late = fit_line(tl, yl).slope;
  return late < early - std::max(0.3, std::abs(early) / 2.0);
}

FrequencyTrace monitor(const FlowTrajectory& base_traj, const FlowTrajectory& target_traj,
                       const MonitorOptions& opts) {
  const DiffScheme scheme = opts.scheme;
  const size_t n = base_traj.size();
  if (n == 0) throw FrameMissing("base trajectory is empty");

  struct FrameData {
    GeometryFields geom;
    Field phi;
    Field u;
    Field du;  // d u / d s
    double I = 0.0;
    double Q = 0.0;
  };
  std::vector<FrameData> data(n);
  std::vector<double> tau(n), F(n);
  FrequencyTrace trace;
  trace.records.resize(n);

  for (size_t j = 0; j < n; ++j) {
    const DiscreteCurve& base = base_traj[j].curve;
    const auto k = target_traj.find(base_traj[j].time);
    if (!k) throw FrameMissing("target has no frame at tau = " + format_double(base_traj[j].time));
    const GraphFunction graph = normal_graph(base, target_traj[*k].curve, opts.target_model, scheme);
    FrameData& fd = data[j];
    fd.geom = geometry(base, scheme);
    fd.phi = shrinker_quantity(base, fd.geom);
    fd.u = graph.u;
    fd.du = graph.du;
    const Field w = gaussian_weights(base, fd.geom);
    fd.I = (w.array() * fd.u.array().square()).sum();
    tau[j] = base_traj[j].time;
    F[j] = f_functional(base, scheme);

    FrequencyRecord& rec = trace.records[j];
    rec.tau = tau[j];
    rec.I = fd.I;
    rec.F = F[j];
    rec.Itilde = (w.array() * fd.phi.array().square()).sum();
    rec.phiL2 = std::sqrt(rec.Itilde);
    rec.underflow = !(fd.I > kEnergyFloor);
    if (!rec.underflow) {
      const DirichletForm form(base, scheme);
      fd.Q = form(fd.u, fd.u);
      rec.U = 2.0 * fd.Q / fd.I;
    } else {
      rec.U = kNaN;
    }
    rec.D = rec.fittedC = rec.dlogI = rec.Vmain = rec.Verr = kNaN;
    rec.dUdtau = rec.measure_term = rec.gradient_ratio = rec.chain_gap = rec.chain_bound = kNaN;
  }

  const std::vector<double> dF = series_derivative(tau, F);
  for (size_t j = 0; j < n; ++j) trace.records[j].dFdtau = dF[j];

  for (size_t j = 1; j + 1 < n; ++j) {
    FrequencyRecord& rec = trace.records[j];
    const FrameData& fd = data[j];
    const DiscreteCurve& base = base_traj[j].curve;
    const double dt = 0.5 * (tau[j + 1] - tau[j - 1]);
    rec.D = d_coefficient(base_traj, j, scheme).total;

    const GraphFunction centre(base, fd.u, scheme);
    const Field w = normal_time_derivative(base_traj[j - 1].curve, base_traj[j + 1].curve, centre, data[j - 1].u,
                                           data[j + 1].u, dt, scheme);
    const Field r = w - apply_L(base, fd.u, scheme);
    double c = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      c = std::max(c, std::abs(r[i]) / (std::abs(fd.u[i]) + std::abs(fd.du[i]) + kResidualFloor));
    rec.fittedC = c;

    if (rec.underflow || trace.records[j - 1].underflow || trace.records[j + 1].underflow) continue;

    const double tt[3] = {tau[j - 1], tau[j], tau[j + 1]};
    const double lI[3] = {std::log(data[j - 1].I), std::log(fd.I), std::log(data[j + 1].I)};
    const double Us[3] = {trace.records[j - 1].U, rec.U, trace.records[j + 1].U};
    rec.dlogI = lagrange_derivative(tt, lI, tau[j]);
    rec.dUdtau = lagrange_derivative(tt, Us, tau[j]);

    const DirichletForm form(base, scheme);
    const Field& nw = form.node_weights();
    const Field& H = fd.geom.curvature;
    const Field& g = fd.geom.metric_speed;
    const Field phi_ss = arclength_derivative(arclength_derivative(fd.phi, g, scheme), g, scheme);
    const Field phi2 = fd.phi.cwiseAbs2();
    const Field u2 = fd.u.cwiseAbs2();
    const double I = fd.I, Q = fd.Q;
    const double uw = (nw.array() * fd.u.array() * w.array()).sum();
    const double M = (nw.array() * phi2.array() * u2.array()).sum();
    const double G = form.gradient_energy(fd.u);
    const double G_phiH = form.gradient_energy(fd.u, fd.phi.cwiseProduct(H));
    const double G_phi2 = form.gradient_energy(fd.u, phi2);
    const Field A2_rate = (2.0 * H.array() * phi_ss.array() + 2.0 * H.array().cube() * fd.phi.array()).matrix();
    const double A2_term = (nw.array() * A2_rate.array() * u2.array()).sum();
    const double VU_term = (nw.array() * phi2.array() * form.potential().array() * u2.array()).sum();

    rec.Vmain = 4.0 * form(fd.u, w) / I - 4.0 * uw * Q / (I * I);
    rec.Verr = 2.0 * (-2.0 * G_phiH + A2_term - (-G_phi2 + VU_term)) / I + 2.0 * Q * M / (I * I);
    rec.measure_term = M / I;
    rec.gradient_ratio = G / I;
    rec.chain_gap = std::abs(rec.dlogI - (rec.U - rec.measure_term));
    rec.chain_bound = 3.0 * (rec.fittedC + rec.D) + rec.fittedC * rec.gradient_ratio;
    // Rounding in the differences of log I.
    const double slack = 1e-8 * (1.0 + std::abs(rec.U));
    if (!(rec.chain_gap <= rec.chain_bound + slack)) trace.chain_ok = false;
  }

  if (opts.Lambda) {
    trace.Lambda = *opts.Lambda;
  } else {
    trace.Lambda = rayleigh_bound(base_traj, opts.lambda_stride, scheme).sup;
  }

  double running = std::numeric_limits<double>::infinity();
  trace.all_underflow = true;
  for (auto& rec : trace.records) {
    if (!rec.underflow) {
      trace.all_underflow = false;
      running = std::min(running, rec.U);
      if (!(rec.U <= 2.0 * trace.Lambda + opts.rayleigh_tol * std::max(1.0, std::abs(2.0 * trace.Lambda))))
        trace.rayleigh_ok = false;
    }
    rec.U_lower_envelope = std::isfinite(running) ? running : kNaN;
  }
  trace.U_inf = std::isfinite(running) ? running : kNaN;

  std::vector<double> ti, Di, C2i;
  for (size_t j = 1; j + 1 < n; ++j) {
    ti.push_back(tau[j]);
    Di.push_back(trace.records[j].D);
    C2i.push_back(trace.records[j].fittedC * trace.records[j].fittedC);
  }
  trace.integral_D = trapezoid(ti, Di);
  trace.integral_C2 = trapezoid(ti, C2i);

  const size_t count = static_cast<size_t>(std::ceil(opts.fit_window * static_cast<double>(n)));
  std::vector<double> wt, wl;
  for (size_t j = n - std::min(count, n); j < n; ++j) {
    if (trace.records[j].underflow) continue;
    wt.push_back(tau[j]);
    wl.push_back(std::log(trace.records[j].I));
  }
  if (wt.size() >= 2) {
    trace.lambda_fit = -fit_line(wt, wl).slope;
    double off = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < wt.size(); ++k) off = std::max(off, -trace.lambda_fit * wt[k] - wl[k]);
    trace.offset_fit = off;
    trace.collapse = superexponential_collapse(wt, wl);
  } else {
    trace.lambda_fit = trace.offset_fit = kNaN;
  }
  return trace;
}

FrequencyTrace flow_trace(const FlowTrajectory& traj, DiffScheme scheme) {
  const size_t n = traj.size();
  FrequencyTrace trace;
  trace.records.resize(n);
  std::vector<double> tau(n), F(n);
  for (size_t j = 0; j < n; ++j) {
    FrequencyRecord& rec = trace.records[j];
    const DiscreteCurve& c = traj[j].curve;
    const GeometryFields geom = geometry(c, scheme);
    const Field phi = shrinker_quantity(c, geom);
    tau[j] = rec.tau = traj[j].time;
    F[j] = rec.F = f_functional(c, scheme);
    rec.Itilde = (gaussian_weights(c, geom).array() * phi.array().square()).sum();
    rec.phiL2 = std::sqrt(rec.Itilde);
    rec.I = 0.0;
    rec.underflow = true;
    rec.U = rec.fittedC = rec.dlogI = rec.Vmain = rec.Verr = kNaN;
    rec.dUdtau = rec.measure_term = rec.gradient_ratio = rec.chain_gap = rec.chain_bound = kNaN;
    rec.U_lower_envelope = kNaN;
    rec.D = (j > 0 && j + 1 < n) ? d_coefficient(traj, j, scheme).total : kNaN;
  }
  const std::vector<double> dF = series_derivative(tau, F);
  std::vector<double> ti, Di;
  for (size_t j = 0; j < n; ++j) {
    trace.records[j].dFdtau = dF[j];
    if (j > 0 && j + 1 < n) {
      ti.push_back(tau[j]);
      Di.push_back(trace.records[j].D);
    }
  }
  trace.integral_D = trapezoid(ti, Di);
  trace.all_underflow = true;
  trace.Lambda = trace.lambda_fit = trace.offset_fit = trace.U_inf = kNaN;
  return trace;
}

std::string trace_csv(const FrequencyTrace& trace) {
  std::string out = "tau,I,U,Itilde,F,dFdtau,phiL2,D,fittedC,dlogI,Vmain,Verr,underflow\n";
  for (const auto& r : trace.records) {
    for (double v : {r.tau, r.I, r.U, r.Itilde, r.F, r.dFdtau, r.phiL2, r.D, r.fittedC, r.dlogI, r.Vmain, r.Verr}) {
      out += format_double(v);
      out += ',';
    }
    out += r.underflow ? "true\n" : "false\n";
  }
  return out;
}

nlohmann::json summary_json(const FrequencyTrace& trace, std::optional<double> theta_fit) {
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  return {{"lambdaFit", num(trace.lambda_fit)},
          {"offsetFit", num(trace.offset_fit)},
          {"Uinf", num(trace.U_inf)},
          {"Lambda", num(trace.Lambda)},
          {"thetaFit", theta_fit ? num(*theta_fit) : nlohmann::json()},
          {"integralD", num(trace.integral_D)},
          {"integralC2", num(trace.integral_C2)}};
}

}  // namespace shrinkerlab
