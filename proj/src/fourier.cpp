#include "shrinkerlab/fourier.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace shrinkerlab {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// One forward/backward plan pair plus the aligned buffers it was planned on.
// fftw_execute_dft is thread safe; planning is not, hence the global mutex.
struct FftPlan {
  int n;
  fftw_complex* in;
  fftw_complex* out;
  fftw_plan forward;
  fftw_plan backward;

  explicit FftPlan(int size) : n(size) {
    std::lock_guard lock(planner_mutex());
    in = fftw_alloc_complex(static_cast<size_t>(n));
    out = fftw_alloc_complex(static_cast<size_t>(n));
    // FFTW_ESTIMATE keeps the chosen algorithm (and hence rounding) identical
    // between runs.
    forward = fftw_plan_dft_1d(n, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    backward = fftw_plan_dft_1d(n, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(in);
    fftw_free(out);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
};

FftPlan& plan_for(int n) {
  thread_local std::map<int, std::unique_ptr<FftPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

ComplexField run(const ComplexField& z, bool forward_dir) {
  const int n = static_cast<int>(z.size());
  if (n == 0) return z;
  FftPlan& p = plan_for(n);
  for (int j = 0; j < n; ++j) {
    p.in[j][0] = z[j].real();
    p.in[j][1] = z[j].imag();
  }
  fftw_execute_dft(forward_dir ? p.forward : p.backward, p.in, p.out);
  ComplexField r(n);
  const double scale = forward_dir ? 1.0 : 1.0 / n;
  for (int j = 0; j < n; ++j) r[j] = Complex(p.out[j][0], p.out[j][1]) * scale;
  return r;
}

ComplexField to_complex(const Field& u) { return u.cast<Complex>(); }

void require_even(int n, const char* what) {
  if (n < 4 || n % 2 != 0)
    throw std::invalid_argument(std::string(what) + ": grid size must be even and >= 4");
}

ComplexField fd4_d1(const ComplexField& z) {
  const int n = static_cast<int>(z.size());
  const double h = 2.0 * std::numbers::pi / n;
  ComplexField r(n);
  for (int j = 0; j < n; ++j) {
    const auto& zm2 = z[(j - 2 + n) % n];
    const auto& zm1 = z[(j - 1 + n) % n];
    const auto& zp1 = z[(j + 1) % n];
    const auto& zp2 = z[(j + 2) % n];
    r[j] = (-zp2 + 8.0 * zp1 - 8.0 * zm1 + zm2) / (12.0 * h);
  }
  return r;
}

ComplexField fd4_d2(const ComplexField& z) {
  const int n = static_cast<int>(z.size());
  const double h = 2.0 * std::numbers::pi / n;
  ComplexField r(n);
  for (int j = 0; j < n; ++j) {
    const auto& zm2 = z[(j - 2 + n) % n];
    const auto& zm1 = z[(j - 1 + n) % n];
    const auto& zp1 = z[(j + 1) % n];
    const auto& zp2 = z[(j + 2) % n];
    r[j] = (-zp2 + 16.0 * zp1 - 30.0 * z[j] + 16.0 * zm1 - zm2) / (12.0 * h * h);
  }
  return r;
}

}  // namespace

ComplexField fft(const ComplexField& z) { return run(z, true); }
ComplexField ifft(const ComplexField& zhat) { return run(zhat, false); }

ComplexField d1(const ComplexField& z, DiffScheme scheme) {
  const int n = static_cast<int>(z.size());
  require_even(n, "d1");
  if (scheme == DiffScheme::FourthOrder) return fd4_d1(z);
  ComplexField zh = fft(z);
  for (int j = 0; j < n; ++j) {
    const int k = wavenumber(j, n);
    zh[j] *= (2 * j == n) ? Complex(0.0) : Complex(0.0, k);
  }
  return ifft(zh);
}

ComplexField d2(const ComplexField& z, DiffScheme scheme) {
  const int n = static_cast<int>(z.size());
  require_even(n, "d2");
  if (scheme == DiffScheme::FourthOrder) return fd4_d2(z);
  ComplexField zh = fft(z);
  for (int j = 0; j < n; ++j) {
    const double k = wavenumber(j, n);
    zh[j] *= -k * k;
  }
  return ifft(zh);
}

Field d1(const Field& u, DiffScheme scheme) { return d1(to_complex(u), scheme).real(); }
Field d2(const Field& u, DiffScheme scheme) { return d2(to_complex(u), scheme).real(); }

Field antiderivative(const Field& f) {
  const int n = static_cast<int>(f.size());
  require_even(n, "antiderivative");
  ComplexField fh = fft(to_complex(f));
  for (int j = 0; j < n; ++j) {
    const int k = wavenumber(j, n);
    fh[j] = (k == 0 || 2 * j == n) ? Complex(0.0) : Complex(fh[j].imag() / k, -fh[j].real() / k);
  }
  return ifft(fh).real();
}

namespace {

// Zero-pads spectrum `zh` of length n into a length factor*n spectrum with the
// Nyquist coefficient split between +n/2 and -n/2.
ComplexField pad_spectrum(const ComplexField& zh, int factor) {
  const int n = static_cast<int>(zh.size());
  const int big = n * factor;
  ComplexField out = ComplexField::Zero(big);
  for (int j = 0; j < n; ++j) {
    const int k = wavenumber(j, n);
    const Complex c = zh[j] * static_cast<double>(factor);
    if (2 * j == n) {
      out[n / 2] += 0.5 * c;
      out[big - n / 2] += 0.5 * c;
    } else {
      out[(k + big) % big] += c;
    }
  }
  return out;
}

}  // namespace

ComplexField upsample(const ComplexField& z, int factor) {
  if (factor == 1) return z;
  require_even(static_cast<int>(z.size()), "upsample");
  if (factor < 1) throw std::invalid_argument("upsample: factor must be >= 1");
  return ifft(pad_spectrum(fft(z), factor));
}

Field upsample(const Field& u, int factor) { return upsample(to_complex(u), factor).real(); }

Field upsample_derivative(const Field& u, int factor) {
  const int n = static_cast<int>(u.size());
  require_even(n, "upsample_derivative");
  if (factor < 2) throw std::invalid_argument("upsample_derivative: factor must be >= 2");
  ComplexField padded = pad_spectrum(fft(to_complex(u)), factor);
  const int big = n * factor;
  for (int j = 0; j < big; ++j) padded[j] *= Complex(0.0, wavenumber(j, big));
  return ifft(padded).real();
}

TrigInterpolant::TrigInterpolant(const ComplexField& samples)
    : n_(static_cast<int>(samples.size())), coeff_(static_cast<size_t>(n_ + 1)) {
  require_even(n_, "TrigInterpolant");
  const ComplexField zh = fft(samples);
  for (int j = 0; j < n_; ++j) {
    const int k = wavenumber(j, n_);
    const Complex c = zh[j] / static_cast<double>(n_);
    if (2 * j == n_) {
      coeff_[0] += 0.5 * c;
      coeff_[static_cast<size_t>(n_)] += 0.5 * c;
    } else {
      coeff_[static_cast<size_t>(k + n_ / 2)] += c;
    }
  }
}

void TrigInterpolant::evaluate(double theta, Complex& value, Complex& dv, Complex& ddv) const {
  const int half = n_ / 2;
  const Complex step = std::polar(1.0, theta);
  // Start at e^{-i half theta} and rotate forward; refresh periodically to
  // bound the accumulated rounding of repeated multiplication.
  Complex e = std::polar(1.0, -half * theta);
  value = dv = ddv = Complex(0.0);
  for (int k = -half; k <= half; ++k) {
    if (((k + half) & 63) == 0) e = std::polar(1.0, k * theta);
    const Complex term = coeff_[static_cast<size_t>(k + half)] * e;
    value += term;
    dv += Complex(0.0, k) * term;
    ddv += -static_cast<double>(k) * k * term;
    e *= step;
  }
}

Complex TrigInterpolant::value(double theta) const {
  Complex v, d, dd;
  evaluate(theta, v, d, dd);
  return v;
}

Complex TrigInterpolant::derivative(double theta) const {
  Complex v, d, dd;
  evaluate(theta, v, d, dd);
  return d;
}

}  // namespace shrinkerlab
