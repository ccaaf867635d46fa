#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace shrinkerlab {

using Vec2 = Eigen::Vector2d;
using Field = Eigen::VectorXd;
using Complex = std::complex<double>;
using ComplexField = Eigen::VectorXcd;

/// Differentiation scheme on the uniform periodic parameter grid.
///
/// `Spectral` is discrete Fourier differentiation (spectrally accurate for
/// analytic curves). `FourthOrder` is the centered 5-point fallback intended
/// for curves that only exist as polyline data.
enum class DiffScheme { Spectral, FourthOrder };

// Forward DFT (unnormalized) and inverse DFT (normalized by 1/n).
// Plans are cached per size and thread; safe to call from several threads.
ComplexField fft(const ComplexField& z);
ComplexField ifft(const ComplexField& zhat);

/// Signed wavenumber of DFT index j on an n-point grid; the Nyquist index
/// n/2 is reported as +n/2.
inline int wavenumber(int j, int n) { return j <= n / 2 ? j : j - n; }

// Derivatives with respect to the parameter theta in [0, 2pi).
ComplexField d1(const ComplexField& z, DiffScheme scheme = DiffScheme::Spectral);
ComplexField d2(const ComplexField& z, DiffScheme scheme = DiffScheme::Spectral);
Field d1(const Field& u, DiffScheme scheme = DiffScheme::Spectral);
Field d2(const Field& u, DiffScheme scheme = DiffScheme::Spectral);

/// Periodic antiderivative of a zero-mean field (the mean is discarded); the
/// result has zero mean.
Field antiderivative(const Field& f);

/// Values of the trigonometric interpolant on the refined grid of
/// factor * n nodes (node 0 kept at theta = 0).
ComplexField upsample(const ComplexField& z, int factor);
Field upsample(const Field& u, int factor);

/// theta-derivative of the trigonometric interpolant, sampled on the refined
/// grid. Unlike d1 followed by upsample, this keeps the Nyquist component, so
/// the derivative of cos(n theta / 2) does not vanish.
Field upsample_derivative(const Field& u, int factor);

/// Trigonometric interpolant of periodic complex samples, evaluable at any
/// parameter value. The Nyquist coefficient is split symmetrically so the
/// interpolant of real data is real.
class TrigInterpolant {
 public:
  explicit TrigInterpolant(const ComplexField& samples);

  Complex value(double theta) const;
  Complex derivative(double theta) const;
  /// Value and first two derivatives in one pass.
  void evaluate(double theta, Complex& value, Complex& d1, Complex& d2) const;
  int size() const { return n_; }

 private:
  int n_;
  // Coefficients for k = -n/2 .. n/2 stored at index k + n/2.
  std::vector<Complex> coeff_;
};

}  // namespace shrinkerlab
