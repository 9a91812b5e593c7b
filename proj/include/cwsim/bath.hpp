#ifndef CWSIM_BATH_HPP
#define CWSIM_BATH_HPP

#include <cmath>
#include <stdexcept>

namespace cwsim {

/// Fourier-transformed bath autocorrelation for an Ohmic spectrum with a
/// Debye cutoff,
///
///   K(w) = exp(-|w|/Gamma)/4 * w / (exp(w/T) - 1),
///
/// which satisfies K(-w) = exp(w/T) K(w). Negative w is energy absorbed
/// from the bath.
class BathKernel {
 public:
  BathKernel(double temperature, double cutoff) : T_(temperature), Gamma_(cutoff) {
    if (!(temperature > 0.0) || !(cutoff > 0.0)) throw std::invalid_argument("bath needs T > 0 and Gamma > 0");
  }

  double temperature() const { return T_; }
  double cutoff() const { return Gamma_; }

  double operator()(double omega) const {
    const double damping = 0.25 * std::exp(-std::abs(omega) / Gamma_);
    const double x = omega / T_;
    // x/(e^x - 1) = 1 - x/2 + x^2/12 - ...
    if (std::abs(x) < 1e-6) return damping * T_ * (1.0 - 0.5 * x + x * x / 12.0);
    return damping * omega / std::expm1(x);
  }

 private:
  double T_;
  double Gamma_;
};

}  // namespace cwsim

#endif  // CWSIM_BATH_HPP
