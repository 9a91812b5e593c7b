#ifndef CWSIM_TRUNCATION_HPP
#define CWSIM_TRUNCATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "cwsim/bath.hpp"
#include "cwsim/config.hpp"

namespace cwsim {

/// Per-spin couplings g_n = g + delta_g_std * z_n. The z_n come from a
/// seeded mt19937_64, so scaling delta_g_std rescales the same draws.
inline std::vector<double> sample_couplings(const ModelConfig& cfg) {
  std::vector<double> g(static_cast<std::size_t>(cfg.N), cfg.g);
  if (cfg.delta_g_std == 0.0) return g;
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : g) v += cfg.delta_g_std * normal(rng);
  return g;
}

/// One off-diagonal block r_{s s~} of the spin-1 density matrix.
struct OffDiagonalPair {
  Sector s;
  Sector s_tilde;
  std::complex<double> r0{1.0, 0.0};
  std::vector<double> g_list;

  static OffDiagonalPair make(const ModelConfig& cfg, Sector s, Sector s_tilde,
                              std::complex<double> r0 = {1.0, 0.0}) {
    if (cfg.spin != Spin::One) throw std::invalid_argument("truncation is implemented for spin-1");
    if (!is_member(cfg.spin, s) || !is_member(cfg.spin, s_tilde)) throw std::invalid_argument("sector is not an s_z eigenvalue");
    if (s == s_tilde) throw std::invalid_argument("off-diagonal pair needs s != s~");
    if (std::abs(r0) > 1.0) throw std::invalid_argument("|r0| must be <= 1");
    return {s, s_tilde, r0, sample_couplings(cfg)};
  }
};

/// r(t)/r(0) from the spin-spin phases alone:
///   prod_n (1/3) sum_sigma exp(i 3 g_n t/2 (delta_{sigma,s} - delta_{sigma,s~})),
/// i.e. prod_n (1/3 + 2/3 cos(3 g_n t/2)).
inline std::complex<double> dephasing_factor(double t, const OffDiagonalPair& pair) {
  if (pair.s == pair.s_tilde) throw std::invalid_argument("dephasing needs s != s~");
  std::complex<double> product{1.0, 0.0};
  for (double gn : pair.g_list) {
    std::complex<double> trace{0.0, 0.0};
    for (int sigma2 : {-2, 0, 2}) {
      const double weight = (sigma2 == pair.s.twice() ? 1.0 : 0.0) - (sigma2 == pair.s_tilde.twice() ? 1.0 : 0.0);
      trace += std::polar(1.0, 1.5 * gn * t * weight);
    }
    product *= trace / 3.0;
  }
  return product;
}

/// 2/(g sqrt(3N)).
inline double dephasing_time(const ModelConfig& cfg) {
  if (!(cfg.g > 0.0)) throw std::invalid_argument("dephasing time needs g > 0");
  return 2.0 / (cfg.g * std::sqrt(3.0 * cfg.N));
}

/// n-th recurrence time 4 pi n / (3 g) for uniform coupling.
inline double recurrence_time(const ModelConfig& cfg, int n = 1) {
  if (!(cfg.g > 0.0)) throw std::invalid_argument("recurrence time needs g > 0");
  return 4.0 * std::numbers::pi * n / (3.0 * cfg.g);
}

/// Change of H_s when one spin moves from sigma to sigma + alpha:
/// (3g/2)[(1 - 3s^2/2)(1 + 2 alpha sigma) - s alpha/2].
inline double frequency_shift(int sigma, int alpha, Sector s, double g) {
  const double sv = s.value();
  return 1.5 * g * ((1.0 - 1.5 * sv * sv) * (1.0 + 2.0 * alpha * sigma) - 0.5 * sv * alpha);
}

/// A spin-1 flip sigma -> sigma + alpha must stay on {-1, 0, 1}.
inline bool allowed_transition(int sigma, int alpha) { return std::abs(sigma + alpha) <= 1; }

/// Asymptotic Re dB_sigma/dt = (gamma/2) sum_alpha [K(Delta H_s) + K(Delta H_s~)],
/// summed over the allowed alpha only.
inline double decoherence_rate(int sigma, Sector s, Sector s_tilde, const ModelConfig& cfg, double gamma) {
  if (sigma < -1 || sigma > 1) throw std::invalid_argument("sigma must be -1, 0 or 1");
  const BathKernel kernel(cfg.T, cfg.Gamma);
  double sum = 0.0;
  for (int alpha : {-1, 1}) {
    if (!allowed_transition(sigma, alpha)) continue;
    sum += kernel(frequency_shift(sigma, alpha, s, cfg.g)) + kernel(frequency_shift(sigma, alpha, s_tilde, cfg.g));
  }
  return 0.5 * gamma * sum;
}

/// Diagonal-block analogue, (gamma/2) sum_alpha [K(Delta) - K(-Delta)].
inline double diagonal_rate(int sigma, Sector s, const ModelConfig& cfg, double gamma) {
  if (sigma < -1 || sigma > 1) throw std::invalid_argument("sigma must be -1, 0 or 1");
  const BathKernel kernel(cfg.T, cfg.Gamma);
  double sum = 0.0;
  for (int alpha : {-1, 1}) {
    if (!allowed_transition(sigma, alpha)) continue;
    const double delta = frequency_shift(sigma, alpha, s, cfg.g);
    sum += kernel(delta) - kernel(-delta);
  }
  return 0.5 * gamma * sum;
}

/// Mean of diagonal_rate over sigma in {-1, 0, 1}.
inline double diagonal_rate_mean(Sector s, const ModelConfig& cfg, double gamma) {
  return (diagonal_rate(-1, s, cfg, gamma) + diagonal_rate(0, s, cfg, gamma) + diagonal_rate(1, s, cfg, gamma)) / 3.0;
}

inline std::array<double, 3> decoherence_rates(Sector s, Sector s_tilde, const ModelConfig& cfg, double gamma) {
  return {decoherence_rate(-1, s, s_tilde, cfg, gamma), decoherence_rate(0, s, s_tilde, cfg, gamma),
          decoherence_rate(1, s, s_tilde, cfg, gamma)};
}

/// Bath damping of |r|: max over sigma of exp(-N Re dB_sigma/dt t).
inline double decoherence_damping(double t, const OffDiagonalPair& pair, const ModelConfig& cfg, double gamma) {
  if (gamma == 0.0) return 1.0;
  const auto rates = decoherence_rates(pair.s, pair.s_tilde, cfg, gamma);
  const double slowest = *std::min_element(rates.begin(), rates.end());
  return std::exp(-cfg.N * slowest * t);
}

/// r(t)/r(0) including bath damping.
inline std::complex<double> offdiag_envelope(double t, const OffDiagonalPair& pair, const ModelConfig& cfg,
                                             double gamma) {
  return dephasing_factor(t, pair) * decoherence_damping(t, pair, cfg, gamma);
}

/// Height of the recurrence peaks around t: the damping times
/// |prod_n (1/3 + 2/3 cos(3 (g_n - g) t/2))|, which is 1 for uniform g.
inline double envelope_upper(double t, const OffDiagonalPair& pair, const ModelConfig& cfg, double gamma) {
  double spread = 1.0;
  for (double gn : pair.g_list) spread *= 1.0 / 3.0 + 2.0 / 3.0 * std::cos(1.5 * (gn - cfg.g) * t);
  return std::abs(spread) * decoherence_damping(t, pair, cfg, gamma);
}

}  // namespace cwsim

#endif  // CWSIM_TRUNCATION_HPP
