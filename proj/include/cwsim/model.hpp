#ifndef CWSIM_MODEL_HPP
#define CWSIM_MODEL_HPP

#include <cmath>
#include <vector>

#include "cwsim/config.hpp"
#include "cwsim/lattice.hpp"

namespace cwsim {

/// Fractions x_sigma of spins at each level. Spin-1/2 leaves zero = 0.
struct Fractions {
  double down = 0.0;
  double zero = 0.0;
  double up = 0.0;
};

inline Fractions spin_fractions(const LatticeSite& site, int n) {
  const double nu = 1.0 / n;
  return {site.down * nu, site.zero * nu, site.up * nu};
}

/// Fractions from real moments (large-N or diagnostic use).
inline Fractions spin_fractions(const Moments& m, Spin spin) {
  if (spin == Spin::Half) return {0.5 - m.m1, 0.0, 0.5 + m.m1};
  return {0.5 * (m.m2 - m.m1), 1.0 - m.m2, 0.5 * (m.m2 + m.m1)};
}

/// ln of the multinomial N!/(N_down! N_zero! N_up!).
inline double log_degeneracy(const LatticeSite& site, int n) {
  return std::lgamma(n + 1.0) - std::lgamma(site.down + 1.0) - std::lgamma(site.zero + 1.0) -
         std::lgamma(site.up + 1.0);
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// Large-N entropy per spin, -sum_sigma x_sigma ln x_sigma.
inline double entropy_density(const Moments& m, Spin spin) {
  const auto x = spin_fractions(m, spin);
  return -(xlogx(x.down) + xlogx(x.zero) + xlogx(x.up));
}

/// The cosine order parameter C2 as a polynomial in the moments.
inline double c2(const Moments& m, Spin spin) {
  if (spin == Spin::Half) return 4.0 * m.m1 * m.m1;
  const double co = 1.0 - 1.5 * m.m2;
  return co * co + 0.75 * m.m1 * m.m1;
}

/// Magnet energy per spin, -J2/2 C2 - J4/4 C2^2.
inline double magnet_energy_density(const Moments& m, const ModelConfig& cfg) {
  const double c = c2(m, cfg.spin);
  return -0.5 * cfg.J2 * c - 0.25 * cfg.J4 * c * c;
}

/// System-apparatus coupling per spin, I_s(m).
inline double interaction_density(const Moments& m, Sector s, Spin spin, double g) {
  const double sv = s.value();
  if (spin == Spin::Half) return -4.0 * g * sv * m.m1;
  return -g * ((1.0 - 1.5 * sv * sv) * (1.0 - 1.5 * m.m2) + 0.75 * sv * m.m1);
}

/// Extensive H_s = N (H_M/N + I_s).
inline double sector_hamiltonian(const Moments& m, Sector s, const ModelConfig& cfg) {
  return cfg.N * (magnet_energy_density(m, cfg) + interaction_density(m, s, cfg.spin, cfg.g));
}

/// Exact finite-N free energy of one macrostate, H_s - T ln G_N.
inline double free_energy(const LatticeSite& site, Sector s, const ModelConfig& cfg) {
  return sector_hamiltonian(moments_of(site, cfg.spin, cfg.N), s, cfg) - cfg.T * log_degeneracy(site, cfg.N);
}

/// H_s tabulated over the lattice.
inline std::vector<double> sector_energies(const MomentLattice& lattice, const ModelConfig& cfg, Sector s) {
  std::vector<double> energies(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) energies[i] = sector_hamiltonian(lattice.moments(i), s, cfg);
  return energies;
}

/// H_SA tabulated over the lattice (N * I_s).
inline std::vector<double> interaction_energies(const MomentLattice& lattice, const ModelConfig& cfg, Sector s) {
  std::vector<double> energies(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    energies[i] = cfg.N * interaction_density(lattice.moments(i), s, cfg.spin, cfg.g);
  }
  return energies;
}

}  // namespace cwsim

#endif  // CWSIM_MODEL_HPP
