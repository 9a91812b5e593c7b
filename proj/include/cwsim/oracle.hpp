#ifndef CWSIM_ORACLE_HPP
#define CWSIM_ORACLE_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "cwsim/bath.hpp"
#include "cwsim/config.hpp"
#include "cwsim/lattice.hpp"

namespace cwsim {

/// Brute-force master equation on all (2l+1)^N spin configurations.
///
/// Energies come straight from the pairwise cosine form of C2 and the
/// per-spin cosine coupling to the measured spin, not from the moment
/// polynomials. Each spin flips to a neighbouring level with rate
/// K(dH)/T (spin-1) or K(dH)/(2T) (spin-1/2) per unit tau. Only meant for
/// N <= 4; it exists to check the lumped generator.
class ConfigurationSpace {
 public:
  static constexpr int kMaxSpins = 4;

  ConfigurationSpace(const ModelConfig& cfg, Sector s) : cfg_(cfg), sector_(s) {
    cfg.validate();
    if (cfg.N > kMaxSpins) throw std::invalid_argument("configuration-space oracle refuses N > 4");
    if (!is_member(cfg.spin, s)) throw std::invalid_argument("sector is not an s_z eigenvalue");
    const int q = multiplicity(cfg.spin);
    std::size_t count = 1;
    for (int i = 0; i < cfg.N; ++i) count *= static_cast<std::size_t>(q);
    levels_.resize(count * static_cast<std::size_t>(cfg.N));
    energies_.resize(count);
    for (std::size_t c = 0; c < count; ++c) {
      std::size_t code = c;
      for (int i = 0; i < cfg.N; ++i) {
        levels_[c * cfg.N + i] = static_cast<int>(code % q);
        code /= q;
      }
      energies_[c] = energy_of(c);
    }
  }

  std::size_t size() const { return energies_.size(); }
  double energy(std::size_t c) const { return energies_[c]; }

  /// sigma of spin i in configuration c.
  double sigma(std::size_t c, int i) const {
    const int level = levels_[c * cfg_.N + i];
    return cfg_.spin == Spin::Half ? level - 0.5 : level - 1.0;
  }

  LatticeSite macrostate(std::size_t c) const {
    LatticeSite site;
    const int top = multiplicity(cfg_.spin) - 1;
    for (int i = 0; i < cfg_.N; ++i) {
      const int level = levels_[c * cfg_.N + i];
      if (level == 0) ++site.down;
      else if (level == top) ++site.up;
      else ++site.zero;
    }
    return site;
  }

  /// Dense generator, dP/dtau = L P over configurations.
  Eigen::MatrixXd generator() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for_each_flip([&](std::size_t from, std::size_t to, double rate) {
      L(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) += rate;
      L(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(from)) -= rate;
    });
    return L;
  }

  /// Total escape rate of one configuration, summed over its spins.
  double total_outflow(std::size_t c) const {
    double total = 0.0;
    for_each_flip([&](std::size_t from, std::size_t, double rate) {
      if (from == c) total += rate;
    });
    return total;
  }

 private:
  double energy_of(std::size_t c) const {
    const int n = cfg_.N;
    const double q = multiplicity(cfg_.spin);
    const double angle = 2.0 * std::numbers::pi / q;
    double pair = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) pair += std::cos(angle * (sigma(c, i) - sigma(c, j)));
    }
    const double c2 = pair / (static_cast<double>(n) * n);
    double coupling = 0.0;
    for (int i = 0; i < n; ++i) coupling += std::cos(angle * (sector_.value() - sigma(c, i)));
    return n * (-0.5 * cfg_.J2 * c2 - 0.25 * cfg_.J4 * c2 * c2) - cfg_.g * coupling;
  }

  template <class Fn>
  void for_each_flip(Fn&& fn) const {
    const BathKernel kernel(cfg_.T, cfg_.Gamma);
    const int q = multiplicity(cfg_.spin);
    const double per_spin = cfg_.spin == Spin::Half ? 0.5 / cfg_.T : 1.0 / cfg_.T;
    std::size_t stride = 1;
    for (int i = 0; i < cfg_.N; ++i) {
      for (std::size_t c = 0; c < size(); ++c) {
        const int level = levels_[c * cfg_.N + i];
        for (int step : {-1, +1}) {
          const int next = level + step;
          if (next < 0 || next >= q) continue;
          const std::size_t to = c + stride * static_cast<std::size_t>(next) - stride * static_cast<std::size_t>(level);
          fn(c, to, per_spin * kernel(energies_[to] - energies_[c]));
        }
      }
      stride *= static_cast<std::size_t>(q);
    }
  }

  ModelConfig cfg_;
  Sector sector_;
  std::vector<int> levels_;
  std::vector<double> energies_;
};

/// Evolves the uniform configuration-space state exactly (matrix
/// exponential) and returns its marginal on the moment lattice at each tau.
inline std::vector<std::vector<double>> oracle_evolve(const ModelConfig& cfg, Sector s, std::span<const double> taus) {
  const ConfigurationSpace space(cfg, s);
  const MomentLattice lattice(cfg.spin, cfg.N);
  const Eigen::MatrixXd L = space.generator();
  const auto n = static_cast<Eigen::Index>(space.size());
  const Eigen::VectorXd p0 = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  std::vector<std::size_t> site_of(space.size());
  for (std::size_t c = 0; c < space.size(); ++c) site_of[c] = lattice.index_of(space.macrostate(c)).value();

  std::vector<std::vector<double>> marginals;
  for (double tau : taus) {
    if (!(tau >= 0.0)) throw std::invalid_argument("oracle tau must be >= 0");
    const Eigen::MatrixXd propagator = (L * tau).exp();
    const Eigen::VectorXd p = propagator * p0;
    std::vector<double> marginal(lattice.size(), 0.0);
    for (std::size_t c = 0; c < space.size(); ++c) marginal[site_of[c]] += p(static_cast<Eigen::Index>(c));
    marginals.push_back(std::move(marginal));
  }
  return marginals;
}

}  // namespace cwsim

#endif  // CWSIM_ORACLE_HPP
