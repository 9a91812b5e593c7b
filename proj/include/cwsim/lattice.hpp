#ifndef CWSIM_LATTICE_HPP
#define CWSIM_LATTICE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cwsim/config.hpp"

namespace cwsim {

/// Macrostate of the magnet: how many spins sit at each sigma level.
/// Spin-1: down = N_{-1}, zero = N_0, up = N_{+1}.
/// Spin-1/2: down = N_{-1/2}, up = N_{+1/2}, zero stays 0.
struct LatticeSite {
  int down = 0;
  int zero = 0;
  int up = 0;

  /// Spin-1/2 label: number of up spins.
  int k() const { return up; }
  /// Spin-1 labels with m1 = (2 n1 - n2)/N, m2 = n2/N.
  int n1() const { return up; }
  int n2() const { return up + down; }

  friend bool operator==(const LatticeSite&, const LatticeSite&) = default;
};

struct Moments {
  double m1 = 0.0;
  double m2 = 0.0;
};

/// Integer-exact moments of a site; spin-1/2 sites carry m2 = 1/4.
inline Moments moments_of(const LatticeSite& site, Spin spin, int n) {
  const double nu = 1.0 / n;
  if (spin == Spin::Half) return {0.5 * (site.up - site.down) * nu, 0.25};
  return {(site.up - site.down) * nu, (site.up + site.down) * nu};
}

/// A single-spin flip, named by the level the spin leaves and enters.
enum class Flip { UpToZero, DownToZero, ZeroToDown, ZeroToUp, UpToDown, DownToUp };

inline constexpr std::array<Flip, 4> kSpinOneFlips{Flip::UpToZero, Flip::DownToZero, Flip::ZeroToDown,
                                                   Flip::ZeroToUp};
inline constexpr std::array<Flip, 2> kSpinHalfFlips{Flip::UpToDown, Flip::DownToUp};

/// Number of spins available to make this flip at the given site.
inline int source_count(const LatticeSite& site, Flip flip) {
  switch (flip) {
    case Flip::UpToZero:
    case Flip::UpToDown:
      return site.up;
    case Flip::DownToZero:
    case Flip::DownToUp:
      return site.down;
    case Flip::ZeroToDown:
    case Flip::ZeroToUp:
      return site.zero;
  }
  return 0;
}

/// Site reached by one flip; nullopt when no spin is available.
inline std::optional<LatticeSite> apply_flip(LatticeSite site, Flip flip) {
  if (source_count(site, flip) == 0) return std::nullopt;
  switch (flip) {
    case Flip::UpToZero: --site.up; ++site.zero; break;
    case Flip::DownToZero: --site.down; ++site.zero; break;
    case Flip::ZeroToDown: --site.zero; ++site.down; break;
    case Flip::ZeroToUp: --site.zero; ++site.up; break;
    case Flip::UpToDown: --site.up; ++site.down; break;
    case Flip::DownToUp: --site.down; ++site.up; break;
  }
  return site;
}

/// Enumeration of the order-parameter lattice with its single-flip topology.
///
/// Spin-1/2 sites are indexed by k (N+1 sites). Spin-1 sites are indexed
/// by n2*(n2+1)/2 + n1, i.e. increasing m2 rows, each row with increasing
/// m1 ((N+1)(N+2)/2 sites). Moments are always derived from the integer
/// counts.
class MomentLattice {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  MomentLattice(Spin spin, int n) : spin_(spin), n_(n) {
    if (n < 1) throw std::invalid_argument("lattice needs N >= 1");
    if (spin == Spin::Half) {
      sites_.reserve(static_cast<std::size_t>(n) + 1);
      for (int k = 0; k <= n; ++k) sites_.push_back({n - k, 0, k});
    } else {
      sites_.reserve(static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(n + 2) / 2);
      for (int n2 = 0; n2 <= n; ++n2) {
        for (int n1 = 0; n1 <= n2; ++n1) sites_.push_back({n2 - n1, n - n2, n1});
      }
    }
    const auto flips = this->flips();
    neighbors_.assign(sites_.size() * flips.size(), npos);
    log_degeneracy_.resize(sites_.size());
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      for (std::size_t f = 0; f < flips.size(); ++f) {
        if (auto next = apply_flip(sites_[i], flips[f])) neighbors_[i * flips.size() + f] = index_unchecked(*next);
      }
      const auto& s = sites_[i];
      log_degeneracy_[i] = std::lgamma(n + 1.0) - std::lgamma(s.down + 1.0) - std::lgamma(s.zero + 1.0) -
                           std::lgamma(s.up + 1.0);
    }
  }

  Spin spin() const { return spin_; }
  int N() const { return n_; }
  std::size_t size() const { return sites_.size(); }

  std::span<const LatticeSite> sites() const { return sites_; }
  const LatticeSite& site(std::size_t i) const { return sites_[i]; }
  Moments moments(std::size_t i) const { return moments_of(sites_[i], spin_, n_); }

  std::span<const Flip> flips() const {
    if (spin_ == Spin::Half) return kSpinHalfFlips;
    return kSpinOneFlips;
  }

  bool contains(const LatticeSite& s) const {
    if (s.down < 0 || s.zero < 0 || s.up < 0 || s.down + s.zero + s.up != n_) return false;
    return spin_ == Spin::One || s.zero == 0;
  }

  std::optional<std::size_t> index_of(const LatticeSite& s) const {
    if (!contains(s)) return std::nullopt;
    return index_unchecked(s);
  }

  /// Index of the site reached from i by the f-th entry of flips(), or npos.
  std::size_t neighbor(std::size_t i, std::size_t flip_slot) const {
    return neighbors_[i * flips().size() + flip_slot];
  }

  /// ln G_N per site, from log-gamma.
  std::span<const double> log_degeneracy() const { return log_degeneracy_; }

  /// Index of the mirror site (m1 -> -m1).
  std::size_t mirror(std::size_t i) const {
    const auto& s = sites_[i];
    return index_unchecked({s.up, s.zero, s.down});
  }

 private:
  std::size_t index_unchecked(const LatticeSite& s) const {
    if (spin_ == Spin::Half) return static_cast<std::size_t>(s.up);
    const auto n2 = static_cast<std::size_t>(s.up + s.down);
    return n2 * (n2 + 1) / 2 + static_cast<std::size_t>(s.up);
  }

  Spin spin_;
  int n_;
  std::vector<LatticeSite> sites_;
  std::vector<std::size_t> neighbors_;
  std::vector<double> log_degeneracy_;
};

}  // namespace cwsim

#endif  // CWSIM_LATTICE_HPP
