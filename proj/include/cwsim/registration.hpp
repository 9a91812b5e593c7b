#ifndef CWSIM_REGISTRATION_HPP
#define CWSIM_REGISTRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cwsim/bath.hpp"
#include "cwsim/config.hpp"
#include "cwsim/lattice.hpp"
#include "cwsim/model.hpp"

namespace cwsim {

/// Probability vector P_s(m) over the sites of one lattice.
class Distribution {
 public:
  Distribution(std::shared_ptr<const MomentLattice> lattice, std::vector<double> values)
      : lattice_(std::move(lattice)), values_(std::move(values)) {
    if (!lattice_) throw std::invalid_argument("distribution needs a lattice");
    if (values_.size() != lattice_->size()) throw std::invalid_argument("distribution size does not match lattice");
  }

  const MomentLattice& lattice() const { return *lattice_; }
  const std::shared_ptr<const MomentLattice>& lattice_ptr() const { return lattice_; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
  }

 private:
  std::shared_ptr<const MomentLattice> lattice_;
  std::vector<double> values_;
};

/// Paramagnetic start, P(m) = G_N(m) / (2l+1)^N.
inline Distribution initial_paramagnet(std::shared_ptr<const MomentLattice> lattice) {
  const auto log_g = lattice->log_degeneracy();
  const double log_norm = lattice->N() * std::log(static_cast<double>(multiplicity(lattice->spin())));
  std::vector<double> p(lattice->size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_g[i] - log_norm);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return Distribution(std::move(lattice), std::move(p));
}

/// Point mass on one site.
inline Distribution point_mass(std::shared_ptr<const MomentLattice> lattice, std::size_t site) {
  std::vector<double> p(lattice->size(), 0.0);
  p.at(site) = 1.0;
  return Distribution(std::move(lattice), std::move(p));
}

struct RateEdge {
  std::size_t source;
  std::size_t target;
  double rate;  // per unit tau
};

/// Worker cap from CWSIM_THREADS (default 1).
inline unsigned worker_count() {
  static const unsigned count = [] {
    if (const char* env = std::getenv("CWSIM_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) return static_cast<unsigned>(std::min<long>(v, std::max(1u, std::thread::hardware_concurrency())));
    }
    return 1u;
  }();
  return count;
}

/// Sparse master-equation generator of one sector: every edge moves
/// probability from its source to its target at a fixed rate, so the
/// implied rate matrix has zero column sums by construction.
class SectorGenerator {
 public:
  SectorGenerator(std::size_t sites, std::vector<RateEdge> edges) : sites_(sites), edges_(std::move(edges)) {
    outflow_.assign(sites_, 0.0);
    incoming_offsets_.assign(sites_ + 1, 0);
    for (const auto& e : edges_) {
      if (e.source >= sites_ || e.target >= sites_) throw std::out_of_range("edge outside generator");
      if (!(e.rate >= 0.0)) throw std::invalid_argument("negative or NaN rate");
      outflow_[e.source] += e.rate;
      ++incoming_offsets_[e.target + 1];
    }
    std::partial_sum(incoming_offsets_.begin(), incoming_offsets_.end(), incoming_offsets_.begin());
    incoming_.resize(edges_.size());
    auto cursor = incoming_offsets_;
    for (std::size_t k = 0; k < edges_.size(); ++k) incoming_[cursor[edges_[k].target]++] = k;
    max_outflow_ = outflow_.empty() ? 0.0 : *std::max_element(outflow_.begin(), outflow_.end());
  }

  static SectorGenerator null(std::size_t sites) { return SectorGenerator(sites, {}); }

  std::size_t sites() const { return sites_; }
  std::span<const RateEdge> edges() const { return edges_; }
  std::span<const double> outflow() const { return outflow_; }
  double max_outflow() const { return max_outflow_; }

  /// dp = L p. Each site gathers its own terms in a fixed order, so the
  /// result does not depend on the worker count.
  void apply(std::span<const double> p, std::span<double> dp) const {
    const unsigned workers = sites_ >= kParallelThreshold ? worker_count() : 1u;
    if (workers <= 1) {
      apply_range(p, dp, 0, sites_);
      return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (sites_ + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(sites_, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([this, p, dp, lo, hi] { apply_range(p, dp, lo, hi); });
    }
  }

 private:
  static constexpr std::size_t kParallelThreshold = 1u << 16;

  void apply_range(std::span<const double> p, std::span<double> dp, std::size_t lo, std::size_t hi) const {
    for (std::size_t i = lo; i < hi; ++i) {
      double acc = -outflow_[i] * p[i];
      for (std::size_t k = incoming_offsets_[i]; k < incoming_offsets_[i + 1]; ++k) {
        const auto& e = edges_[incoming_[k]];
        acc += e.rate * p[e.source];
      }
      dp[i] = acc;
    }
  }

  std::size_t sites_;
  std::vector<RateEdge> edges_;
  std::vector<double> outflow_;
  std::vector<std::size_t> incoming_offsets_;
  std::vector<std::size_t> incoming_;
  double max_outflow_ = 0.0;
};

/// Generator for arbitrary tabulated energies. A spin leaving level a for
/// a neighbouring level contributes count_a/(c T) * K(H_target - H_source)
/// with c = 2 for spin-1/2 and c = 1 for spin-1; in the moment notation this
/// is the flux form of the lumped single-flip master equation, whose gain
/// coefficients are the source-site fractions.
inline SectorGenerator build_generator(const MomentLattice& lattice, std::span<const double> energies,
                                       const BathKernel& kernel) {
  if (energies.size() != lattice.size()) throw std::invalid_argument("energy table does not match lattice");
  const double prefactor = 1.0 / (kernel.temperature() * (lattice.spin() == Spin::Half ? 2.0 : 1.0));
  const auto flips = lattice.flips();
  std::vector<RateEdge> edges;
  edges.reserve(lattice.size() * flips.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    for (std::size_t f = 0; f < flips.size(); ++f) {
      const int count = source_count(lattice.site(i), flips[f]);
      const std::size_t j = lattice.neighbor(i, f);
      if (count == 0) {
        if (j != MomentLattice::npos) throw std::logic_error("neighbour without source spins");
        continue;
      }
      if (j == MomentLattice::npos) throw std::logic_error("flip with source spins leaves the lattice");
      edges.push_back({i, j, count * prefactor * kernel(energies[j] - energies[i])});
    }
  }
  return SectorGenerator(lattice.size(), std::move(edges));
}

inline SectorGenerator build_generator(const ModelConfig& cfg, Sector s, const MomentLattice& lattice) {
  cfg.validate();
  if (!is_member(cfg.spin, s)) throw std::invalid_argument("sector " + to_string(s) + " is not an s_z eigenvalue");
  if (lattice.spin() != cfg.spin || lattice.N() != cfg.N) throw std::invalid_argument("lattice does not match config");
  const auto energies = sector_energies(lattice, cfg, s);
  return build_generator(lattice, energies, BathKernel(cfg.T, cfg.Gamma));
}

class EvolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvolveControls {
  /// Step dtau = safety / max outflow rate.
  double safety = 0.1;
  /// Times at which snapshots are kept; tau_end is always appended.
  std::vector<double> checkpoints;
  /// Times hit exactly (the observer sees tau == waypoint) but not stored.
  std::vector<double> waypoints;
  double norm_tolerance = 1e-9;
  double negativity_tolerance = 1e-9;
  double min_step = 1e-14;
};

struct EvolveReport {
  std::size_t steps = 0;
  double max_step = 0.0;
  double max_norm_drift = 0.0;
  double min_value = std::numeric_limits<double>::infinity();
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> snapshots;
  Distribution final_state;
  EvolveReport report;
};

/// Classical RK4 in tau. Steps never exceed safety/max_outflow and are
/// shortened so that every checkpoint is hit exactly. `observer(tau, p)` is
/// called at the start and after every step.
template <class Observer>
Trajectory evolve(const Distribution& initial, const SectorGenerator& gen, double tau_end,
                  const EvolveControls& controls, Observer&& observer) {
  if (!(tau_end >= 0.0) || !std::isfinite(tau_end)) throw std::invalid_argument("tau_end must be >= 0");
  if (gen.sites() != initial.lattice().size()) throw std::invalid_argument("generator does not match distribution");
  if (!(controls.safety > 0.0)) throw std::invalid_argument("safety factor must be positive");

  auto sorted_unique = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  std::vector<double> kept = controls.checkpoints;
  kept.push_back(tau_end);
  kept = sorted_unique(std::move(kept));
  std::vector<double> stops = kept;
  stops.insert(stops.end(), controls.waypoints.begin(), controls.waypoints.end());
  stops = sorted_unique(std::move(stops));
  if (stops.front() < 0.0 || stops.back() > tau_end) throw std::invalid_argument("checkpoint outside [0, tau_end]");

  const std::size_t n = gen.sites();
  std::vector<double> p(initial.values().begin(), initial.values().end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);
  const double total0 = std::accumulate(p.begin(), p.end(), 0.0);
  const double rho = gen.max_outflow();
  const double h_max = rho > 0.0 ? controls.safety / rho : std::numeric_limits<double>::infinity();

  Trajectory traj{{}, {}, initial, {}};
  auto check = [&](double tau) {
    double total = 0.0;
    double lowest = std::numeric_limits<double>::infinity();
    for (double v : p) {
      total += v;
      lowest = std::min(lowest, v);
    }
    const double drift = std::abs(total - total0);
    traj.report.max_norm_drift = std::max(traj.report.max_norm_drift, drift);
    traj.report.min_value = std::min(traj.report.min_value, lowest);
    if (drift > controls.norm_tolerance) {
      throw EvolveError("normalization drift " + std::to_string(drift) + " at tau=" + std::to_string(tau));
    }
    if (lowest < -controls.negativity_tolerance) {
      throw EvolveError("probability undershoot " + std::to_string(lowest) + " at tau=" + std::to_string(tau));
    }
  };

  double tau = 0.0;
  check(tau);
  observer(tau, std::span<const double>(p));
  for (double stop : stops) {
    const double span = stop - tau;
    if (span > 0.0) {
      const double raw = rho > 0.0 ? std::ceil(span / h_max) : 1.0;
      if (raw > 1e12) throw EvolveError("step size underflow");
      const auto steps = static_cast<std::size_t>(std::max(1.0, raw));
      const double h = span / static_cast<double>(steps);
      if (h < controls.min_step) throw EvolveError("step size underflow");
      traj.report.max_step = std::max(traj.report.max_step, h);
      for (std::size_t step = 0; step < steps; ++step) {
        gen.apply(p, k1);
        for (std::size_t i = 0; i < n; ++i) stage[i] = p[i] + 0.5 * h * k1[i];
        gen.apply(stage, k2);
        for (std::size_t i = 0; i < n; ++i) stage[i] = p[i] + 0.5 * h * k2[i];
        gen.apply(stage, k3);
        for (std::size_t i = 0; i < n; ++i) stage[i] = p[i] + h * k3[i];
        gen.apply(stage, k4);
        for (std::size_t i = 0; i < n; ++i) p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        tau = step + 1 == steps ? stop : tau + h;
        ++traj.report.steps;
        check(tau);
        observer(tau, std::span<const double>(p));
      }
    }
    tau = stop;
    if (std::binary_search(kept.begin(), kept.end(), stop)) {
      traj.times.push_back(stop);
      traj.snapshots.push_back(p);
    }
  }
  traj.final_state = Distribution(initial.lattice_ptr(), std::move(p));
  return traj;
}

inline Trajectory evolve(const Distribution& initial, const SectorGenerator& gen, double tau_end,
                         const EvolveControls& controls = {}) {
  return evolve(initial, gen, tau_end, controls, [](double, std::span<const double>) {});
}

}  // namespace cwsim

#endif  // CWSIM_REGISTRATION_HPP
