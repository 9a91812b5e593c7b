#ifndef CWSIM_THERMO_HPP
#define CWSIM_THERMO_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cwsim/config.hpp"
#include "cwsim/lattice.hpp"
#include "cwsim/model.hpp"
#include "cwsim/registration.hpp"

namespace cwsim {

/// ln sum exp(x_i), stable for large |x_i|.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - top);
  return top + std::log(acc);
}

struct Observables {
  double m1_mean = 0.0;
  double m2_mean = 0.0;
  double energy = 0.0;   // U = sum P H_s
  double entropy = 0.0;  // S = -sum P ln(P/G_N)
  double total = 0.0;
};

/// Moments and thermodynamic functionals of P against an energy table.
inline Observables observables(std::span<const double> p, const MomentLattice& lattice,
                               std::span<const double> energies) {
  if (p.size() != lattice.size() || energies.size() != lattice.size()) {
    throw std::invalid_argument("observables: size mismatch");
  }
  const auto log_g = lattice.log_degeneracy();
  Observables obs;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    const Moments m = lattice.moments(i);
    obs.total += v;
    obs.m1_mean += v * m.m1;
    obs.m2_mean += v * m.m2;
    obs.energy += v * energies[i];
    if (v > 0.0) obs.entropy -= v * (std::log(v) - log_g[i]);
  }
  return obs;
}

inline Observables observables(const Distribution& p, const ModelConfig& cfg, Sector s) {
  return observables(p.values(), p.lattice(), sector_energies(p.lattice(), cfg, s));
}

/// F_dyn = sum P [H_s + T ln(P/G_N)].
inline double dynamical_free_energy(std::span<const double> p, const MomentLattice& lattice,
                                    std::span<const double> energies, double T) {
  const auto obs = observables(p, lattice, energies);
  return obs.energy - T * obs.entropy;
}

inline double dynamical_free_energy(const Distribution& p, const ModelConfig& cfg, Sector s) {
  return dynamical_free_energy(p.values(), p.lattice(), sector_energies(p.lattice(), cfg, s), cfg.T);
}

struct ThermoPoint {
  double tau = 0.0;
  double f_dyn = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  double m1_mean = 0.0;
  double m2_mean = 0.0;
  double total = 0.0;
};

struct ThermoSeries {
  Spin spin = Spin::One;
  std::vector<ThermoPoint> points;
};

/// Per-step check that F_dyn never rises by more than rel_tolerance*|F_dyn(0)|.
class HTheoremMonitor {
 public:
  explicit HTheoremMonitor(double rel_tolerance = 1e-8) : rel_tolerance_(rel_tolerance) {}

  /// Feeds the next value; throws EvolveError on a violation.
  void observe(double tau, double f_dyn) {
    if (!started_) {
      started_ = true;
      tolerance_ = rel_tolerance_ * std::max(std::abs(f_dyn), std::numeric_limits<double>::min());
    } else {
      const double rise = f_dyn - last_;
      max_rise_ = std::max(max_rise_, rise);
      if (rise > tolerance_) {
        throw EvolveError("H-theorem violated: F_dyn rose by " + std::to_string(rise) +
                          " at tau=" + std::to_string(tau));
      }
    }
    last_ = f_dyn;
  }

  double tolerance() const { return tolerance_; }
  /// Largest single-step increase seen (negative if F_dyn always fell).
  double max_rise() const { return max_rise_; }
  double last() const { return last_; }

 private:
  double rel_tolerance_;
  bool started_ = false;
  double tolerance_ = 0.0;
  double last_ = 0.0;
  double max_rise_ = -std::numeric_limits<double>::infinity();
};

struct RunOptions {
  double record_every = 0.1;
  std::vector<double> snapshot_times;
  double safety = 0.1;
  double h_tolerance = 1e-8;
};

struct RegistrationRun {
  ThermoSeries series;
  std::vector<double> snapshot_times;
  std::vector<std::vector<double>> snapshots;
  Distribution final_state;
  EvolveReport report;
  double max_f_rise = 0.0;
  double h_tolerance = 0.0;
};

/// Evolves P under the given energy table and records thermodynamics on a
/// regular tau grid. The H-theorem monitor sees every step.
inline RegistrationRun run_relaxation(const Distribution& initial, std::span<const double> energies, double T,
                                      double Gamma, double tau_end, const RunOptions& options = {}) {
  const auto& lattice = initial.lattice();
  const auto gen = build_generator(lattice, energies, BathKernel(T, Gamma));
  if (!(options.record_every > 0.0)) throw std::invalid_argument("record_every must be positive");

  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor(tau_end / options.record_every + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) grid.push_back(std::min(tau_end, k * options.record_every));
  grid.push_back(tau_end);
  grid.insert(grid.end(), options.snapshot_times.begin(), options.snapshot_times.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  EvolveControls controls;
  controls.safety = options.safety;
  controls.checkpoints = options.snapshot_times;
  controls.waypoints = grid;

  ThermoSeries series{lattice.spin(), {}};
  HTheoremMonitor monitor(options.h_tolerance);
  std::size_t next = 0;
  auto observer = [&](double tau, std::span<const double> p) {
    const auto obs = observables(p, lattice, energies);
    const double f = obs.energy - T * obs.entropy;
    monitor.observe(tau, f);
    while (next < grid.size() && grid[next] < tau) ++next;
    if (next < grid.size() && grid[next] == tau) {
      series.points.push_back({tau, f, obs.energy, obs.entropy, obs.m1_mean, obs.m2_mean, obs.total});
      ++next;
    }
  };
  auto traj = evolve(initial, gen, tau_end, controls, observer);

  RegistrationRun run{std::move(series), {}, {}, traj.final_state, traj.report, monitor.max_rise(),
                      monitor.tolerance()};
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (std::find(options.snapshot_times.begin(), options.snapshot_times.end(), traj.times[k]) ==
        options.snapshot_times.end()) {
      continue;
    }
    run.snapshot_times.push_back(traj.times[k]);
    run.snapshots.push_back(std::move(traj.snapshots[k]));
  }
  return run;
}

/// Registration in sector s from an arbitrary initial distribution.
inline RegistrationRun run_registration(const ModelConfig& cfg, Sector s, const Distribution& initial, double tau_end,
                                        const RunOptions& options = {}) {
  cfg.validate();
  if (!is_member(cfg.spin, s)) throw std::invalid_argument("sector " + to_string(s) + " is not an s_z eigenvalue");
  const auto energies = sector_energies(initial.lattice(), cfg, s);
  return run_relaxation(initial, energies, cfg.T, cfg.Gamma, tau_end, options);
}

/// Registration from the paramagnetic start.
inline RegistrationRun run_registration(const ModelConfig& cfg, Sector s, double tau_end,
                                        const RunOptions& options = {}) {
  auto lattice = std::make_shared<const MomentLattice>(cfg.spin, cfg.N);
  return run_registration(cfg, s, initial_paramagnet(lattice), tau_end, options);
}

enum class Restriction { None, Basin, Peak };

inline std::string to_string(Restriction r) {
  switch (r) {
    case Restriction::None: return "none";
    case Restriction::Basin: return "basin";
    case Restriction::Peak: return "peak";
  }
  return "none";
}

/// Basin of the pointer state of sector s, with lattice points on the cut
/// excluded. Spin-1: s=0 keeps m2 < 1/3, s=+-1 keeps s m1 > 1/3. Spin-1/2:
/// s m1 > 0. Integer comparisons avoid rounding at the cut.
inline bool in_basin(const LatticeSite& site, Spin spin, Sector s, int n) {
  const int diff = site.up - site.down;  // N m1 (spin-1), 2 N m1 (spin-1/2)
  if (spin == Spin::Half) return s.twice() * diff > 0;
  if (s.twice() == 0) return 3 * site.n2() < n;
  return 3 * (s.twice() / 2) * diff > n;
}

/// Max-norm radius in (m1, m2) of the peak-neighbourhood restriction.
inline constexpr double kPeakRadius = 0.2;

struct GibbsState {
  std::vector<double> p;
  double log_z = 0.0;
  double free_energy = 0.0;  // -T ln Z
  Observables obs;
};

/// P proportional to G_N exp(-H_s/T), on the full lattice or on a
/// restricted region. Basin uses the 1/3 cut; Peak keeps the sites within
/// kPeakRadius of the most probable basin site.
inline GibbsState gibbs(const ModelConfig& cfg, Sector s, const MomentLattice& lattice,
                        Restriction restriction = Restriction::None) {
  cfg.validate();
  if (!is_member(cfg.spin, s)) throw std::invalid_argument("sector " + to_string(s) + " is not an s_z eigenvalue");
  const auto energies = sector_energies(lattice, cfg, s);
  const auto log_g = lattice.log_degeneracy();
  std::vector<double> logw(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) logw[i] = log_g[i] - energies[i] / cfg.T;

  std::vector<bool> keep(lattice.size(), true);
  if (restriction != Restriction::None) {
    for (std::size_t i = 0; i < lattice.size(); ++i) keep[i] = in_basin(lattice.site(i), cfg.spin, s, lattice.N());
  }
  if (restriction == Restriction::Peak) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      if (keep[i] && (!best || logw[i] > logw[*best])) best = i;
    }
    if (best) {
      const Moments c = lattice.moments(*best);
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        const Moments m = lattice.moments(i);
        keep[i] = keep[i] && std::abs(m.m1 - c.m1) <= kPeakRadius && std::abs(m.m2 - c.m2) <= kPeakRadius;
      }
    }
  }

  std::vector<double> kept;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (keep[i]) kept.push_back(logw[i]);
  }
  if (kept.empty()) throw std::runtime_error("restricted Gibbs region is empty");

  GibbsState state;
  state.log_z = log_sum_exp(kept);
  state.free_energy = -cfg.T * state.log_z;
  state.p.assign(lattice.size(), 0.0);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (keep[i]) state.p[i] = std::exp(logw[i] - state.log_z);
  }
  state.obs = observables(state.p, lattice, energies);
  return state;
}

inline GibbsState gibbs(const ModelConfig& cfg, Sector s, Restriction restriction = Restriction::None) {
  return gibbs(cfg, s, MomentLattice(cfg.spin, cfg.N), restriction);
}

/// Large-N restricted <m2> in the s=0 sector. With m1 = 0 the free-energy
/// density depends on m2 alone; its stationary point in (0, 1/3) satisfies
/// m2 = 2 e^{-f'/T} / (1 + 2 e^{-f'/T}).
inline double gibbs_limit_m2(const ModelConfig& cfg) {
  cfg.validate();
  if (cfg.spin != Spin::One) throw std::invalid_argument("large-N limit is implemented for spin-1 only");
  auto slope = [&](double m2) {
    const double co = 1.0 - 1.5 * m2;
    const double c = co * co;
    const double energy_slope = 3.0 * co * (0.5 * cfg.J2 + 0.5 * cfg.J4 * c) + 1.5 * cfg.g;
    return energy_slope - cfg.T * std::log(2.0 * (1.0 - m2) / m2);
  };
  // The first sign change of the slope on a log grid brackets the minimum
  // (a barrier top may follow it before 1/3); bisection in ln m2 refines it.
  const double start = std::log(1e-300);
  const double stop = std::log(1.0 / 3.0);
  const int cells = 4000;
  double lo = start;
  double hi = start;
  bool bracketed = false;
  if (slope(std::exp(start)) < 0.0) {
    for (int k = 1; k <= cells && !bracketed; ++k) {
      hi = start + (stop - start) * k / cells;
      if (slope(std::exp(hi)) > 0.0) {
        bracketed = true;
      } else {
        lo = hi;
      }
    }
  }
  if (!bracketed) throw std::runtime_error("no metastable paramagnetic minimum");
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(std::exp(mid)) > 0.0 ? hi : lo) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

struct LimitExtrapolation {
  std::vector<int> sizes;
  std::vector<double> values;
  double limit = 0.0;
};

/// Polynomial extrapolation in 1/N of the finite-N basin <m2> (s=0).
inline LimitExtrapolation gibbs_limit_m2_extrapolated(const ModelConfig& cfg, std::vector<int> sizes = {400, 800, 1600}) {
  if (sizes.size() < 2) throw std::invalid_argument("extrapolation needs at least two sizes");
  LimitExtrapolation out;
  out.sizes = sizes;
  for (int n : sizes) out.values.push_back(gibbs(with_size(cfg, n), Sector{}, Restriction::Basin).obs.m2_mean);
  // Lagrange interpolant in x = 1/N evaluated at x = 0.
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    double w = 1.0;
    const double xi = 1.0 / sizes[i];
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      if (j == i) continue;
      const double xj = 1.0 / sizes[j];
      w *= (0.0 - xj) / (xi - xj);
    }
    out.limit += w * out.values[i];
  }
  return out;
}

/// U_dc = -sum P H_SA, the work needed to switch g off.
inline double decoupling_energy(std::span<const double> p, const MomentLattice& lattice, const ModelConfig& cfg,
                                Sector s) {
  const auto h_sa = interaction_energies(lattice, cfg, s);
  double u = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) u -= p[i] * h_sa[i];
  return u;
}

inline double decoupling_energy(const Distribution& p, const ModelConfig& cfg, Sector s) {
  return decoupling_energy(p.values(), p.lattice(), cfg, s);
}

/// Relaxation with the g=0 generator from the state at t_dc.
inline RegistrationRun post_decoupling_relax(const Distribution& at_tdc, const ModelConfig& cfg, Sector s,
                                             double tau_end, const RunOptions& options = {}) {
  return run_registration(with_coupling(cfg, 0.0), s, at_tdc, tau_end, options);
}

struct PlateauRun {
  RegistrationRun run;
  double t_dc = 0.0;
  bool reached = false;
};

/// Registers in chunks until the relative F_dyn slope drops below
/// `rel_slope` per unit tau (or tau_cap is reached). t_dc is the end of
/// the first chunk that satisfies it.
inline PlateauRun register_until_plateau(const ModelConfig& cfg, Sector s, double rel_slope = 1e-6,
                                         double chunk = 1.0, double tau_cap = 200.0, RunOptions options = {}) {
  auto lattice = std::make_shared<const MomentLattice>(cfg.spin, cfg.N);
  const auto energies = sector_energies(*lattice, cfg, s);
  Distribution state = initial_paramagnet(lattice);
  options.snapshot_times.clear();
  PlateauRun out{{ThermoSeries{cfg.spin, {}}, {}, {}, state, {}, -std::numeric_limits<double>::infinity(), 0.0},
                 0.0, false};
  double tau = 0.0;
  while (tau < tau_cap) {
    const double span = std::min(chunk, tau_cap - tau);
    auto part = run_relaxation(state, energies, cfg.T, cfg.Gamma, span, options);
    const double f_start = part.series.points.front().f_dyn;
    const double f_end = part.series.points.back().f_dyn;
    for (std::size_t k = out.run.series.points.empty() ? 0 : 1; k < part.series.points.size(); ++k) {
      auto pt = part.series.points[k];
      pt.tau += tau;
      out.run.series.points.push_back(pt);
    }
    out.run.report.steps += part.report.steps;
    out.run.report.max_step = std::max(out.run.report.max_step, part.report.max_step);
    out.run.report.max_norm_drift = std::max(out.run.report.max_norm_drift, part.report.max_norm_drift);
    out.run.report.min_value = std::min(out.run.report.min_value, part.report.min_value);
    out.run.max_f_rise = std::max(out.run.max_f_rise, part.max_f_rise);
    out.run.h_tolerance = part.h_tolerance;
    state = part.final_state;
    tau += span;
    const double slope = std::abs(f_end - f_start) / (span * std::max(std::abs(f_end), 1e-300));
    if (slope < rel_slope) {
      out.reached = true;
      break;
    }
  }
  out.t_dc = tau;
  out.run.final_state = state;
  return out;
}

/// Pointer-state moments of sector +-1 implied by the s=0 value of <m2>.
inline Moments sector_map(double m2_s0, Sector target) {
  if (target.twice() == 0) return {0.0, m2_s0};
  if (target.twice() != 2 && target.twice() != -2) throw std::invalid_argument("sector_map is for spin-1 sectors");
  const double sign = target.twice() > 0 ? 1.0 : -1.0;
  return {sign * (1.0 - 1.5 * m2_s0), 1.0 - 0.5 * m2_s0};
}

struct ResetEnergetics {
  double u_reset = 0.0;
  double per_spin = 0.0;
  double f_pm = 0.0;  // -N T ln(2l+1)
  double f_g = 0.0;   // -T ln Z of P_G, i.e. sum P_G [H_M - T ln(G_N/P_G)]
};

/// U_reset = F_pm - F_G with F_G the free energy of P_G, the g=0 Gibbs
/// state of the pointer
/// (s=0 for spin-1, s=+1/2 for spin-1/2), restricted to its basin by
/// default. Restriction::None gives the unrestricted state, the one that
/// tends to the paramagnet as T grows.
inline ResetEnergetics reset_energy(const ModelConfig& cfg, Restriction restriction = Restriction::Basin) {
  const auto cfg0 = with_coupling(cfg, 0.0);
  const Sector s = cfg.spin == Spin::Half ? Sector::from_twice(1) : Sector{};
  const MomentLattice lattice(cfg.spin, cfg.N);
  const auto state = gibbs(cfg0, s, lattice, restriction);
  ResetEnergetics out;
  out.f_g = state.free_energy;
  out.f_pm = -cfg.N * cfg.T * std::log(static_cast<double>(multiplicity(cfg.spin)));
  out.u_reset = out.f_pm - out.f_g;
  out.per_spin = out.u_reset / cfg.N;
  return out;
}

}  // namespace cwsim

#endif  // CWSIM_THERMO_HPP
