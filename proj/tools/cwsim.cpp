// cwsim: command-line driver for registration, truncation, Gibbs states,
// decoupling, energetics and the small-N oracle check.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cwsim/cwsim.hpp"
#include "cwsim/oracle.hpp"

namespace fs = std::filesystem;
using namespace cwsim;

namespace {

struct CommonArgs {
  std::string config_file;
  std::string out_dir;
  std::map<std::string, std::string> overrides;
};

/// Adds --config, --out and one flag per model key to a subcommand.
void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  for (const auto& key : model_keys()) {
    std::string flag = "--" + key;
    if (key == "delta_g_std") flag += ",--delta-g-std";
    if (key == "rng_seed") flag += ",--rng-seed";
    cmd->add_option_function<std::string>(
        flag, [&args, key](const std::string& v) { args.overrides[key] = v; }, "override " + key);
  }
}

ModelConfig resolve(const CommonArgs& args) {
  std::map<std::string, std::string> kv;
  if (!args.config_file.empty()) kv = read_config_file(args.config_file);
  for (const auto& [k, v] : args.overrides) kv[k] = v;
  ModelConfig cfg;
  apply_settings(cfg, kv);
  cfg.validate();
  if (!is_member(cfg.spin, cfg.sector)) throw std::invalid_argument("sector not an s_z eigenvalue for this spin");
  return cfg;
}

std::vector<double> parse_times(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size() || !(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("bad time '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

const std::vector<std::string> kSeriesHeader{"tau", "F_dyn", "U", "S", "m1_mean", "m2_mean", "total_prob"};

void write_series(const fs::path& path, const ThermoSeries& series, double tau_offset = 0.0) {
  CsvWriter csv(path, kSeriesHeader);
  for (const auto& pt : series.points) {
    const std::optional<double> m2 = series.spin == Spin::One ? std::optional<double>(pt.m2_mean) : std::nullopt;
    csv.row(std::vector<std::optional<double>>{pt.tau + tau_offset, pt.f_dyn, pt.energy, pt.entropy, pt.m1_mean, m2,
                                               pt.total});
  }
  csv.close();
}

void write_snapshot(const fs::path& path, const MomentLattice& lattice, std::span<const double> p, double pmin) {
  const bool one = lattice.spin() == Spin::One;
  CsvWriter csv(path, one ? std::vector<std::string>{"m1", "m2", "P"} : std::vector<std::string>{"m1", "P"});
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (p[i] < pmin) continue;
    const auto m = lattice.moments(i);
    if (one) {
      csv.row(std::vector<double>{m.m1, m.m2, p[i]});
    } else {
      csv.row(std::vector<double>{m.m1, p[i]});
    }
  }
  csv.close();
}

/// Writes the manifest, runs `body`, and clears the FAILED marker on success.
template <class Body>
void run_guarded(const RunManifest& manifest, Body&& body) {
  manifest.write();
  FailureMarker marker(manifest.output_dir);
  body();
  marker.commit();
}

struct RegisterArgs {
  double tau_max = 25.0;
  std::string snapshots;
  double pmin = 0.0;
  double record_every = 0.1;
  double safety = 0.1;
};

void cmd_register(const CommonArgs& common, const RegisterArgs& args) {
  const auto cfg = resolve(common);
  const auto snapshots = parse_times(args.snapshots);
  for (double t : snapshots) {
    if (t > args.tau_max) throw std::invalid_argument("snapshot time " + format_number(t) + " beyond --tau-max");
  }
  RunManifest manifest{cfg, "register", snapshots, common.out_dir,
                       {{"tau_max", format_number(args.tau_max)},
                        {"pmin", format_number(args.pmin)},
                        {"record_every", format_number(args.record_every)},
                        {"safety", format_number(args.safety)}}};
  run_guarded(manifest, [&] {
    RunOptions options;
    options.record_every = args.record_every;
    options.snapshot_times = snapshots;
    options.safety = args.safety;
    auto lattice = std::make_shared<const MomentLattice>(cfg.spin, cfg.N);
    const auto run = run_registration(cfg, cfg.sector, initial_paramagnet(lattice), args.tau_max, options);
    const fs::path out(common.out_dir);
    write_series(out / "timeseries.csv", run.series);
    for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
      write_snapshot(out / ("snapshot_" + format_number(run.snapshot_times[k]) + ".csv"), *lattice, run.snapshots[k],
                     args.pmin);
    }
    std::cerr << "register: " << run.report.steps << " steps, max norm drift " << run.report.max_norm_drift
              << ", min P " << run.report.min_value << '\n';
  });
}

struct TruncateArgs {
  double gamma = 1e-3;
  std::string partner;
  std::optional<double> t_max;
  int points = 3001;
};

void cmd_truncate(const CommonArgs& common, const TruncateArgs& args) {
  const auto cfg = resolve(common);
  if (cfg.spin != Spin::One) throw std::invalid_argument("truncate is implemented for spin one only");
  const Sector s = cfg.sector;
  const Sector partner = args.partner.empty() ? (s.twice() == 2 ? Sector{} : Sector::from_twice(2))
                                              : sector_from_string(args.partner, cfg.spin);
  if (args.points < 2) throw std::invalid_argument("--points must be >= 2");
  if (!(args.gamma >= 0.0)) throw std::invalid_argument("--gamma must be >= 0");
  const double t_max = args.t_max.value_or(3.0 * recurrence_time(cfg));
  RunManifest manifest{cfg, "truncate", {}, common.out_dir,
                       {{"gamma", format_number(args.gamma)},
                        {"partner", to_string(partner)},
                        {"t_max", format_number(t_max)},
                        {"points", std::to_string(args.points)}}};
  run_guarded(manifest, [&] {
    const auto pair = OffDiagonalPair::make(cfg, s, partner);
    CsvWriter csv(fs::path(common.out_dir) / "truncation.csv", {"t", "re_ratio", "im_ratio", "envelope_upper"});
    for (int k = 0; k < args.points; ++k) {
      const double t = t_max * k / (args.points - 1);
      const auto r = offdiag_envelope(t, pair, cfg, args.gamma);
      csv.row(std::vector<double>{t, r.real(), r.imag(), envelope_upper(t, pair, cfg, args.gamma)});
    }
    csv.close();
  });
}

void cmd_gibbs(const CommonArgs& common) {
  const auto cfg = resolve(common);
  RunManifest manifest{cfg, "gibbs", {}, common.out_dir, {}};
  run_guarded(manifest, [&] {
    const MomentLattice lattice(cfg.spin, cfg.N);
    const fs::path out(common.out_dir);
    CsvWriter csv(out / "gibbs.csv", {"sector", "restriction", "lnZ", "F_s", "m1_mean", "m2_mean"});
    for (Sector s : sectors_of(cfg.spin)) {
      for (Restriction r : {Restriction::None, Restriction::Basin, Restriction::Peak}) {
        const auto g = gibbs(cfg, s, lattice, r);
        const std::string m2 = cfg.spin == Spin::One ? format_number(g.obs.m2_mean) : "";
        csv.text_row({format_number(s.value()), to_string(r), format_number(g.log_z), format_number(g.free_energy),
                      format_number(g.obs.m1_mean), m2});
      }
    }
    csv.close();
    if (cfg.spin == Spin::One) {
      CsvWriter limit(out / "gibbs_limit.csv", {"g", "m2_finite_N", "m2_limit_mean_field", "m2_limit_extrapolated"});
      for (double g : {cfg.g, 0.0}) {
        const auto c = with_coupling(cfg, g);
        const double finite = gibbs(c, Sector{}, lattice, Restriction::Basin).obs.m2_mean;
        limit.row(std::vector<double>{g, finite, gibbs_limit_m2(c), gibbs_limit_m2_extrapolated(c).limit});
      }
      limit.close();
    }
  });
}

struct DecoupleArgs {
  std::optional<double> t_dc;
  double tau_relax = 25.0;
  double record_every = 0.1;
  double plateau_slope = 1e-6;
  double tau_cap = 200.0;
};

void cmd_decouple(const CommonArgs& common, const DecoupleArgs& args) {
  const auto cfg = resolve(common);
  std::vector<std::pair<std::string, std::string>> extra{
      {"t_dc", args.t_dc ? format_number(*args.t_dc) : "plateau"},
      {"tau_relax", format_number(args.tau_relax)},
      {"record_every", format_number(args.record_every)},
      {"plateau_slope", format_number(args.plateau_slope)}};
  RunManifest manifest{cfg, "decouple", {}, common.out_dir, extra};
  run_guarded(manifest, [&] {
    RunOptions options;
    options.record_every = args.record_every;
    std::optional<RegistrationRun> found;
    double t_dc = 0.0;
    if (args.t_dc) {
      t_dc = *args.t_dc;
      found = run_registration(cfg, cfg.sector, t_dc, options);
    } else {
      auto plateau = register_until_plateau(cfg, cfg.sector, args.plateau_slope, 1.0, args.tau_cap, options);
      if (!plateau.reached) throw std::runtime_error("F_dyn did not plateau before tau = " + format_number(args.tau_cap));
      t_dc = plateau.t_dc;
      found = std::move(plateau.run);
    }
    const auto& reg = *found;
    const auto relax = post_decoupling_relax(reg.final_state, cfg, cfg.sector, args.tau_relax, options);
    const auto cfg0 = with_coupling(cfg, 0.0);
    const auto target = gibbs(cfg0, cfg.sector, reg.final_state.lattice(), Restriction::Basin);

    const fs::path dir = fs::path(common.out_dir) / "decouple";
    fs::create_directories(dir);
    write_series(dir / "timeseries.csv", reg.series);
    write_series(dir / "relax_timeseries.csv", relax.series, t_dc);
    write_snapshot(dir / ("snapshot_" + format_number(t_dc) + ".csv"), reg.final_state.lattice(),
                   reg.final_state.values(), 0.0);
    CsvWriter csv(dir / "summary.csv", {"t_dc", "U_dc", "m1_at_tdc", "m2_at_tdc", "m1_final", "m2_final",
                                        "F_dyn_0", "F_dyn_at_tdc", "F_dyn_final", "F_gibbs_g0"});
    const auto& first = reg.series.points.front();
    const auto& at_dc = reg.series.points.back();
    const auto& last = relax.series.points.back();
    const bool one = cfg.spin == Spin::One;
    csv.row(std::vector<std::optional<double>>{
        t_dc, decoupling_energy(reg.final_state, cfg, cfg.sector), at_dc.m1_mean,
        one ? std::optional<double>(at_dc.m2_mean) : std::nullopt, last.m1_mean,
        one ? std::optional<double>(last.m2_mean) : std::nullopt, first.f_dyn, at_dc.f_dyn, last.f_dyn,
        target.free_energy});
    csv.close();
  });
}

void cmd_energetics(const CommonArgs& common) {
  const auto cfg = resolve(common);
  RunManifest manifest{cfg, "energetics", {}, common.out_dir, {}};
  run_guarded(manifest, [&] {
    const MomentLattice lattice(cfg.spin, cfg.N);
    const auto eq = gibbs(cfg, cfg.sector, lattice, Restriction::Basin);
    const double u_dc = decoupling_energy(eq.p, lattice, cfg, cfg.sector);
    const auto reset = reset_energy(cfg);
    CsvWriter csv(fs::path(common.out_dir) / "energetics.csv", {"U_dc", "U_reset", "U_reset_per_spin", "F_pm", "F_G"});
    csv.row(std::vector<double>{u_dc, reset.u_reset, reset.per_spin, reset.f_pm, reset.f_g});
    csv.close();
  });
}

struct OracleArgs {
  std::string taus = "0.1,1,5";
  double safety = 0.005;
};

void cmd_oracle_check(const CommonArgs& common, const OracleArgs& args) {
  const auto cfg = resolve(common);
  if (cfg.N > ConfigurationSpace::kMaxSpins) throw std::invalid_argument("oracle-check refuses N > 4");
  const auto taus = parse_times(args.taus);
  if (taus.empty()) throw std::invalid_argument("--taus is empty");
  RunManifest manifest{cfg, "oracle-check", taus, common.out_dir, {{"safety", format_number(args.safety)}}};
  run_guarded(manifest, [&] {
    const auto exact = oracle_evolve(cfg, cfg.sector, taus);
    auto lattice = std::make_shared<const MomentLattice>(cfg.spin, cfg.N);
    EvolveControls controls;
    controls.safety = args.safety;
    controls.checkpoints = taus;
    double tau_end = 0.0;
    for (double t : taus) tau_end = std::max(tau_end, t);
    const auto traj = evolve(initial_paramagnet(lattice), build_generator(cfg, cfg.sector, *lattice), tau_end, controls);
    CsvWriter csv(fs::path(common.out_dir) / "oracle_report.csv", {"tau", "max_abs_dev"});
    for (std::size_t k = 0; k < taus.size(); ++k) {
      const auto it = std::find(traj.times.begin(), traj.times.end(), taus[k]);
      const auto& p = traj.snapshots[static_cast<std::size_t>(it - traj.times.begin())];
      double dev = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) dev = std::max(dev, std::abs(p[i] - exact[k][i]));
      csv.row(std::vector<double>{taus[k], dev});
    }
    csv.close();
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curie-Weiss quantum measurement simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  CommonArgs common;

  RegisterArgs reg;
  auto* c_register = app.add_subcommand("register", "evolve P_s from the paramagnet and record F_dyn");
  add_common(c_register, common);
  c_register->add_option("--tau-max", reg.tau_max, "run length in units 1/(gamma T)")->check(CLI::NonNegativeNumber);
  c_register->add_option("--snapshots", reg.snapshots, "comma-separated snapshot times");
  c_register->add_option("--pmin", reg.pmin, "omit snapshot sites with P below this")->check(CLI::NonNegativeNumber);
  c_register->add_option("--record-every", reg.record_every, "time-series spacing")->check(CLI::PositiveNumber);
  c_register->add_option("--safety", reg.safety, "RK4 step = safety / max outflow")->check(CLI::PositiveNumber);

  TruncateArgs trunc;
  auto* c_truncate = app.add_subcommand("truncate", "off-diagonal decay r(t)/r(0)");
  add_common(c_truncate, common);
  c_truncate->add_option("--gamma", trunc.gamma, "bath coupling gamma, illustrative (0 disables damping)");
  c_truncate->add_option("--partner", trunc.partner, "second sector s~ (default 1, or 0 when sector = 1)");
  c_truncate->add_option("--t-max", trunc.t_max, "grid end in raw t (default 3 t_1)");
  c_truncate->add_option("--points", trunc.points, "grid points including both ends");

  auto* c_gibbs = app.add_subcommand("gibbs", "Gibbs and restricted Gibbs states");
  add_common(c_gibbs, common);

  DecoupleArgs dec;
  auto* c_decouple = app.add_subcommand("decouple", "register to t_dc, switch g off and relax");
  add_common(c_decouple, common);
  c_decouple->add_option("--t-dc", dec.t_dc, "decoupling time (default: F_dyn plateau)");
  c_decouple->add_option("--tau-relax", dec.tau_relax, "relaxation length after decoupling")
      ->check(CLI::NonNegativeNumber);
  c_decouple->add_option("--record-every", dec.record_every, "time-series spacing")->check(CLI::PositiveNumber);
  c_decouple->add_option("--plateau-slope", dec.plateau_slope, "relative F_dyn slope that marks the plateau");
  c_decouple->add_option("--tau-cap", dec.tau_cap, "give up looking for the plateau after this time");

  auto* c_energetics = app.add_subcommand("energetics", "decoupling and reset energies");
  add_common(c_energetics, common);

  OracleArgs orc;
  auto* c_oracle = app.add_subcommand("oracle-check", "compare against the configuration-space oracle (N <= 4)");
  add_common(c_oracle, common);
  c_oracle->add_option("--taus", orc.taus, "comma-separated check times");
  c_oracle->add_option("--safety", orc.safety, "RK4 step = safety / max outflow")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_register->parsed()) cmd_register(common, reg);
    if (c_truncate->parsed()) cmd_truncate(common, trunc);
    if (c_gibbs->parsed()) cmd_gibbs(common);
    if (c_decouple->parsed()) cmd_decouple(common, dec);
    if (c_energetics->parsed()) cmd_energetics(common);
    if (c_oracle->parsed()) cmd_oracle_check(common, orc);
  } catch (const std::exception& e) {
    std::cerr << "cwsim: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
