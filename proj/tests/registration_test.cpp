#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "cwsim/registration.hpp"

namespace cwsim {
namespace {

std::shared_ptr<const MomentLattice> make_lattice(Spin spin, int n) {
  return std::make_shared<const MomentLattice>(spin, n);
}

std::vector<RateEdge> edges_from(const SectorGenerator& gen, std::size_t source) {
  std::vector<RateEdge> out;
  for (const auto& e : gen.edges()) {
    if (e.source == source) out.push_back(e);
  }
  return out;
}

TEST(Generator, FerromagneticCornerHasOneExit) {
  const ModelConfig cfg;
  const MomentLattice lattice(Spin::One, cfg.N);
  const auto gen = build_generator(cfg, Sector{}, lattice);
  const auto corner = lattice.index_of({0, 0, cfg.N}).value();
  const auto out = edges_from(gen, corner);
  ASSERT_EQ(out.size(), 1u);
  const auto target = lattice.moments(out[0].target);
  EXPECT_NEAR(target.m1, 1.0 - cfg.nu(), 1e-15);
  EXPECT_NEAR(target.m2, 1.0 - cfg.nu(), 1e-15);
}

TEST(Generator, AllZeroSiteHasTwoExits) {
  const ModelConfig cfg;
  const MomentLattice lattice(Spin::One, cfg.N);
  const auto gen = build_generator(cfg, Sector{}, lattice);
  const auto origin = lattice.index_of({0, cfg.N, 0}).value();
  const auto out = edges_from(gen, origin);
  ASSERT_EQ(out.size(), 2u);
  for (const auto& e : out) {
    const auto m = lattice.moments(e.target);
    EXPECT_NEAR(std::abs(m.m1), cfg.nu(), 1e-15);
    EXPECT_NEAR(m.m2, cfg.nu(), 1e-15);
  }
}

TEST(Generator, RatesNonNegativeAndConserving) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Spin spin : {Spin::Half, Spin::One}) {
    ModelConfig cfg;
    cfg.spin = spin;
    cfg.N = 17;
    const MomentLattice lattice(spin, cfg.N);
    for (Sector s : sectors_of(spin)) {
      const auto gen = build_generator(cfg, s, lattice);
      for (const auto& e : gen.edges()) EXPECT_GE(e.rate, 0.0);
      std::vector<double> p(lattice.size()), dp(lattice.size());
      for (auto& v : p) v = u(rng);
      gen.apply(p, dp);
      double sum = 0.0, scale = 0.0;
      for (double v : dp) {
        sum += v;
        scale += std::abs(v);
      }
      EXPECT_LE(std::abs(sum), 1e-14 * scale);
    }
  }
}

TEST(Generator, RejectsForeignSector) {
  ModelConfig cfg;
  const MomentLattice lattice(Spin::One, cfg.N);
  EXPECT_THROW(build_generator(cfg, Sector::from_twice(1), lattice), std::invalid_argument);
  cfg.spin = Spin::Half;
  EXPECT_THROW(build_generator(cfg, Sector{}, MomentLattice(Spin::Half, cfg.N)), std::invalid_argument);
}

TEST(Generator, GibbsStateIsStationary) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    ModelConfig cfg;
    cfg.spin = trial % 2 ? Spin::Half : Spin::One;
    cfg.N = 3 + trial * 2;
    cfg.J2 = u(rng);
    cfg.J4 = u(rng);
    cfg.g = std::abs(u(rng));
    cfg.T = 0.1 + std::abs(u(rng));
    cfg.Gamma = 1.0 + 10.0 * std::abs(u(rng));
    const MomentLattice lattice(cfg.spin, cfg.N);
    for (Sector s : sectors_of(cfg.spin)) {
      const auto h = sector_energies(lattice, cfg, s);
      std::vector<double> logw(lattice.size());
      double top = -INFINITY;
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        logw[i] = lattice.log_degeneracy()[i] - h[i] / cfg.T;
        top = std::max(top, logw[i]);
      }
      std::vector<double> p(lattice.size()), dp(lattice.size());
      double z = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logw[i] - top);
      for (auto& v : p) v /= z;
      const auto gen = build_generator(cfg, s, lattice);
      gen.apply(p, dp);
      for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_LE(std::abs(dp[i]), 1e-10 * gen.outflow()[i] * p[i] + 1e-300) << "trial " << trial << " site " << i;
      }
    }
  }
}

TEST(InitialParamagnet, NormalizedAndCentred) {
  for (Spin spin : {Spin::Half, Spin::One}) {
    const auto p = initial_paramagnet(make_lattice(spin, 100));
    EXPECT_NEAR(p.total(), 1.0, 1e-14);
    const auto peak = p.lattice().moments(p.argmax());
    EXPECT_EQ(peak.m1, 0.0);
    if (spin == Spin::One) {
      EXPECT_LE(std::abs(peak.m2 - 2.0 / 3), 1.0 / 100);
    }
  }
}

TEST(InitialParamagnet, GaussianDensityAtPeak) {
  const int n = 400;
  const auto p = initial_paramagnet(make_lattice(Spin::One, n));
  const auto i = p.argmax();
  const auto m = p.lattice().moments(i);
  const double q = 1.5 * m.m2 - 1.0;
  // mesh area 2/N^2 per site
  const double gauss = std::pow(3.0, 1.5) / (2.0 * std::numbers::pi * n) * std::exp(-n * (0.75 * m.m1 * m.m1 + q * q));
  EXPECT_LE(std::abs(p[i] / gauss - 1.0), 0.05);
}

TEST(Evolve, NullGeneratorKeepsState) {
  const auto lattice = make_lattice(Spin::One, 10);
  const auto p0 = initial_paramagnet(lattice);
  const auto traj = evolve(p0, SectorGenerator::null(lattice->size()), 3.0);
  for (std::size_t i = 0; i < lattice->size(); ++i) EXPECT_EQ(traj.final_state[i], p0[i]);
}

TEST(Evolve, ZeroLengthRun) {
  const ModelConfig cfg;
  const auto lattice = make_lattice(Spin::One, cfg.N);
  const auto p0 = initial_paramagnet(lattice);
  const auto traj = evolve(p0, build_generator(cfg, Sector{}, *lattice), 0.0);
  ASSERT_EQ(traj.times.size(), 1u);
  EXPECT_EQ(traj.times[0], 0.0);
  EXPECT_EQ(traj.report.steps, 0u);
}

TEST(Evolve, CheckpointsAreHitExactly) {
  ModelConfig cfg;
  cfg.N = 20;
  const auto lattice = make_lattice(Spin::One, cfg.N);
  EvolveControls controls;
  controls.checkpoints = {0.3, 1.0 / 3.0, 0.0};
  controls.waypoints = {0.25};
  std::vector<double> seen;
  const auto traj = evolve(initial_paramagnet(lattice), build_generator(cfg, Sector{}, *lattice), 1.0, controls,
                           [&](double tau, std::span<const double>) { seen.push_back(tau); });
  EXPECT_EQ(traj.times, (std::vector<double>{0.0, 0.3, 1.0 / 3.0, 1.0}));
  EXPECT_NE(std::find(seen.begin(), seen.end(), 0.25), seen.end());
  EXPECT_LE(traj.report.max_norm_drift, 1e-12);
  EXPECT_GE(traj.report.min_value, -1e-15);
}

TEST(Evolve, MirrorSectorsAgree) {
  ModelConfig cfg;
  cfg.N = 30;
  const auto lattice = make_lattice(Spin::One, cfg.N);
  const auto p0 = initial_paramagnet(lattice);
  const auto up = evolve(p0, build_generator(cfg, Sector::from_twice(2), *lattice), 4.0);
  const auto down = evolve(p0, build_generator(cfg, Sector::from_twice(-2), *lattice), 4.0);
  for (std::size_t i = 0; i < lattice->size(); ++i) {
    EXPECT_NEAR(up.final_state[i], down.final_state[lattice->mirror(i)], 1e-12);
  }
}

TEST(Evolve, SpinHalfPeakMovesToPositiveMagnetization) {
  ModelConfig cfg;
  cfg.spin = Spin::Half;
  cfg.sector = Sector::from_twice(1);
  const auto lattice = make_lattice(Spin::Half, cfg.N);
  const auto traj = evolve(initial_paramagnet(lattice), build_generator(cfg, cfg.sector, *lattice), 30.0);
  const auto peak = lattice->moments(traj.final_state.argmax());
  EXPECT_GE(peak.m1, 0.5 - 2.0 * cfg.nu());
}

TEST(Evolve, RejectsNegativeDuration) {
  const auto lattice = make_lattice(Spin::One, 4);
  EXPECT_THROW(evolve(initial_paramagnet(lattice), SectorGenerator::null(lattice->size()), -1.0),
               std::invalid_argument);
}

TEST(Evolve, UnstableStepAborts) {
  const auto lattice = make_lattice(Spin::One, 4);
  const SectorGenerator gen(lattice->size(), {{0, 1, 1.0}});
  EvolveControls controls;
  controls.safety = 50.0;  // far outside the RK4 stability region
  EXPECT_THROW(evolve(point_mass(lattice, 0), gen, 100.0, controls), EvolveError);
}

}  // namespace
}  // namespace cwsim
