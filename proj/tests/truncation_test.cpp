#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "cwsim/truncation.hpp"

namespace cwsim {
namespace {

const Sector kDown = Sector::from_twice(-2);
const Sector kZero = Sector::from_twice(0);
const Sector kUp = Sector::from_twice(2);

TEST(Dephasing, UnityAtZero) {
  const ModelConfig cfg;
  const auto pair = OffDiagonalPair::make(cfg, kZero, kUp);
  EXPECT_EQ(dephasing_factor(0.0, pair), std::complex<double>(1.0, 0.0));
}

TEST(Dephasing, ExactRecurrenceForUniformCoupling) {
  const ModelConfig cfg;
  for (auto [s, st] : {std::pair{kZero, kUp}, std::pair{kUp, kDown}, std::pair{kDown, kZero}}) {
    const auto pair = OffDiagonalPair::make(cfg, s, st);
    for (int n = 1; n <= 3; ++n) {
      const auto r = dephasing_factor(recurrence_time(cfg, n), pair);
      EXPECT_NEAR(r.real(), 1.0, 1e-12);
      EXPECT_NEAR(r.imag(), 0.0, 1e-12);
    }
  }
}

TEST(Dephasing, ClosedFormProduct) {
  const ModelConfig cfg;
  const auto pair = OffDiagonalPair::make(cfg, kUp, kDown);
  for (double t : {0.1, 0.5, 3.0, 17.0}) {
    const double expected = std::pow(1.0 / 3 + 2.0 / 3 * std::cos(1.5 * cfg.g * t), cfg.N);
    EXPECT_NEAR(dephasing_factor(t, pair).real(), expected, 1e-13);
  }
}

TEST(Dephasing, GaussianAtDephasingTime) {
  const ModelConfig cfg;
  const auto pair = OffDiagonalPair::make(cfg, kZero, kUp);
  const double t = dephasing_time(cfg);
  EXPECT_NEAR(t, 0.76980, 5e-6);
  EXPECT_LE(std::abs(std::abs(dephasing_factor(t, pair)) - std::exp(-1.0)), 0.05 * std::exp(-1.0));
}

TEST(Dephasing, SmallTimeLaw) {
  const ModelConfig cfg;
  const auto pair = OffDiagonalPair::make(cfg, kZero, kDown);
  const double tau = dephasing_time(cfg);
  for (int k = 1; k <= 30; ++k) {
    const double t = 0.01 * k * tau;
    const double x = t / tau;
    EXPECT_LE(std::abs(std::log(dephasing_factor(t, pair).real()) + x * x), 0.1 * std::pow(x, 4)) << "t=" << t;
  }
}

TEST(Dephasing, BoundedByOne) {
  ModelConfig cfg;
  cfg.delta_g_std = 0.01;
  const auto pair = OffDiagonalPair::make(cfg, kZero, kUp);
  for (int k = 0; k <= 2000; ++k) EXPECT_LE(std::abs(dephasing_factor(0.05 * k, pair)), 1.0 + 1e-15);
}

TEST(Dephasing, RejectsDiagonalPair) {
  const ModelConfig cfg;
  EXPECT_THROW(OffDiagonalPair::make(cfg, kUp, kUp), std::invalid_argument);
  OffDiagonalPair pair{kUp, kUp, {1.0, 0.0}, {0.15}};
  EXPECT_THROW(dephasing_factor(1.0, pair), std::invalid_argument);
}

TEST(DephasingTime, ScalingAndErrors) {
  const ModelConfig cfg;
  const double base = dephasing_time(cfg);
  EXPECT_NEAR(dephasing_time(with_size(cfg, 4 * cfg.N)), base / 2, 1e-15);
  EXPECT_NEAR(dephasing_time(with_coupling(cfg, 2 * cfg.g)), base / 2, 1e-15);
  EXPECT_THROW(dephasing_time(with_coupling(cfg, 0.0)), std::invalid_argument);
}

TEST(Spread, SuppressesFirstRecurrence) {
  ModelConfig cfg;
  const double t1 = recurrence_time(cfg);
  double prev = 1.0;
  for (double frac : {0.002, 0.004, 0.006, 0.008, 0.01}) {
    cfg.delta_g_std = frac * cfg.g;
    const auto pair = OffDiagonalPair::make(cfg, kZero, kUp);
    const double r = std::abs(dephasing_factor(t1, pair));
    EXPECT_LT(r, prev) << frac;
    prev = r;
  }
  EXPECT_LT(prev, 0.9);
}

TEST(Spread, SeededDraws) {
  ModelConfig cfg;
  cfg.delta_g_std = 1e-3;
  EXPECT_EQ(sample_couplings(cfg), sample_couplings(cfg));
  auto other = cfg;
  other.rng_seed += 1;
  EXPECT_NE(sample_couplings(cfg), sample_couplings(other));
}

TEST(FrequencyShift, Example) {
  EXPECT_NEAR(frequency_shift(0, 1, kUp, 0.15), -1.5 * 0.15, 1e-15);
}

TEST(FrequencyShift, MatchesMacroscopicEnergyChange) {
  // H_SA = -g N [(1 - 3s^2/2)(1 - 3 m2/2) + 3 s m1/4]; one spin sigma -> sigma + alpha
  const double g = 0.15;
  for (Sector s : sectors_of(Spin::One)) {
    const double sv = s.value();
    for (int sigma : {-1, 0, 1}) {
      for (int alpha : {-1, 1}) {
        if (!allowed_transition(sigma, alpha)) continue;
        const int to = sigma + alpha;
        const double dm1 = to - sigma;
        const double dm2 = to * to - sigma * sigma;
        const double dh = -g * ((1.0 - 1.5 * sv * sv) * (-1.5 * dm2) + 0.75 * sv * dm1);
        EXPECT_NEAR(frequency_shift(sigma, alpha, s, g), dh, 1e-15);
      }
    }
  }
}

TEST(DecoherenceRate, PositiveAndSymmetric) {
  for (double g : {0.01, 0.15, 1.0}) {
    const auto cfg = with_coupling(ModelConfig{}, g);
    for (Sector s : sectors_of(Spin::One)) {
      for (Sector st : sectors_of(Spin::One)) {
        if (s == st) continue;
        for (int sigma : {-1, 0, 1}) {
          const double r = decoherence_rate(sigma, s, st, cfg, 1.0);
          EXPECT_GT(r, 0.0);
          EXPECT_NEAR(r, decoherence_rate(-sigma, s.mirrored(), st.mirrored(), cfg, 1.0), 1e-15);
          EXPECT_NEAR(r, decoherence_rate(sigma, st, s, cfg, 1.0), 1e-15);
        }
      }
    }
  }
}

TEST(DecoherenceRate, DiagonalRateIsSmall) {
  const ModelConfig cfg;
  for (Sector s : sectors_of(Spin::One)) {
    double smallest_offdiag = INFINITY;
    for (Sector st : sectors_of(Spin::One)) {
      if (st == s) continue;
      for (int sigma : {-1, 0, 1}) smallest_offdiag = std::min(smallest_offdiag, decoherence_rate(sigma, s, st, cfg, 1.0));
    }
    EXPECT_LE(10.0 * std::abs(diagonal_rate_mean(s, cfg, 1.0)), smallest_offdiag);
  }
}

TEST(Envelope, ReducesToDephasingWithoutDamping) {
  const ModelConfig cfg;
  const auto pair = OffDiagonalPair::make(cfg, kZero, kUp);
  for (double t : {0.0, 0.3, 9.0}) {
    EXPECT_EQ(offdiag_envelope(t, pair, cfg, 0.0), dephasing_factor(t, pair));
    EXPECT_EQ(envelope_upper(t, pair, cfg, 0.0), 1.0);
  }
}

TEST(Envelope, HermitianPartner) {
  ModelConfig cfg;
  cfg.delta_g_std = 1e-3;
  const auto a = OffDiagonalPair::make(cfg, kZero, kUp);
  const auto b = OffDiagonalPair::make(cfg, kUp, kZero);
  for (double t : {0.2, 4.0, 50.0}) {
    const auto ra = offdiag_envelope(t, a, cfg, 1e-3);
    const auto rb = offdiag_envelope(t, b, cfg, 1e-3);
    EXPECT_NEAR(ra.real(), std::conj(rb).real(), 1e-15);
    EXPECT_NEAR(ra.imag(), std::conj(rb).imag(), 1e-15);
  }
}

TEST(Envelope, UpperEnvelopeNonIncreasingAcrossRecurrences) {
  ModelConfig cfg;
  cfg.delta_g_std = 0.005 * cfg.g;
  const auto pair = OffDiagonalPair::make(cfg, kZero, kUp);
  double prev = 1.0;
  for (int n = 1; n <= 5; ++n) {
    const double peak = envelope_upper(recurrence_time(cfg, n), pair, cfg, 1e-3);
    EXPECT_LE(peak, prev);
    prev = peak;
  }
}

TEST(Envelope, DecoherenceExponentAtRegistrationScale) {
  const ModelConfig cfg;
  const double gamma = 1.0;  // exponent N Re dB/dt t at t = 1/(gamma T) does not depend on gamma
  const auto rates = decoherence_rates(kZero, kUp, cfg, gamma);
  const double slowest = std::min({rates[0], rates[1], rates[2]});
  EXPECT_GE(cfg.N * slowest / (gamma * cfg.T), 10.0);
}

}  // namespace
}  // namespace cwsim
