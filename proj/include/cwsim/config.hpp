#ifndef CWSIM_CONFIG_HPP
#define CWSIM_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwsim {

/// Spin length l of both the measured system and the apparatus spins.
enum class Spin { Half, One };

inline int multiplicity(Spin spin) { return spin == Spin::Half ? 2 : 3; }

inline std::string to_string(Spin spin) { return spin == Spin::Half ? "half" : "one"; }

inline Spin spin_from_string(const std::string& text) {
  if (text == "half" || text == "1/2" || text == "0.5") return Spin::Half;
  if (text == "one" || text == "1") return Spin::One;
  throw std::invalid_argument("unknown spin '" + text + "' (expected half|one)");
}

/// Eigenvalue s of the measured s_z. Stored as 2s so that the spin-1/2
/// sectors s = -1/2, +1/2 stay integral.
class Sector {
 public:
  constexpr Sector() = default;

  static constexpr Sector from_twice(int twice) { return Sector(twice); }

  static Sector from_value(double s) {
    const double twice = 2.0 * s;
    const double rounded = std::round(twice);
    if (std::abs(twice - rounded) > 1e-12) {
      throw std::invalid_argument("sector value must be a multiple of 1/2");
    }
    return Sector(static_cast<int>(rounded));
  }

  constexpr int twice() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr Sector mirrored() const { return Sector(-twice_); }

  friend constexpr bool operator==(Sector, Sector) = default;

 private:
  constexpr explicit Sector(int twice) : twice_(twice) {}
  int twice_ = 0;
};

inline bool is_member(Spin spin, Sector s) {
  if (spin == Spin::Half) return s.twice() == -1 || s.twice() == 1;
  return s.twice() == -2 || s.twice() == 0 || s.twice() == 2;
}

/// The s_z eigenvalues in increasing order.
inline std::vector<Sector> sectors_of(Spin spin) {
  if (spin == Spin::Half) return {Sector::from_twice(-1), Sector::from_twice(1)};
  return {Sector::from_twice(-2), Sector::from_twice(0), Sector::from_twice(2)};
}

inline std::string to_string(Sector s) {
  if (s.twice() % 2 == 0) return std::to_string(s.twice() / 2);
  return (s.twice() < 0 ? "-" : "") + std::to_string(std::abs(s.twice())) + "/2";
}

/// Parses "0", "1", "-1", "1/2", "-0.5", ... For spin-1/2, a bare sign
/// ("1", "-1", "+") selects +1/2 or -1/2.
inline Sector sector_from_string(const std::string& text, Spin spin) {
  if (text.empty()) throw std::invalid_argument("empty sector");
  Sector s;
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    const double num = std::stod(text.substr(0, slash));
    const double den = std::stod(text.substr(slash + 1));
    s = Sector::from_value(num / den);
  } else if (text == "+" || text == "-") {
    s = Sector::from_twice(text == "+" ? 1 : -1);
  } else {
    s = Sector::from_value(std::stod(text));
  }
  if (spin == Spin::Half && (s.twice() == 2 || s.twice() == -2)) s = Sector::from_twice(s.twice() / 2);
  if (!is_member(spin, s)) {
    throw std::invalid_argument("sector '" + text + "' is not an s_z eigenvalue for spin " + to_string(spin));
  }
  return s;
}

/// Physical and numerical parameters of one simulation. Energies share one
/// unit (k_B = hbar = 1). The bath coupling gamma is absorbed in the time
/// unit tau = gamma*T*t and is not a field here.
struct ModelConfig {
  Spin spin = Spin::One;
  int N = 100;
  double J2 = 0.0;
  double J4 = 1.0;
  double g = 0.15;
  double T = 0.2;
  double Gamma = 10.0;
  Sector sector{};
  double delta_g_std = 0.0;
  std::uint64_t rng_seed = 12345;

  double nu() const { return 1.0 / N; }
  double beta() const { return 1.0 / T; }

  void validate() const {
    if (N < 1) throw std::invalid_argument("N must be >= 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive");
    if (!(Gamma > 0.0) || !std::isfinite(Gamma)) throw std::invalid_argument("Gamma must be positive");
    if (!(g >= 0.0)) throw std::invalid_argument("g must be nonnegative");
    if (!(delta_g_std >= 0.0)) throw std::invalid_argument("delta_g_std must be nonnegative");
    if (!std::isfinite(J2) || !std::isfinite(J4)) throw std::invalid_argument("couplings must be finite");
  }
};

inline ModelConfig with_coupling(ModelConfig cfg, double g) {
  cfg.g = g;
  return cfg;
}

inline ModelConfig with_size(ModelConfig cfg, int n) {
  cfg.N = n;
  return cfg;
}

inline ModelConfig with_sector(ModelConfig cfg, Sector s) {
  cfg.sector = s;
  return cfg;
}

}  // namespace cwsim

#endif  // CWSIM_CONFIG_HPP
