#ifndef CWSIM_IO_HPP
#define CWSIM_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cwsim/config.hpp"

namespace cwsim {

inline constexpr const char* kToolVersion = "0.1.0";

/// 15 significant digits, '.' separator; -0 prints as 0.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

/// Empty cell for nullopt.
inline std::string format_cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

/// Comma-separated output with LF line endings and a mandatory header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc), width_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    write_line(header);
  }

  void row(const std::vector<std::optional<double>>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (const auto& v : values) cells.push_back(format_cell(v));
    write_line(cells);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    write_line(cells);
  }

  void text_row(const std::vector<std::string>& cells) { write_line(cells); }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
  }

 private:
  void write_line(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width mismatch in " + path_.string());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Reads flat `key = value` lines; `#` starts a comment.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& origin = "config") {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  return parse_key_values(in, path.string());
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad number for " + key + ": '" + value + "'");
  }
  if (used != value.size()) throw std::invalid_argument("bad number for " + key + ": '" + value + "'");
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad integer for " + key + ": '" + value + "'");
  }
  if (used != value.size()) throw std::invalid_argument("bad integer for " + key + ": '" + value + "'");
  return v;
}

}  // namespace detail

/// Keys understood in config files and as --key flags.
inline const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys{"spin", "N", "J2", "J4", "g", "T", "Gamma", "sector", "delta_g_std",
                                             "rng_seed"};
  return keys;
}

/// Applies settings to cfg. `spin` is applied before `sector` so that the
/// sector is parsed for the right spin; unknown keys are rejected.
inline void apply_settings(ModelConfig& cfg, const std::map<std::string, std::string>& kv) {
  if (auto it = kv.find("spin"); it != kv.end()) {
    cfg.spin = spin_from_string(it->second);
    if (!is_member(cfg.spin, cfg.sector)) cfg.sector = cfg.spin == Spin::Half ? Sector::from_twice(1) : Sector{};
  }
  for (const auto& [key, value] : kv) {
    if (key == "spin") continue;
    if (key == "N") {
      const auto n = detail::parse_integer(key, value);
      if (n < 1 || n > 1000000) throw std::invalid_argument("N out of range");
      cfg.N = static_cast<int>(n);
    } else if (key == "J2") {
      cfg.J2 = detail::parse_double(key, value);
    } else if (key == "J4") {
      cfg.J4 = detail::parse_double(key, value);
    } else if (key == "g") {
      cfg.g = detail::parse_double(key, value);
    } else if (key == "T") {
      cfg.T = detail::parse_double(key, value);
    } else if (key == "Gamma") {
      cfg.Gamma = detail::parse_double(key, value);
    } else if (key == "sector") {
      cfg.sector = sector_from_string(value, cfg.spin);
    } else if (key == "delta_g_std") {
      cfg.delta_g_std = detail::parse_double(key, value);
    } else if (key == "rng_seed") {
      const auto seed = detail::parse_integer(key, value);
      if (seed < 0) throw std::invalid_argument("rng_seed must be >= 0");
      cfg.rng_seed = static_cast<std::uint64_t>(seed);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
}

/// Canonical `key = value` rendering of a config.
inline std::string render_config(const ModelConfig& cfg) {
  std::ostringstream out;
  out << "spin = " << to_string(cfg.spin) << '\n'
      << "N = " << cfg.N << '\n'
      << "J2 = " << format_number(cfg.J2) << '\n'
      << "J4 = " << format_number(cfg.J4) << '\n'
      << "g = " << format_number(cfg.g) << '\n'
      << "T = " << format_number(cfg.T) << '\n'
      << "Gamma = " << format_number(cfg.Gamma) << '\n'
      << "sector = " << to_string(cfg.sector) << '\n'
      << "delta_g_std = " << format_number(cfg.delta_g_std) << '\n'
      << "rng_seed = " << cfg.rng_seed << '\n';
  return out.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct RunManifest {
  ModelConfig config;
  std::string subcommand;
  std::vector<double> snapshot_times;
  std::filesystem::path output_dir;
  /// Subcommand-specific settings, rendered in order.
  std::vector<std::pair<std::string, std::string>> extra;

  std::string config_hash() const {
    std::string text = render_config(config) + "subcommand = " + subcommand + '\n';
    for (const auto& [k, v] : extra) text += k + " = " + v + '\n';
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
    return buf;
  }

  std::string render() const {
    std::ostringstream out;
    out << "tool_version = " << kToolVersion << '\n'
        << "subcommand = " << subcommand << '\n'
        << "output_dir = " << output_dir.generic_string() << '\n'
        << "config_hash = " << config_hash() << '\n';
    out << render_config(config);
    out << "snapshot_times = ";
    for (std::size_t i = 0; i < snapshot_times.size(); ++i) out << (i ? "," : "") << format_number(snapshot_times[i]);
    out << '\n';
    for (const auto& [k, v] : extra) out << k << " = " << v << '\n';
    return out.str();
  }

  void write() const {
    std::filesystem::create_directories(output_dir);
    std::ofstream out(output_dir / "manifest.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest in " + output_dir.string());
    out << render();
  }
};

/// Leaves a FAILED file in the directory unless commit() is reached.
class FailureMarker {
 public:
  explicit FailureMarker(std::filesystem::path dir) : path_(std::move(dir) / "FAILED") {
    std::filesystem::create_directories(path_.parent_path());
    std::ofstream(path_, std::ios::binary | std::ios::trunc) << "run did not complete\n";
  }
  FailureMarker(const FailureMarker&) = delete;
  FailureMarker& operator=(const FailureMarker&) = delete;

  void commit() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
};

}  // namespace cwsim

#endif  // CWSIM_IO_HPP
