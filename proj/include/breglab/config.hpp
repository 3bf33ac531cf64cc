#pragma once

// Plain-text experiment configuration: `key = value` lines, `#` comments,
// `[section]` headers. Sections only group keys; every key is global and
// may appear once.

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace breglab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<std::string_view, 8> kExperiments = {
    "quadratic", "rof-ball", "rof-square", "l1-sparse", "l1-dense", "singular", "identities",
    "conjugates"};

inline constexpr std::array<std::string_view, 21> kConfigKeys = {
    "experiment", "R",           "R_star",      "n",           "mu",           "nu",
    "seed",       "instance_seed", "tol",       "max_iter",    "replicates",   "alpha_min",
    "alpha_max",  "alpha_points", "delta_min",  "delta_max",   "delta_points", "probes",
    "out",        "plot",        "operator"};

namespace detail {
inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}
}  // namespace detail

struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> values;  // every key except `experiment`

  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string& s = it->second;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
      throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
    }
    return v;
  }

  double positive(const std::string& key, double fallback) const {
    const double v = real(key, fallback);
    if (!(v > 0.0)) throw ConfigError("key '" + key + "' must be positive");
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback, bool allow_zero = false) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string& s = it->second;
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + s + "'");
    }
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigError("key '" + key + "': integer out of range");
    if (v == 0 && !allow_zero) throw ConfigError("key '" + key + "' must be positive");
    return v;
  }

  /// Sets a key from `key=value`, replacing any earlier value.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(detail::trim(std::string_view(assignment).substr(0, eq)),
        detail::trim(std::string_view(assignment).substr(eq + 1)), true);
  }

  void set(const std::string& key, const std::string& value, bool replace) {
    if (std::find(kConfigKeys.begin(), kConfigKeys.end(), key) == kConfigKeys.end()) {
      throw ConfigError("unknown key '" + key + "'");
    }
    if (value.empty()) throw ConfigError("key '" + key + "' has an empty value");
    if (key == "experiment") {
      if (std::find(kExperiments.begin(), kExperiments.end(), value) == kExperiments.end()) {
        throw ConfigError("unknown experiment '" + value + "'");
      }
      if (!replace && !experiment.empty()) throw ConfigError("duplicate key 'experiment'");
      experiment = value;
      return;
    }
    if (!replace && values.count(key)) throw ConfigError("duplicate key '" + key + "'");
    values[key] = value;
  }
};

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view view(raw);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const std::string line = detail::trim(view);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + "malformed section header");
      const std::string name = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (name.empty() || name.find_first_of("[]=") != std::string::npos) {
        throw ConfigError(where + "malformed section header");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    try {
      cfg.set(detail::trim(std::string_view(line).substr(0, eq)),
              detail::trim(std::string_view(line).substr(eq + 1)), false);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (cfg.experiment.empty()) throw ConfigError("missing key 'experiment'");
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

}  // namespace breglab
