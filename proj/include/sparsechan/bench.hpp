#pragma once

// Experiment configuration text and result serialization for the bench CLI.
//
// Config files are flat `key = value` lines with '#' comments. Recognized keys:
//   M, K, L, trials, eps, max_iter, seed, snr, algos, timing
// `snr` takes "a:b:step" (inclusive) or a comma list; `algos` a comma list of
// omapfg, lse, slse, omp.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsechan/simkit.hpp"
#include "sparsechan/version.hpp"

namespace sparsechan::bench {

/// Raised for malformed or unknown configuration entries.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::string_view kSnrDefinition = "per-sample SNR = ||U h||^2 / (N sigma^2)";

inline constexpr std::string_view kCsvColumns =
    "algorithm,snr_db,mse,nmse,crb_s,crb_us,mean_iterations,failures,wall_time_s";

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': not a number: '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("'" + key + "': trailing characters in '" + v + "'");
  return out;
}

inline std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': integer out of range: '" + v + "'");
  }
}

}  // namespace detail

/// Parses "a:b:step" (inclusive of b up to rounding) or "x,y,z".
inline std::vector<double> parse_snr_grid(const std::string& text) {
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    const auto parts = detail::split(text, ':');
    if (parts.size() != 3) throw ConfigError("snr: expected a:b:step, got '" + text + "'");
    const double a = detail::to_double("snr", parts[0]);
    const double b = detail::to_double("snr", parts[1]);
    const double step = detail::to_double("snr", parts[2]);
    if (!(step > 0.0) || b < a) throw ConfigError("snr: need step > 0 and b >= a");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) grid.push_back(a + static_cast<double>(i) * step);
  } else {
    for (const auto& p : detail::split(text, ',')) grid.push_back(detail::to_double("snr", p));
  }
  if (grid.empty()) throw ConfigError("snr: empty grid");
  return grid;
}

inline std::vector<Algorithm> parse_algorithm_list(const std::string& text) {
  std::vector<Algorithm> out;
  for (const auto& name : detail::split(text, ',')) {
    const auto a = parse_algorithm(name);
    if (!a) throw ConfigError("algos: unknown algorithm '" + name + "'");
    out.push_back(*a);
  }
  return out;
}

/// Applies one setting; unknown keys are rejected.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "M") {
    cfg.memory = detail::to_unsigned(key, value);
  } else if (key == "K") {
    cfg.sparsity = detail::to_unsigned(key, value);
  } else if (key == "L") {
    cfg.training_length = detail::to_unsigned(key, value);
  } else if (key == "trials") {
    cfg.trials = detail::to_unsigned(key, value);
  } else if (key == "eps") {
    cfg.eps = detail::to_double(key, value);
  } else if (key == "max_iter" || key == "max-iter") {
    cfg.max_iter = detail::to_unsigned(key, value);
  } else if (key == "seed") {
    cfg.seed = detail::to_unsigned(key, value);
  } else if (key == "snr") {
    cfg.snr_grid_db = parse_snr_grid(value);
  } else if (key == "algos") {
    cfg.algorithms = parse_algorithm_list(value);
  } else if (key == "timing") {
    if (value == "true" || value == "1") cfg.record_timing = true;
    else if (value == "false" || value == "0") cfg.record_timing = false;
    else throw ConfigError("timing: expected true/false, got '" + value + "'");
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

/// Parses `key = value` lines into ordered pairs.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(std::string_view(body).substr(0, eq));
    std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  for (const auto& [k, v] : parse_config_text(text)) apply_setting(cfg, k, v);
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str());
}

/// 17 significant digits, so the value reads back exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string grid_text(const std::vector<double>& grid) {
  std::string s;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) s += ',';
    s += format_double(grid[i]);
  }
  return s;
}

inline std::string algorithms_text(const std::vector<Algorithm>& algos) {
  std::string s;
  for (std::size_t i = 0; i < algos.size(); ++i) {
    if (i) s += ',';
    s += algorithm_name(algos[i]);
  }
  return s;
}

/// Effective configuration, one `key = value` per entry, in a form that
/// apply_config_text accepts.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  return {
      {"M", std::to_string(cfg.memory)},
      {"K", std::to_string(cfg.sparsity)},
      {"L", std::to_string(cfg.training_length)},
      {"trials", std::to_string(cfg.trials)},
      {"eps", format_double(cfg.eps)},
      {"max_iter", std::to_string(cfg.max_iter)},
      {"seed", std::to_string(cfg.seed)},
      {"snr", grid_text(cfg.snr_grid_db)},
      {"algos", algorithms_text(cfg.algorithms)},
      {"timing", cfg.record_timing ? "true" : "false"},
  };
}

inline void write_csv(std::ostream& os, const ExperimentConfig& cfg, const std::vector<ResultRecord>& records) {
  os << "# sparsechan " << kVersion << '\n';
  os << "# snr_definition: " << kSnrDefinition << '\n';
  for (const auto& [k, v] : config_entries(cfg)) os << "# " << k << " = " << v << '\n';
  for (const auto& r : records)
    if (r.flagged)
      os << "# warning: " << algorithm_name(r.algorithm) << " at " << format_double(r.snr_db)
         << " dB failed on " << r.failures << " of " << cfg.trials << " trials\n";
  os << kCsvColumns << '\n';
  for (const auto& r : records) {
    os << algorithm_name(r.algorithm) << ',' << format_double(r.snr_db) << ',' << format_double(r.mse) << ','
       << format_double(r.nmse) << ',' << format_double(r.crb_s) << ',' << format_double(r.crb_us) << ','
       << format_double(r.mean_iterations) << ',' << r.failures << ',' << format_double(r.wall_time_s) << '\n';
  }
}

inline nlohmann::json to_json(const ExperimentConfig& cfg, const std::vector<ResultRecord>& records) {
  nlohmann::json config = nlohmann::json::object();
  config["M"] = cfg.memory;
  config["K"] = cfg.sparsity;
  config["L"] = cfg.training_length;
  config["trials"] = cfg.trials;
  config["eps"] = cfg.eps;
  config["max_iter"] = cfg.max_iter;
  config["seed"] = cfg.seed;
  config["snr"] = cfg.snr_grid_db;
  config["algos"] = algorithms_text(cfg.algorithms);
  config["timing"] = cfg.record_timing;

  nlohmann::json rows = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& r : records) {
    rows.push_back({{"algorithm", algorithm_name(r.algorithm)},
                    {"snr_db", r.snr_db},
                    {"mse", num(r.mse)},
                    {"nmse", num(r.nmse)},
                    {"crb_s", num(r.crb_s)},
                    {"crb_us", num(r.crb_us)},
                    {"mean_iterations", num(r.mean_iterations)},
                    {"failures", r.failures},
                    {"flagged", r.flagged},
                    {"wall_time_s", r.wall_time_s}});
  }
  return {{"meta", {{"tool", "sparsechan"}, {"version", kVersion}, {"snr_definition", kSnrDefinition}}},
          {"config", config},
          {"results", rows}};
}

inline void write_json(std::ostream& os, const ExperimentConfig& cfg, const std::vector<ResultRecord>& records) {
  os << to_json(cfg, records).dump(2) << '\n';
}

}  // namespace sparsechan::bench
