#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lockloss/csv.hpp"

namespace lockloss {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key=value experiment configuration. Keys are normalised so that
/// `grid-points` and `grid_points` are the same entry. Every typed read is
/// remembered, so resolved() lists exactly what an experiment used,
/// including defaults.
class ExperimentConfig {
 public:
  static std::string normalize_key(std::string_view key) {
    std::string k(key);
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
  }

  /// Lines of `key = value`; `#` starts a comment, blank lines are skipped.
  static ExperimentConfig parse(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      cfg.set(key, trim(t.substr(eq + 1)));
    }
    return cfg;
  }

  static ExperimentConfig parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
  }

  void set(std::string_view key, std::string value) { values_[normalize_key(key)] = std::move(value); }
  bool has(std::string_view key) const { return values_.count(normalize_key(key)) > 0; }

  std::string get_string(std::string_view key) const { return record(key, raw(key)); }
  std::string get_string(std::string_view key, std::string fallback) const {
    return has(key) ? get_string(key) : record(key, std::move(fallback));
  }

  double get_double(std::string_view key) const {
    const double v = to_double(key, raw(key));
    record(key, format_double(v));
    return v;
  }
  double get_double(std::string_view key, double fallback) const {
    if (has(key)) return get_double(key);
    record(key, format_double(fallback));
    return fallback;
  }

  long long get_int(std::string_view key) const {
    const long long v = to_int(key, raw(key));
    record(key, std::to_string(v));
    return v;
  }
  long long get_int(std::string_view key, long long fallback) const {
    if (has(key)) return get_int(key);
    record(key, std::to_string(fallback));
    return fallback;
  }

  std::uint64_t get_uint64(std::string_view key) const {
    const std::string s = raw(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw ConfigError("config key '" + normalize_key(key) + "': expected a nonnegative integer, got '" + s + "'");
    }
    record(key, std::to_string(v));
    return v;
  }
  std::uint64_t get_uint64(std::string_view key, std::uint64_t fallback) const {
    if (has(key)) return get_uint64(key);
    record(key, std::to_string(fallback));
    return fallback;
  }

  /// Comma-separated reals.
  std::vector<double> get_double_list(std::string_view key) const {
    const std::string s = raw(key);
    std::vector<double> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.empty()) throw ConfigError("config key '" + normalize_key(key) + "': empty list");
    std::string joined;
    for (std::size_t i = 0; i < out.size(); ++i) joined += (i ? "," : "") + format_double(out[i]);
    record(key, joined);
    return out;
  }
  std::vector<double> get_double_list(std::string_view key, std::vector<double> fallback) const {
    if (has(key)) return get_double_list(key);
    std::string joined;
    for (std::size_t i = 0; i < fallback.size(); ++i) joined += (i ? "," : "") + format_double(fallback[i]);
    record(key, joined);
    return fallback;
  }

  void require(std::string_view key) const {
    if (!has(key)) throw ConfigError("missing required key '" + normalize_key(key) + "'");
  }

  /// Keys read so far with their resolved (possibly defaulted) values.
  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
  }

  std::string raw(std::string_view key) const {
    const auto it = values_.find(normalize_key(key));
    if (it == values_.end()) throw ConfigError("missing required key '" + normalize_key(key) + "'");
    return it->second;
  }

  std::string record(std::string_view key, std::string v) const {
    resolved_[normalize_key(key)] = v;
    return v;
  }

  static double to_double(std::string_view key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + normalize_key(key) + "': expected a number, got '" + s + "'");
  }

  static long long to_int(std::string_view key, const std::string& s) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw ConfigError("config key '" + normalize_key(key) + "': expected an integer, got '" + s + "'");
    }
    return v;
  }

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> resolved_;
};

}  // namespace lockloss
