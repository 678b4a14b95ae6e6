#pragma once

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "secl/harness/experiment.hpp"

namespace secl {

/// Parses a flat `key = value` file. Blank lines and lines starting with `#`
/// are skipped; keys may be written with or without leading dashes.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source = "config") {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    if (key.empty()) throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::invalid_argument("config: invalid value '" + text + "' for " + key);
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  throw std::invalid_argument("config: invalid boolean '" + text + "' for " + key);
}

}  // namespace detail

/// "a,b;c,d" -> 2x2 matrix (rows separated by ';').
inline Matrix parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream rs(text);
  std::string row;
  while (std::getline(rs, row, ';')) {
    std::vector<double> values;
    std::stringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, ',')) {
      std::string t;
      for (char ch : cell) {
        if (!std::isspace(static_cast<unsigned char>(ch))) t += ch;
      }
      values.push_back(detail::parse_number<double>("matrix", t));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw std::invalid_argument("parse_matrix: empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw std::invalid_argument("parse_matrix: ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

inline void set_case(ExperimentConfig& cfg, const std::string& value) {
  if (value == "1" || value == "case1") {
    cfg.case_id = 1;
  } else if (value == "2" || value == "case2") {
    cfg.case_id = 2;
  } else if (value == "3" || value == "case3") {
    cfg.case_id = 3;
  } else if (value == "custom") {
    cfg.case_id = 0;
  } else {
    throw std::invalid_argument("config: case must be 1, 2, 3 or custom");
  }
}

inline RateMode parse_rate_mode(const std::string& value) {
  if (value == "single" || value == "single-trial") return RateMode::single_trial;
  if (value == "averaged" || value == "average") return RateMode::averaged;
  throw std::invalid_argument("config: rate-mode must be single or averaged");
}

/// Applies key=value settings to cfg. Keys mirror the long CLI flags.
inline void apply_settings(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "case") {
      set_case(cfg, value);
    } else if (key == "nbar") {
      cfg.custom_nbar = parse_matrix(value);
      cfg.case_id = 0;
    } else if (key == "trials") {
      cfg.trials = detail::parse_number<int>(key, value);
    } else if (key == "steps") {
      cfg.steps = detail::parse_number<int>(key, value);
    } else if (key == "seed") {
      cfg.seed = detail::parse_number<std::uint64_t>(key, value);
    } else if (key == "alpha") {
      cfg.alpha = detail::parse_number<double>(key, value);
    } else if (key == "out") {
      cfg.output_dir = value;
    } else if (key == "trial-index") {
      cfg.rate_trial_index = detail::parse_number<int>(key, value);
    } else if (key == "rate-mode") {
      cfg.rate_mode = parse_rate_mode(value);
    } else if (key == "joseph") {
      cfg.joseph_form = detail::parse_bool(key, value);
    } else if (key == "tol") {
      cfg.quad_tol = detail::parse_number<double>(key, value);
    } else if (key == "threads") {
      cfg.threads = detail::parse_number<int>(key, value);
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
}

inline void load_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  apply_settings(cfg, parse_key_values(in, path.string()));
}

}  // namespace secl
