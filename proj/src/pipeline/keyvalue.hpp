#pragma once

#include <cstdlib>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "enhance/core/error.hpp"

namespace enhance::pipeline::detail {

struct KeyValueFile {
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : entries) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline KeyValueFile read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ConfigError, "cannot open config " + path);
  KeyValueFile kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::ConfigError, "expected key=value, got '" + line + "' in " + path);
    }
    kv.entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

inline double parse_double(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    raise(ErrorCode::ConfigError, "bad numeric value for " + key + ": '" + v + "'");
  }
  return d;
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    raise(ErrorCode::ConfigError, "bad integer value for " + key + ": '" + v + "'");
  }
  return u;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  raise(ErrorCode::ConfigError, "bad boolean value for " + key + ": '" + v + "'");
}

}  // namespace enhance::pipeline::detail
