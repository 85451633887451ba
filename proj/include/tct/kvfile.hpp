// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "tct/errors.hpp"

namespace tct {

/// Plain "key = value" text file: '#' starts a comment, blank lines are
/// skipped, duplicate keys are errors. Consumers validate the key set;
/// unknown keys are hard errors there to catch typos.
class KeyValueFile {
 public:
  static KeyValueFile parse_text(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected 'key = value'", line_no);
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key", line_no);
      if (kv.entries_.count(key))
        throw ConfigError("duplicate key '" + key + "'", line_no);
      kv.entries_[key] = {value, line_no};
    }
    return kv;
  }

  static KeyValueFile parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    return require(key).value;
  }

  double get_real(const std::string& key) const {
    const Entry& e = require(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' is not a number: " + e.value,
                        e.line);
    }
  }

  long get_int(const std::string& key) const {
    const Entry& e = require(key);
    try {
      std::size_t pos = 0;
      long v = std::stol(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' is not an integer: " + e.value,
                        e.line);
    }
  }

  std::uint64_t get_u64(const std::string& key) const {
    const Entry& e = require(key);
    try {
      std::size_t pos = 0;
      std::uint64_t v = std::stoull(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' is not an integer: " + e.value,
                        e.line);
    }
  }

  bool get_bool(const std::string& key) const {
    const Entry& e = require(key);
    if (e.value == "true" || e.value == "on" || e.value == "1") return true;
    if (e.value == "false" || e.value == "off" || e.value == "0") return false;
    throw ConfigError("key '" + key + "' is not a boolean: " + e.value, e.line);
  }

  double real_or(const std::string& key, double fallback) const {
    return has(key) ? get_real(key) : fallback;
  }
  long int_or(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }
  std::uint64_t u64_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
  }
  bool bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }
  std::string string_or(const std::string& key, std::string fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  /// Rejects any key outside `allowed` with a line-numbered error.
  template <typename Set>
  void ensure_only(const Set& allowed) const {
    for (const auto& [key, entry] : entries_)
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ConfigError("unknown key '" + key + "'", entry.line);
  }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  const Entry& require(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  static std::string trim(const std::string& s) {
    auto b = s.begin(), e = s.end();
    while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
    return std::string(b, e);
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace tct
