#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rdm {

// Plain-text experiment config: one `key=value` per line, '#' comments,
// blank lines ignored. CLI flags override file values.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    ConfigMap cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip(line);
      if (s.empty() || s[0] == '#') continue;
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config: missing '=' at " + path + ":" +
                                 std::to_string(lineno));
      std::string key = strip(s.substr(0, eq));
      std::string val = strip(s.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error("config: empty key at " + path + ":" +
                                 std::to_string(lineno));
      cfg.kv_[key] = val;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  // "key=value" form used for CLI overrides.
  void apply_override(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::runtime_error("config: override must be key=value, got '" +
                               assignment + "'");
    kv_[strip(assignment.substr(0, eq))] = strip(assignment.substr(eq + 1));
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not a number: '" +
                               it->second + "'");
    }
  }

  int64_t get_int(const std::string& key, int64_t dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      size_t pos = 0;
      long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not an integer: '" +
                               it->second + "'");
    }
  }

  // First key not in `allowed`, if any. The CLI rejects it with exit code 2.
  std::optional<std::string> unknown_key(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : kv_)
      if (allowed.count(k) == 0) return k;
    return std::nullopt;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

  std::string render() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
    return out;
  }

 private:
  static std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace rdm
