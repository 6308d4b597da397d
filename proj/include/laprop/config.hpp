#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "laprop/errors.hpp"

namespace laprop {

/// Flat `key = value` configuration with `#` comments. Every key must be
/// consumed by a typed getter; finish() rejects anything left over, so a
/// misspelled key is an error instead of a silently ignored setting.
class ConfigTree {
 public:
  static ConfigTree parse_string(const std::string& text,
                                 const std::string& origin = "<config>") {
    ConfigTree cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw FormatError(origin + ": line " + std::to_string(line_no) +
                          ": expected `key = value`");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw FormatError(origin + ": line " + std::to_string(line_no) + ": empty key");
      if (cfg.kv_.count(key))
        throw FormatError(origin + ": line " + std::to_string(line_no) +
                          ": duplicate key `" + key + "`");
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  static ConfigTree parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(key);
    return to_double(key, it->second);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(key);
    const double v = to_double(key, it->second);
    const auto i = static_cast<std::int64_t>(v);
    if (static_cast<double>(i) != v)
      throw FormatError(origin_ + ": key `" + key + "` is not an integer: " + it->second);
    return i;
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(key);
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw FormatError(origin_ + ": key `" + key + "` must be true or false, got " +
                      it->second);
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(key);
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
    if (out.empty()) throw FormatError(origin_ + ": key `" + key + "` has an empty list");
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(key);
    auto out = split_list(it->second);
    if (out.empty()) throw FormatError(origin_ + ": key `" + key + "` has an empty list");
    return out;
  }

  /// Reject unconsumed keys.
  void finish() const {
    std::string unknown;
    for (const auto& [key, value] : kv_)
      if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty())
      throw FormatError(origin_ + ": unknown key(s): " + unknown);
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
  }

  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
      const std::size_t pos = s.find(',', start);
      const std::string item =
          trim(pos == std::string::npos ? s.substr(start) : s.substr(start, pos - start));
      if (!item.empty()) out.push_back(item);
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  }

  double to_double(const std::string& key, const std::string& value) const {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size())
      throw FormatError(origin_ + ": key `" + key + "` is not a number: " + value);
    return v;
  }

  std::string origin_;
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
};

}  // namespace laprop
