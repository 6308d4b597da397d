#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "laprop/errors.hpp"
#include "laprop/rng.hpp"

namespace laprop {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Reproducibility record written next to every batch of output files: the
/// fully resolved configuration, the RNG identity, the seeds and the files
/// produced. Timestamps and durations are informational only; output bytes
/// are a function of the config alone.
struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string command;
  std::map<std::string, std::string> config;
  std::string rng_algorithm{kRngAlgorithm};
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
  std::string started_at;

  static std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["config"] = config;
    j["rng_algorithm"] = rng_algorithm;
    j["seeds"] = seeds;
    j["outputs"] = outputs;
    j["duration_seconds"] = duration_seconds;
    j["started_at"] = started_at;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace laprop
