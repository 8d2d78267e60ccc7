#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <string>

#include "json.hpp"

#include "contracate/error.hpp"
#include "contracate/version.hpp"

namespace contracate::io {

using Json = nlohmann::ordered_json;

/// Everything needed to re-run a command. The creation time is the only
/// field that differs between identical runs.
struct RunManifest {
  std::string command;
  Json config = Json::object();
  Json seeds = Json::array();
  std::string dataset_hash;
  Json derived = Json::object();
  Json outputs = Json::array();

  Json to_json() const {
    Json j;
    j["software"] = "contracate";
    j["version"] = kVersion;
    j["created_at"] = utc_timestamp();
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    j["dataset_hash"] = dataset_hash;
    j["derived"] = derived;
    j["outputs"] = outputs;
    return j;
  }

  static std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }
};

inline void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline void write_manifest(const RunManifest& m, const std::string& path) { write_json(m.to_json(), path); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace contracate::io
