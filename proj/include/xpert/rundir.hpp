#pragma once

// Run directories: a manifest, the resolved config snapshot and result files. Timestamps live only
// in the manifest, so two runs with the same inputs differ only there.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xpert/config.hpp"

#ifndef XPERT_VERSION
#define XPERT_VERSION "0.0.0"
#endif

namespace xpert {

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

class RunDir {
 public:
  static constexpr const char* kManifest = "manifest.json";
  static constexpr const char* kConfigSnapshot = "config.json";

  // Creates the directory, writes the config snapshot and an initial manifest.
  RunDir(std::filesystem::path dir, std::string command, const Config& config, std::uint64_t seed)
      : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    snapshot_ = config_to_json(config).dump(2) + "\n";
    manifest_["command"] = std::move(command);
    manifest_["tool_version"] = XPERT_VERSION;
    manifest_["config_hash"] = hex64(fnv1a64(snapshot_));
    manifest_["seed"] = seed;
    manifest_["config_snapshot"] = kConfigSnapshot;
    manifest_["calibration_id"] = config.platform.unit_costs.calibration_id;
    manifest_["started_at"] = utc_timestamp();
    manifest_["outputs"] = json::array();
    manifest_["status"] = "running";
    flush_manifest();
    write_file(dir_ / kConfigSnapshot, snapshot_);
  }

  const std::filesystem::path& path() const { return dir_; }
  json& manifest() { return manifest_; }

  void write(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    manifest_["outputs"].push_back(name);
  }

  void finish(const std::string& status) {
    manifest_["status"] = status;
    manifest_["finished_at"] = utc_timestamp();
    flush_manifest();
  }

 private:
  void flush_manifest() { write_file(dir_ / kManifest, manifest_.dump(2) + "\n"); }

  std::filesystem::path dir_;
  std::string snapshot_;
  json manifest_;
};

// The manifest with timestamp fields removed, for run-to-run comparison.
inline json manifest_without_timestamps(const std::filesystem::path& dir) {
  json m = parse_json_text(read_text_file((dir / RunDir::kManifest).string()), RunDir::kManifest);
  m.erase("started_at");
  m.erase("finished_at");
  return m;
}

}  // namespace xpert
