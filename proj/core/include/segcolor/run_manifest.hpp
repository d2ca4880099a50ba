#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace segcolor {

/// Record of one CLI run, sufficient to re-invoke it identically. Written
/// atomically when the run finishes.
struct RunManifest {
  std::string command;                  // subcommand name
  std::vector<std::string> argv;        // the full invocation
  std::map<std::string, std::string> config;  // resolved effective config
  std::uint64_t seed = 0;
  std::string source_revision;
  std::map<std::string, std::string> input_checksums;  // path -> fnv1a64 hex
  std::vector<std::string> outputs;
  std::string started_utc;
  double duration_seconds = 0.0;

  void add_input(const std::filesystem::path& path);
};

std::string current_utc_timestamp();

void save_run_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest load_run_manifest(const std::filesystem::path& path);

/// Scoped helper: constructed at run start, writes the manifest on finish().
class ManifestWriter {
 public:
  ManifestWriter(std::string command, std::vector<std::string> argv);
  RunManifest& manifest() { return manifest_; }
  void finish(const std::filesystem::path& path);

 private:
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace segcolor
