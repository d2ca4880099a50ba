#include "segcolor/run_manifest.hpp"

#include <ctime>

#include <nlohmann/json.hpp>

#include "segcolor/image_io.hpp"

#ifndef SEGCOLOR_SOURCE_REVISION
#define SEGCOLOR_SOURCE_REVISION "unknown"
#endif

namespace segcolor {

using nlohmann::json;

void RunManifest::add_input(const std::filesystem::path& path) {
  input_checksums[path.string()] = to_hex(fnv1a64_file(path));
}

std::string current_utc_timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void save_run_manifest(const std::filesystem::path& path, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["source_revision"] = m.source_revision;
  j["input_checksums"] = m.input_checksums;
  j["outputs"] = m.outputs;
  j["started_utc"] = m.started_utc;
  j["duration_seconds"] = m.duration_seconds;
  write_file_atomic(path, j.dump(2) + "\n");
}

RunManifest load_run_manifest(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  json j = json::parse(bytes.begin(), bytes.end());
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.source_revision = j.at("source_revision").get<std::string>();
  m.input_checksums = j.at("input_checksums").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.started_utc = j.at("started_utc").get<std::string>();
  m.duration_seconds = j.at("duration_seconds").get<double>();
  return m;
}

ManifestWriter::ManifestWriter(std::string command, std::vector<std::string> argv)
    : start_(std::chrono::steady_clock::now()) {
  manifest_.command = std::move(command);
  manifest_.argv = std::move(argv);
  manifest_.source_revision = SEGCOLOR_SOURCE_REVISION;
  manifest_.started_utc = current_utc_timestamp();
}

void ManifestWriter::finish(const std::filesystem::path& path) {
  manifest_.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  save_run_manifest(path, manifest_);
}

}  // namespace segcolor
