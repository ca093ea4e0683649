#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace egogaze {

inline constexpr const char* kToolVersion = "egogaze 0.1.0";

// Provenance record written once per artifact directory (run_manifest.json).
struct RunManifest {
  std::string command;
  uint64_t config_hash = 0;
  uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;
};

uint64_t fnv1a(const std::string& s);
std::string iso8601_now();

void write_run_manifest(const std::filesystem::path& artifact_dir, const RunManifest& manifest);

}  // namespace egogaze
