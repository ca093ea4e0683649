#include "egogaze/run_manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace egogaze {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_manifest(const std::filesystem::path& artifact_dir, const RunManifest& manifest) {
  std::filesystem::create_directories(artifact_dir);
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config_hash"] = manifest.config_hash;
  j["seed"] = manifest.seed;
  j["inputs"] = manifest.inputs;
  j["outputs"] = manifest.outputs;
  j["tool_version"] = manifest.tool_version;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  const auto file = artifact_dir / "run_manifest.json";
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write run manifest: " + file.string());
  f << j.dump(2) << "\n";
}

}  // namespace egogaze
