#include "egogaze/storage.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "egogaze/array_io.hpp"

namespace egogaze {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr int kFormatVersion = 1;

std::string frame_name(int idx, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d.%s", idx, ext.c_str());
  return buf;
}
}  // namespace

void save_recording(const Recording& rec, const fs::path& dir, bool lossless) {
  rec.validate();
  const std::string ext = lossless ? "png" : "jpg";
  fs::create_directories(dir / "frames");

  json m;
  m["format_version"] = kFormatVersion;
  m["path_id"] = rec.path_id;
  m["direction"] = rec.direction;
  m["source"] = rec.source;
  m["resolution"] = {rec.height(), rec.width()};
  m["frame_count"] = rec.frame_count();
  m["frame_format"] = ext;
  m["has_imu"] = rec.has_imu;
  m["timestamps_ns"] = rec.frame_timestamps_ns;
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("cannot write manifest: " + (dir / "manifest.json").string());
  mf << m.dump(2) << "\n";
  mf.close();

  std::vector<int> params;
  if (!lossless) params = {cv::IMWRITE_JPEG_QUALITY, 95};
  for (int i = 0; i < rec.frame_count(); ++i) {
    const fs::path p = dir / "frames" / frame_name(i, ext);
    if (!cv::imwrite(p.string(), rec.frames[static_cast<size_t>(i)], params))
      throw std::runtime_error("failed to encode frame " + p.string());
  }

  Tensor<float> gaze({rec.frame_count(), 3});
  for (int i = 0; i < rec.frame_count(); ++i) {
    const auto& g = rec.gaze_points[static_cast<size_t>(i)];
    gaze.at(i, 0) = g.x;
    gaze.at(i, 1) = g.y;
    gaze.at(i, 2) = g.valid;
  }
  save_array(dir / "gaze.f32", gaze);

  if (rec.has_imu) {
    Tensor<float> imu({rec.frame_count(), 6});
    for (int i = 0; i < rec.frame_count(); ++i)
      for (int j = 0; j < 6; ++j) imu.at(i, j) = rec.imu_per_frame[static_cast<size_t>(i)][static_cast<size_t>(j)];
    save_array(dir / "imu.f32", imu);
  }
}

Recording load_recording(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream mf(mpath);
  if (!mf) throw std::runtime_error("missing manifest: " + mpath.string());
  json m;
  try {
    mf >> m;
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt manifest " + mpath.string() + ": " + e.what());
  }

  const int version = m.value("format_version", -1);
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported version " + std::to_string(version) + " in " + mpath.string());

  Recording rec;
  rec.path_id = m.value("path_id", dir.filename().string());
  rec.direction = m.value("direction", "");
  rec.source = m.value("source", "");
  rec.frame_timestamps_ns = m.at("timestamps_ns").get<std::vector<int64_t>>();
  const int count = m.at("frame_count").get<int>();
  const std::string ext = m.value("frame_format", "jpg");
  if (static_cast<int>(rec.frame_timestamps_ns.size()) != count)
    throw std::runtime_error("length mismatch: timestamps vs frame_count in " + mpath.string());

  rec.frames.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const fs::path p = dir / "frames" / frame_name(i, ext);
    cv::Mat img = cv::imread(p.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("length mismatch: missing frame " + p.string());
    rec.frames.push_back(img);
  }

  Tensor<float> gaze = load_array((dir / "gaze.f32").string());
  if (gaze.rank() != 2 || gaze.dim(1) != 3 || gaze.dim(0) != count)
    throw std::runtime_error("length mismatch: gaze array vs frame count in " + dir.string());
  rec.gaze_points.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto& g = rec.gaze_points[static_cast<size_t>(i)];
    g.x = gaze.at(i, 0);
    g.y = gaze.at(i, 1);
    g.valid = gaze.at(i, 2);
  }

  rec.has_imu = m.value("has_imu", false);
  if (rec.has_imu) {
    Tensor<float> imu = load_array((dir / "imu.f32").string());
    if (imu.rank() != 2 || imu.dim(1) != 6 || imu.dim(0) != count)
      throw std::runtime_error("length mismatch: imu array vs frame count in " + dir.string());
    rec.imu_per_frame.resize(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
      for (int j = 0; j < 6; ++j) rec.imu_per_frame[static_cast<size_t>(i)][static_cast<size_t>(j)] = imu.at(i, j);
  }

  rec.validate();
  return rec;
}

std::vector<fs::path> list_recordings(const fs::path& data_root) {
  std::vector<fs::path> out;
  if (!fs::exists(data_root)) return out;
  for (const auto& e : fs::directory_iterator(data_root))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void save_split(const SplitSpec& split, double ratio, const fs::path& file) {
  json j;
  j["train"] = std::vector<std::string>(split.train_paths.begin(), split.train_paths.end());
  j["test"] = std::vector<std::string>(split.test_paths.begin(), split.test_paths.end());
  j["seed"] = split.seed;
  j["ratio"] = ratio;
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write split file: " + file.string());
  f << j.dump(2) << "\n";
}

SplitSpec load_split(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw std::runtime_error("missing split file: " + file.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt split file " + file.string() + ": " + e.what());
  }
  SplitSpec s;
  for (const auto& p : j.at("train")) s.train_paths.insert(p.get<std::string>());
  for (const auto& p : j.at("test")) s.test_paths.insert(p.get<std::string>());
  s.seed = j.value("seed", 0ull);
  return s;
}

}  // namespace egogaze
