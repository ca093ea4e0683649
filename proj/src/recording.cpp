#include "egogaze/recording.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

namespace egogaze {

namespace {

void check_sorted(const std::vector<int64_t>& ts, bool strict) {
  for (size_t i = 1; i < ts.size(); ++i)
    if (strict ? ts[i] <= ts[i - 1] : ts[i] < ts[i - 1]) throw std::invalid_argument("unsorted timestamps");
}

// Nearest frame index for a timestamp; equidistant samples go to the earlier
// frame (deterministic and causality-friendly).
size_t nearest_frame(const std::vector<int64_t>& frame_ts, int64_t t) {
  auto it = std::lower_bound(frame_ts.begin(), frame_ts.end(), t);
  if (it == frame_ts.begin()) return 0;
  if (it == frame_ts.end()) return frame_ts.size() - 1;
  const size_t hi = static_cast<size_t>(it - frame_ts.begin());
  const size_t lo = hi - 1;
  return (t - frame_ts[lo] <= frame_ts[hi] - t) ? lo : hi;
}

}  // namespace

void Recording::validate() const {
  if (frame_timestamps_ns.size() != frames.size() || gaze_points.size() != frames.size() ||
      (has_imu && imu_per_frame.size() != frames.size()))
    throw std::invalid_argument("length mismatch between per-frame arrays and frame count");
  check_sorted(frame_timestamps_ns, /*strict=*/true);
  const int h = height(), w = width();
  for (const auto& f : frames)
    if (f.rows != h || f.cols != w || f.type() != CV_8UC3) throw std::invalid_argument("inconsistent frame format");
  for (const auto& g : gaze_points) {
    if (g.missing()) continue;
    if (!(g.x >= 0.f && g.x < static_cast<float>(w) && g.y >= 0.f && g.y < static_cast<float>(h)))
      throw std::invalid_argument("gaze point out of bounds");
  }
}

std::vector<GazePoint> align_gaze_to_frames(const std::vector<std::tuple<int64_t, float, float>>& gaze_stream,
                                            const std::vector<int64_t>& frame_timestamps) {
  if (frame_timestamps.empty()) throw std::invalid_argument("no frames");
  if (gaze_stream.empty()) throw std::invalid_argument("no gaze samples");
  check_sorted(frame_timestamps, /*strict=*/true);
  for (size_t i = 1; i < gaze_stream.size(); ++i)
    if (std::get<0>(gaze_stream[i]) < std::get<0>(gaze_stream[i - 1]))
      throw std::invalid_argument("unsorted timestamps");

  std::vector<double> sx(frame_timestamps.size(), 0.0), sy(frame_timestamps.size(), 0.0);
  std::vector<int> count(frame_timestamps.size(), 0);
  for (const auto& [t, x, y] : gaze_stream) {
    const size_t k = nearest_frame(frame_timestamps, t);
    sx[k] += x;
    sy[k] += y;
    ++count[k];
  }
  std::vector<GazePoint> out(frame_timestamps.size());
  for (size_t k = 0; k < out.size(); ++k) {
    if (count[k] == 0) continue;  // stays missing
    out[k].x = static_cast<float>(sx[k] / count[k]);
    out[k].y = static_cast<float>(sy[k] / count[k]);
    out[k].valid = 1.f;
  }
  return out;
}

std::vector<std::array<float, 6>> aggregate_imu_per_frame(const std::vector<ImuSample>& imu_stream,
                                                          const std::vector<int64_t>& frame_timestamps) {
  if (frame_timestamps.empty()) throw std::invalid_argument("no frames");
  if (imu_stream.empty()) return {};
  for (size_t i = 1; i < imu_stream.size(); ++i)
    if (imu_stream[i].timestamp_ns < imu_stream[i - 1].timestamp_ns)
      throw std::invalid_argument("unsorted timestamps");

  const size_t n = frame_timestamps.size();
  std::vector<std::array<double, 6>> acc(n, {0, 0, 0, 0, 0, 0});
  std::vector<int> count(n, 0);
  for (const auto& s : imu_stream) {
    const size_t k = nearest_frame(frame_timestamps, s.timestamp_ns);
    for (int i = 0; i < 3; ++i) {
      acc[k][static_cast<size_t>(i)] += s.accel[i];
      acc[k][static_cast<size_t>(i + 3)] += s.gyro[i];
    }
    ++count[k];
  }
  std::vector<std::array<float, 6>> out(n);
  for (size_t k = 0; k < n; ++k)
    if (count[k])
      for (int i = 0; i < 6; ++i) out[k][static_cast<size_t>(i)] = static_cast<float>(acc[k][static_cast<size_t>(i)] / count[k]);
  // empty buckets copy the nearest (by timestamp, ties earlier) non-empty frame
  for (size_t k = 0; k < n; ++k) {
    if (count[k]) continue;
    size_t best = n;
    int64_t best_d = 0;
    for (size_t j = 0; j < n; ++j) {
      if (!count[j]) continue;
      const int64_t d = std::abs(frame_timestamps[j] - frame_timestamps[k]);
      if (best == n || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    out[k] = out[best];
  }
  return out;
}

void downscale_frames(Recording& rec, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) throw std::invalid_argument("target dimensions must be positive");
  const int h0 = rec.height(), w0 = rec.width();
  if (h0 < target_h || w0 < target_w) throw std::invalid_argument("target larger than source");
  if (h0 == target_h && w0 == target_w) return;
  const double fx = static_cast<double>(target_w) / w0, fy = static_cast<double>(target_h) / h0;
  for (auto& f : rec.frames) {
    cv::Mat r;
    cv::resize(f, r, cv::Size(target_w, target_h), 0, 0, cv::INTER_LINEAR);
    f = r;
  }
  for (auto& g : rec.gaze_points) {
    if (g.missing()) continue;
    g.x = std::min(static_cast<float>(g.x * fx), std::nextafter(static_cast<float>(target_w), 0.f));
    g.y = std::min(static_cast<float>(g.y * fy), std::nextafter(static_cast<float>(target_h), 0.f));
    g.x = std::max(g.x, 0.f);
    g.y = std::max(g.y, 0.f);
  }
}

std::vector<ClipSample> sample_clips(const Recording& rec, int window, int clip_len, int hop) {
  if (window <= 0 || clip_len <= 0 || hop <= 0) throw std::invalid_argument("window/clip_len/hop must be positive");
  if (window % clip_len) throw std::invalid_argument("window not divisible by clip_len");
  const int total = rec.frame_count();
  if (total < window) {
    std::cerr << "warning: recording " << rec.path_id << " shorter than window (" << total << " < " << window
              << "), no clips\n";
    return {};
  }
  const int stride = window / clip_len;
  std::vector<ClipSample> out;
  for (int start = 0; start + window <= total; start += hop) {
    ClipSample clip;
    clip.window_start = start;
    clip.query_index = clip_len - 1;
    clip.source_recording = rec.path_id;
    for (int i = 0; i < clip_len; ++i) {
      const int idx = start + i * stride;
      clip.frame_indices.push_back(idx);
      clip.frames.push_back(rec.frames[static_cast<size_t>(idx)]);
    }
    const GazePoint& g = rec.gaze_points[static_cast<size_t>(clip.frame_indices.back())];
    if (g.missing()) continue;  // missing-gaze query frames are not trainable/evaluable
    clip.gaze_x = g.x;
    clip.gaze_y = g.y;
    out.push_back(std::move(clip));
  }
  return out;
}

SplitSpec make_split(const std::vector<std::string>& path_ids, double ratio, uint64_t seed) {
  if (path_ids.size() < 2) throw std::invalid_argument("need at least 2 paths to split");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("ratio must lie in (0, 1)");
  std::vector<std::string> ids = path_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const auto n = static_cast<int64_t>(ids.size());
  if (n < 2) throw std::invalid_argument("need at least 2 distinct paths to split");
  // floor(ratio*(n-1)), clamped to keep both sides non-empty; at 25 paths and
  // 0.70 this gives the 16/9 split the evaluation protocol uses.
  int64_t train_n = std::clamp<int64_t>(static_cast<int64_t>(std::floor(ratio * static_cast<double>(n - 1))),
                                        int64_t{1}, n - 1);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  SplitSpec split;
  split.seed = seed;
  split.train_paths.insert(ids.begin(), ids.begin() + train_n);
  split.test_paths.insert(ids.begin() + train_n, ids.end());
  return split;
}

}  // namespace egogaze
