#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <opencv2/core.hpp>

namespace egogaze {

// One gaze sample: pixel coordinates in the stored frame resolution. valid=0
// marks a missing sample (blink / tracker dropout); x,y are then undefined.
struct GazePoint {
  float x = 0.f, y = 0.f;
  float valid = 0.f;  // stored as a float channel in gaze.f32

  bool missing() const { return valid == 0.f; }
};

struct ImuSample {
  int64_t timestamp_ns = 0;
  float accel[3] = {0, 0, 0};  // m/s^2
  float gyro[3] = {0, 0, 0};   // rad/s
};

struct Recording {
  std::string path_id;
  std::string direction = "forward";  // forward | reverse
  std::string source = "synthetic";   // real | synthetic
  std::vector<int64_t> frame_timestamps_ns;   // strictly increasing
  std::vector<cv::Mat> frames;                // H x W x 3, uint8
  std::vector<GazePoint> gaze_points;         // per frame
  std::vector<std::array<float, 6>> imu_per_frame;  // accel xyz, gyro xyz
  bool has_imu = false;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().rows; }
  int width() const { return frames.empty() ? 0 : frames.front().cols; }
  void validate() const;  // throws on invariant violations
};

struct ClipSample {
  std::vector<cv::Mat> frames;  // clip_len frames
  int query_index = 0;          // defaults to clip_len - 1
  float gaze_x = 0.f, gaze_y = 0.f;
  std::string source_recording;
  int window_start = 0;
  std::vector<int> frame_indices;  // absolute indices into the recording
};

struct SplitSpec {
  std::set<std::string> train_paths;
  std::set<std::string> test_paths;
  uint64_t seed = 0;
};

// Nearest-frame assignment (ties to the earlier frame); multiple samples on a
// frame are averaged; frames with no sample are flagged missing.
std::vector<GazePoint> align_gaze_to_frames(const std::vector<std::tuple<int64_t, float, float>>& gaze_stream,
                                            const std::vector<int64_t>& frame_timestamps);

// Bucket each IMU sample to its nearest frame, mean per bucket, empty buckets
// copy the nearest non-empty frame. Empty stream -> (empty vector, has_imu false).
std::vector<std::array<float, 6>> aggregate_imu_per_frame(const std::vector<ImuSample>& imu_stream,
                                                          const std::vector<int64_t>& frame_timestamps);

// Bilinear resize of all frames to (target_h, target_w), rescaling valid gaze
// coordinates in place and clamping them into bounds.
void downscale_frames(Recording& rec, int target_h, int target_w);

std::vector<ClipSample> sample_clips(const Recording& rec, int window = 64, int clip_len = 16, int hop = 16);

SplitSpec make_split(const std::vector<std::string>& path_ids, double ratio, uint64_t seed);

}  // namespace egogaze
