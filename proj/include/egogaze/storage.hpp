#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "egogaze/recording.hpp"

namespace egogaze {

// On-disk layout per recording directory:
//   manifest.json           format_version, path_id, direction, resolution,
//                           frame_count, frame_format, has_imu, timestamps_ns
//   frames/%06d.png|.jpg    8-bit BGR frames
//   gaze.f32                EGC1 array (T, 3): x, y, valid
//   imu.f32                 EGC1 array (T, 6): accel xyz, gyro xyz (if present)
void save_recording(const Recording& rec, const std::filesystem::path& dir, bool lossless = true);
Recording load_recording(const std::filesystem::path& dir);

// Recording subdirectories (those holding a manifest.json) under a data root,
// sorted by path_id.
std::vector<std::filesystem::path> list_recordings(const std::filesystem::path& data_root);

// split.json helpers used by the CLI and tests.
void save_split(const SplitSpec& split, double ratio, const std::filesystem::path& file);
SplitSpec load_split(const std::filesystem::path& file);

}  // namespace egogaze
