#pragma once

#include <cstdint>
#include <string>

#include "egogaze/recording.hpp"

namespace egogaze {

// Scene parameters for the synthetic desk-scale recordings: a scrolling
// textured background (stand-in for forward egomotion) plus a few bright
// moving blobs the gaze tends to follow.
struct SynthSpec {
  double duration_s = 4.0;
  double fps = 30.0;
  int height = 224;
  int width = 224;
  int attractors = 2;  // clamped to 1..3
  // Convex mix for the gaze trajectory; normalized internally.
  double center_weight = 0.25;
  double attractor_weight = 0.60;
  double noise_weight = 0.15;
  double imu_rate_hz = 1000.0;
  double missing_gaze_rate = 0.0;  // fraction of frames with a dropped (blink) sample
  std::string path_id = "synth";
  std::string direction = "forward";
};

Recording generate_synthetic_recording(const SynthSpec& spec, uint64_t seed);

}  // namespace egogaze
