#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egogaze/metrics.hpp"
#include "egogaze/model.hpp"
#include "egogaze/recording.hpp"

namespace egogaze {

struct TrainConfig {
  double learning_rate = 0.002;
  int epochs = 10;
  int batch_size = 16;
  uint64_t seed = 0;
  int max_steps = 0;          // 0 = no cap
  double val_fraction = 0.15; // held-out slice of train clips for per-epoch NSS
  bool verbose = true;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
  std::vector<double> val_nss;  // one per epoch, NaN when no validation clips
  int steps = 0;
};

// Ground-truth density sigma: H/16 pixels (14 at 224).
inline double gt_sigma_for(int input_size) { return input_size / 16.0; }

// Fits the center prior on the training gaze, then optimizes the head with
// Adam on the MSE between postprocessed maps and Gaussian density targets.
// The video backbone stays frozen throughout.
TrainResult train(EcnModel& model, const std::vector<ClipSample>& train_clips, const TrainConfig& cfg);

struct LeaderboardRow {
  std::string model_name;
  MetricReport report;
  int64_t parameter_count = 0;
};

LeaderboardRow evaluate_model(EcnModel& model, const std::string& name, const std::vector<ClipSample>& test_clips,
                              const MetricConfig& mcfg = {});

// Baseline that predicts the same map for every frame (center prior, uniform).
LeaderboardRow evaluate_constant(const GridD& map, const std::string& name, const std::vector<ClipSample>& test_clips,
                                 const MetricConfig& mcfg = {});

// Rows sorted by NSS descending (ties by model_name); best value per column
// marked in the text rendering, KLD best = minimum.
std::string leaderboard_text(std::vector<LeaderboardRow> rows);
std::string leaderboard_csv(std::vector<LeaderboardRow> rows);

void save_loss_curve_csv(const TrainResult& result, const std::filesystem::path& file);
void save_train_log_csv(const TrainResult& result, const std::filesystem::path& file);

// Per-clip ground truth at the model's input resolution.
FixationMap clip_fixation(const ClipSample& clip, int input_size);
DensityMap clip_density(const ClipSample& clip, int input_size);

}  // namespace egogaze
