#pragma once

#include <limits>
#include <vector>

#include "egogaze/gaze_maps.hpp"

namespace egogaze {

struct MetricConfig {
  double epsilon = 1e-7;     // KLD stabilizer, inside the denominator only
  bool population_std = true;  // fixed; sample std intentionally not offered
};

// Per-frame values; NaN marks a metric that was skipped for this frame.
struct FrameMetrics {
  double auc_judd = std::numeric_limits<double>::quiet_NaN();
  double cc = std::numeric_limits<double>::quiet_NaN();
  double kld = std::numeric_limits<double>::quiet_NaN();
  double sim = std::numeric_limits<double>::quiet_NaN();
  double nss = std::numeric_limits<double>::quiet_NaN();
  bool auc_degenerate = false;
};

struct MetricReport {
  // Means over the frames where each metric was evaluated.
  double auc_judd = std::numeric_limits<double>::quiet_NaN();
  double cc = std::numeric_limits<double>::quiet_NaN();
  double kld = std::numeric_limits<double>::quiet_NaN();
  double sim = std::numeric_limits<double>::quiet_NaN();
  double nss = std::numeric_limits<double>::quiet_NaN();
  int frames = 0;
  int skipped_auc = 0, skipped_cc = 0, skipped_kld = 0, skipped_sim = 0, skipped_nss = 0;
  int degenerate_auc = 0;  // constant predictions scored at chance
  std::vector<FrameMetrics> per_frame;
};

// AUC with Judd thresholds: the predicted values at the fixated pixels, plus the
// (0,0)/(1,1) ROC endpoints. Constant predictions score 0.5 and set *degenerate.
double auc_judd(const GridD& pred, const FixationMap& fix, bool* degenerate = nullptr);

// Pearson correlation over pixels, population statistics. Throws on zero variance.
double cc(const GridD& pred, const GridD& gt);

// Sum_i Q(i) * ln(Q(i) / (P(i) + eps)); Q from fixation multiplicities, P = pred
// normalized. Throws "empty prediction" on an all-zero pred.
double kld(const GridD& pred, const FixationMap& fix, const MetricConfig& cfg = {});

// Histogram intersection of the two maps after normalizing each to sum 1.
double sim(const GridD& pred, const GridD& gt);

// Mean z-scored saliency at the fixation coordinates (duplicates count per occurrence).
double nss(const GridD& pred, const FixationMap& fix);

// Per-frame metrics averaged over the batch; a frame that errors for one metric is
// skipped for that metric only and counted in the matching skipped_* field.
MetricReport evaluate_all(const std::vector<GridD>& preds, const std::vector<FixationMap>& fixs,
                          const std::vector<DensityMap>& densities, const MetricConfig& cfg = {});

}  // namespace egogaze
