#include "egogaze/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace egogaze {

namespace {

void check_same_shape(const GridD& a, const GridD& b) {
  if (a.shape != b.shape) throw std::invalid_argument("shape mismatch");
}

void check_pred_against_fix(const GridD& pred, const FixationMap& fix) {
  if (pred.rank() != 2 || pred.dim(0) != fix.height || pred.dim(1) != fix.width)
    throw std::invalid_argument("shape mismatch");
  if (fix.coords.empty()) throw std::invalid_argument("no fixations");
}

struct Moments {
  double mean = 0.0, stddev = 0.0;  // population
};

Moments population_moments(const GridD& g) {
  const double n = static_cast<double>(g.numel());
  double mean = 0.0;
  for (double v : g.data) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : g.data) var += (v - mean) * (v - mean);
  var /= n;
  return {mean, std::sqrt(var)};
}

// Exact constancy check: summation rounding can leave a constant map with a
// tiny nonzero variance, so "zero variance" cannot rely on stddev == 0 alone.
bool is_constant(const GridD& g) {
  const auto [mn, mx] = std::minmax_element(g.data.begin(), g.data.end());
  return *mn == *mx;
}

}  // namespace

double auc_judd(const GridD& pred, const FixationMap& fix, bool* degenerate) {
  check_pred_against_fix(pred, fix);
  if (degenerate) *degenerate = false;
  for (double v : pred.data)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite prediction");

  const auto [mn, mx] = std::minmax_element(pred.data.begin(), pred.data.end());
  if (*mn == *mx) {
    if (degenerate) *degenerate = true;
    return 0.5;
  }

  // Partition pixel values by the binary fixation map (distinct fixated pixels).
  std::vector<double> pos, neg;
  pos.reserve(fix.coords.size());
  neg.reserve(pred.numel());
  for (int y = 0; y < fix.height; ++y)
    for (int x = 0; x < fix.width; ++x)
      (fix.grid.at(y, x) > 0.0 ? pos : neg).push_back(pred.at(y, x));
  if (pos.empty()) throw std::invalid_argument("no fixations");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<double> thresholds = pos;
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<std::pair<double, double>> roc;  // (FPR, TPR)
  roc.reserve(thresholds.size() + 2);
  roc.emplace_back(0.0, 0.0);
  roc.emplace_back(1.0, 1.0);
  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  for (double t : thresholds) {
    const auto tp = pos.end() - std::lower_bound(pos.begin(), pos.end(), t);
    const auto fp = neg.end() - std::lower_bound(neg.begin(), neg.end(), t);
    const double tpr = static_cast<double>(tp) / np;
    const double fpr = nn > 0.0 ? static_cast<double>(fp) / nn : 0.0;
    roc.emplace_back(fpr, tpr);
  }
  std::sort(roc.begin(), roc.end());
  double area = 0.0;
  for (size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].first - roc[i - 1].first) * (roc[i].second + roc[i - 1].second) * 0.5;
  return std::clamp(area, 0.0, 1.0);
}

double cc(const GridD& pred, const GridD& gt) {
  check_same_shape(pred, gt);
  if (is_constant(pred) || is_constant(gt)) throw std::invalid_argument("zero variance");
  const auto mp = population_moments(pred);
  const auto mq = population_moments(gt);
  if (mp.stddev == 0.0 || mq.stddev == 0.0) throw std::invalid_argument("zero variance");
  double cov = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i)
    cov += (pred.data[i] - mp.mean) * (gt.data[i] - mq.mean);
  cov /= static_cast<double>(pred.numel());
  return cov / (mp.stddev * mq.stddev);
}

double kld(const GridD& pred, const FixationMap& fix, const MetricConfig& cfg) {
  check_pred_against_fix(pred, fix);
  if (cfg.epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  double sum = 0.0;
  for (double v : pred.data) {
    if (v < 0.0) throw std::invalid_argument("negative values in prediction");
    sum += v;
  }
  if (sum <= 0.0) throw std::invalid_argument("empty prediction");

  // Q weighted by fixation multiplicity; only support pixels contribute.
  std::unordered_map<long, int> mult;
  for (const auto& [x, y] : fix.coords) ++mult[static_cast<long>(y) * fix.width + x];
  const double n = static_cast<double>(fix.coords.size());
  double kl = 0.0;
  for (const auto& [idx, count] : mult) {
    const double q = count / n;
    const double p = pred.data[static_cast<size_t>(idx)] / sum;
    kl += q * std::log(q / (p + cfg.epsilon));
  }
  return kl;
}

double sim(const GridD& pred, const GridD& gt) {
  check_same_shape(pred, gt);
  double sp = 0.0, sq = 0.0;
  for (double v : pred.data) {
    if (v < 0.0) throw std::invalid_argument("negative values in prediction");
    sp += v;
  }
  for (double v : gt.data) {
    if (v < 0.0) throw std::invalid_argument("negative values in ground truth");
    sq += v;
  }
  if (sp <= 0.0 || sq <= 0.0) throw std::invalid_argument("zero-sum input");
  double s = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) s += std::min(pred.data[i] / sp, gt.data[i] / sq);
  return s;
}

double nss(const GridD& pred, const FixationMap& fix) {
  check_pred_against_fix(pred, fix);
  if (is_constant(pred)) throw std::invalid_argument("zero variance");
  const auto m = population_moments(pred);
  if (m.stddev == 0.0) throw std::invalid_argument("zero variance");
  double acc = 0.0;
  for (const auto& [x, y] : fix.coords) acc += (pred.at(y, x) - m.mean) / m.stddev;
  return acc / static_cast<double>(fix.coords.size());
}

MetricReport evaluate_all(const std::vector<GridD>& preds, const std::vector<FixationMap>& fixs,
                          const std::vector<DensityMap>& densities, const MetricConfig& cfg) {
  if (preds.size() != fixs.size() || preds.size() != densities.size())
    throw std::invalid_argument("length mismatch");
  MetricReport rep;
  rep.frames = static_cast<int>(preds.size());
  rep.per_frame.resize(preds.size());
  double s_auc = 0, s_cc = 0, s_kld = 0, s_sim = 0, s_nss = 0;
  int n_auc = 0, n_cc = 0, n_kld = 0, n_sim = 0, n_nss = 0;

  for (size_t i = 0; i < preds.size(); ++i) {
    FrameMetrics& fm = rep.per_frame[i];
    const GridD& pred = preds[i];
    bool finite = true;
    for (double v : pred.data)
      if (!std::isfinite(v)) { finite = false; break; }
    if (!finite) {
      ++rep.skipped_auc; ++rep.skipped_cc; ++rep.skipped_kld; ++rep.skipped_sim; ++rep.skipped_nss;
      continue;
    }
    try {
      fm.auc_judd = auc_judd(pred, fixs[i], &fm.auc_degenerate);
      if (fm.auc_degenerate) ++rep.degenerate_auc;
      s_auc += fm.auc_judd;
      ++n_auc;
    } catch (const std::exception&) { ++rep.skipped_auc; }
    try {
      fm.cc = cc(pred, densities[i].grid);
      s_cc += fm.cc;
      ++n_cc;
    } catch (const std::exception&) { ++rep.skipped_cc; }
    try {
      fm.kld = kld(pred, fixs[i], cfg);
      s_kld += fm.kld;
      ++n_kld;
    } catch (const std::exception&) { ++rep.skipped_kld; }
    try {
      fm.sim = sim(pred, densities[i].grid);
      s_sim += fm.sim;
      ++n_sim;
    } catch (const std::exception&) { ++rep.skipped_sim; }
    try {
      fm.nss = nss(pred, fixs[i]);
      s_nss += fm.nss;
      ++n_nss;
    } catch (const std::exception&) { ++rep.skipped_nss; }
  }
  if (n_auc) rep.auc_judd = s_auc / n_auc;
  if (n_cc) rep.cc = s_cc / n_cc;
  if (n_kld) rep.kld = s_kld / n_kld;
  if (n_sim) rep.sim = s_sim / n_sim;
  if (n_nss) rep.nss = s_nss / n_nss;
  return rep;
}

}  // namespace egogaze
