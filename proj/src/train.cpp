#include "egogaze/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "egogaze/gaze_maps.hpp"
#include "egogaze/nn/adam.hpp"

namespace egogaze {

namespace {

std::pair<double, double> scaled_gaze(const ClipSample& clip, int input_size) {
  const cv::Mat& f = clip.frames.back();
  return {clip.gaze_x * static_cast<double>(input_size) / f.cols,
          clip.gaze_y * static_cast<double>(input_size) / f.rows};
}

// Query-slice spatio-temporal features (1, f_D, h, w) for one clip.
Tensor<float> st_slice(const EcnModel& model, const ClipSample& clip) {
  const Tensor<float> ct = clip_tensor(clip.frames, model.cfg.input_size);
  const BackboneFeatures bf = model.extract_video_features(ct);
  const int t = bf.features.dim(0) - 1, c = bf.features.dim(1), h = bf.features.dim(2), w = bf.features.dim(3);
  Tensor<float> out({1, c, h, w});
  const size_t plane = static_cast<size_t>(c) * h * w;
  std::copy_n(bf.features.ptr() + static_cast<size_t>(t) * plane, plane, out.ptr());
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

FixationMap clip_fixation(const ClipSample& clip, int input_size) {
  auto [gx, gy] = scaled_gaze(clip, input_size);
  return fixation_map_from_points({{gx, gy}}, input_size, input_size);
}

DensityMap clip_density(const ClipSample& clip, int input_size) {
  return density_from_fixations(clip_fixation(clip, input_size), gt_sigma_for(input_size));
}

TrainResult train(EcnModel& model, const std::vector<ClipSample>& train_clips, const TrainConfig& cfg) {
  if (train_clips.empty()) throw std::invalid_argument("empty split: no training clips");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.learning_rate < 0) throw std::invalid_argument("learning_rate must be >= 0");

  const int S = model.cfg.input_size;
  const size_t n = train_clips.size();

  // Validation holds out whole paths; with too few paths (or val_fraction 0)
  // the per-epoch NSS is reported on the training clips instead.
  std::map<std::string, std::vector<size_t>> by_path;
  for (size_t i = 0; i < n; ++i) by_path[train_clips[i].source_recording].push_back(i);
  std::vector<std::string> paths;
  for (const auto& [p, _] : by_path) paths.push_back(p);
  std::mt19937_64 split_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::shuffle(paths.begin(), paths.end(), split_rng);
  size_t val_paths = static_cast<size_t>(std::floor(cfg.val_fraction * static_cast<double>(paths.size())));
  if (val_paths >= paths.size()) val_paths = paths.size() - 1;
  std::vector<size_t> fit_idx, val_idx;
  for (size_t k = 0; k < paths.size(); ++k) {
    auto& dst = k < paths.size() - val_paths ? fit_idx : val_idx;
    const auto& members = by_path[paths[k]];
    dst.insert(dst.end(), members.begin(), members.end());
  }
  const bool val_is_train = val_idx.empty();
  if (val_is_train) val_idx = fit_idx;

  // Center prior fitted on the training slice's gaze.
  std::vector<std::pair<double, double>> fit_gaze;
  fit_gaze.reserve(fit_idx.size());
  for (size_t i : fit_idx) fit_gaze.push_back(scaled_gaze(train_clips[i], S));
  if (fit_gaze.size() < 2) {
    fit_gaze.push_back(fit_gaze.front());  // single clip: degenerate but usable prior
  }
  model.prior = fit_center_prior(fit_gaze, S, S);
  const Tensor<float> prior = model.prior_tensor();

  // Per-clip caches: query frame tensor, frozen st features, flat target map.
  const bool has_st = model.cfg.backbone != Backbone::none;
  std::vector<Tensor<float>> frames_cache(n), st_cache(n);
  std::vector<std::vector<float>> target_cache(n);
  for (size_t i = 0; i < n; ++i) {
    frames_cache[i] = frame_tensor(train_clips[i].frames.back(), S);
    if (has_st) st_cache[i] = st_slice(model, train_clips[i]);
    const DensityMap d = clip_density(train_clips[i], S);
    target_cache[i].resize(d.grid.data.size());
    for (size_t k = 0; k < d.grid.data.size(); ++k) target_cache[i][k] = static_cast<float>(d.grid.data[k]);
  }
  const int fd = has_st ? st_cache[0].dim(1) : 0;
  const int fh = has_st ? st_cache[0].dim(2) : 0, fw = has_st ? st_cache[0].dim(3) : 0;

  nn::Adam<float> opt(cfg.learning_rate);
  auto params = model.head.params();

  TrainResult res;
  const double hw = static_cast<double>(S) * S;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<size_t> sched = fit_idx;
    std::mt19937_64 erng(cfg.seed + 1000003ull * static_cast<uint64_t>(epoch) + 1);
    std::shuffle(sched.begin(), sched.end(), erng);

    std::vector<double> epoch_losses;
    for (size_t off = 0; off < sched.size() && !stop; off += static_cast<size_t>(cfg.batch_size)) {
      const size_t bsz = std::min(static_cast<size_t>(cfg.batch_size), sched.size() - off);
      const int B = static_cast<int>(bsz);
      Tensor<float> xb({B, 3, S, S});
      Tensor<float> sb;
      if (has_st) sb = Tensor<float>({B, fd, fh, fw});
      for (size_t b = 0; b < bsz; ++b) {
        const size_t i = sched[off + b];
        std::copy_n(frames_cache[i].ptr(), frames_cache[i].numel(), xb.ptr() + static_cast<int64_t>(b) * frames_cache[i].numel());
        if (has_st) std::copy_n(st_cache[i].ptr(), st_cache[i].numel(), sb.ptr() + static_cast<int64_t>(b) * st_cache[i].numel());
      }

      const Tensor<float> raw = model.head.forward(xb, has_st ? &sb : nullptr, /*keep=*/true);
      const Tensor<float> post = model.head.postprocess_fwd(raw, prior, /*keep=*/true);

      // L = (HW / B) * sum((p - t)^2): the HW scale keeps per-parameter
      // gradients well above Adam's epsilon at map scale ~1/HW.
      double loss = 0.0;
      Tensor<float> gout(post.shape);
      const double gscale = 2.0 * hw / B;
      for (size_t b = 0; b < bsz; ++b) {
        const float* p = post.ptr() + static_cast<size_t>(b) * static_cast<size_t>(hw);
        float* g = gout.ptr() + static_cast<size_t>(b) * static_cast<size_t>(hw);
        const std::vector<float>& t = target_cache[sched[off + b]];
        for (size_t k = 0; k < t.size(); ++k) {
          const double d = static_cast<double>(p[k]) - t[k];
          loss += d * d;
          g[k] = static_cast<float>(gscale * d);
        }
      }
      loss *= hw / B;
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite loss at step " << res.steps << " (epoch " << epoch << ", lr " << cfg.learning_rate
           << ", batch " << B << ")";
        throw std::runtime_error(os.str());
      }

      const Tensor<float> graw = model.head.postprocess_bwd(gout);
      model.head.backward(graw);
      opt.step(params);
      for (auto* p : params) p->g.zero();

      res.step_losses.push_back(loss);
      epoch_losses.push_back(loss);
      ++res.steps;
      if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) stop = true;
    }
    res.epoch_losses.push_back(mean_of(epoch_losses));

    double vnss = std::numeric_limits<double>::quiet_NaN();
    if (!val_idx.empty()) {
      std::vector<double> scores;
      for (size_t i : val_idx) {
        const Tensor<float>& xf = frames_cache[i];
        Tensor<float> xb({1, 3, S, S});
        std::copy_n(xf.ptr(), xf.numel(), xb.ptr());
        const Tensor<float> raw = model.head.forward(xb, has_st ? &st_cache[i] : nullptr);
        const Tensor<float> post = model.head.postprocess_fwd(raw, prior);
        GridD pred({S, S});
        for (int64_t k = 0; k < pred.numel(); ++k) pred[k] = static_cast<double>(post[k]);
        try {
          scores.push_back(nss(pred, clip_fixation(train_clips[i], S)));
        } catch (const std::exception&) {
        }
      }
      vnss = mean_of(scores);
    }
    res.val_nss.push_back(vnss);
    if (cfg.verbose) {
      std::printf("epoch %d/%d  train_loss %.6f  val_nss %s\n", epoch + 1, cfg.epochs, res.epoch_losses.back(),
                  std::isfinite(vnss) ? std::to_string(vnss).c_str() : "n/a");
      std::fflush(stdout);
    }
  }
  return res;
}

LeaderboardRow evaluate_model(EcnModel& model, const std::string& name, const std::vector<ClipSample>& test_clips,
                              const MetricConfig& mcfg) {
  if (test_clips.empty()) throw std::invalid_argument("empty split: no test clips");
  const int S = model.cfg.input_size;
  std::vector<GridD> preds;
  std::vector<FixationMap> fixs;
  std::vector<DensityMap> dens;
  preds.reserve(test_clips.size());
  for (const auto& clip : test_clips) {
    preds.push_back(model.predict(clip));
    fixs.push_back(clip_fixation(clip, S));
    dens.push_back(clip_density(clip, S));
  }
  LeaderboardRow row;
  row.model_name = name;
  row.report = evaluate_all(preds, fixs, dens, mcfg);
  row.parameter_count = count_parameters(model).total();
  return row;
}

LeaderboardRow evaluate_constant(const GridD& map, const std::string& name, const std::vector<ClipSample>& test_clips,
                                 const MetricConfig& mcfg) {
  if (test_clips.empty()) throw std::invalid_argument("empty split: no test clips");
  const int S = map.dim(0);
  std::vector<GridD> preds(test_clips.size(), map);
  std::vector<FixationMap> fixs;
  std::vector<DensityMap> dens;
  for (const auto& clip : test_clips) {
    fixs.push_back(clip_fixation(clip, S));
    dens.push_back(clip_density(clip, S));
  }
  LeaderboardRow row;
  row.model_name = name;
  row.report = evaluate_all(preds, fixs, dens, mcfg);
  row.parameter_count = 0;
  return row;
}

namespace {

void sort_rows(std::vector<LeaderboardRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    const double na = std::isfinite(a.report.nss) ? a.report.nss : -std::numeric_limits<double>::infinity();
    const double nb = std::isfinite(b.report.nss) ? b.report.nss : -std::numeric_limits<double>::infinity();
    if (na != nb) return na > nb;
    return a.model_name < b.model_name;
  });
}

struct Column {
  const char* name;
  double MetricReport::*field;
  bool higher_better;
};

constexpr Column kColumns[] = {
    {"auc_judd", &MetricReport::auc_judd, true}, {"cc", &MetricReport::cc, true},
    {"kld", &MetricReport::kld, false},          {"sim", &MetricReport::sim, true},
    {"nss", &MetricReport::nss, true},
};

std::vector<double> best_values(const std::vector<LeaderboardRow>& rows) {
  std::vector<double> best;
  for (const auto& col : kColumns) {
    double b = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : rows) {
      const double v = r.report.*col.field;
      if (!std::isfinite(v)) continue;
      if (!std::isfinite(b) || (col.higher_better ? v > b : v < b)) b = v;
    }
    best.push_back(b);
  }
  return best;
}

}  // namespace

std::string leaderboard_text(std::vector<LeaderboardRow> rows) {
  if (rows.empty()) throw std::invalid_argument("leaderboard needs at least one row");
  sort_rows(rows);
  const std::vector<double> best = best_values(rows);
  std::ostringstream os;
  size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model_name.size());
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "model";
  for (const auto& col : kColumns) os << std::right << std::setw(10) << col.name;
  os << std::setw(8) << "frames" << std::setw(12) << "params" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << r.model_name;
    for (size_t c = 0; c < std::size(kColumns); ++c) {
      const double v = r.report.*kColumns[c].field;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f%s", v,
                    (std::isfinite(v) && std::isfinite(best[c]) && v == best[c]) ? "*" : " ");
      os << std::right << std::setw(10) << buf;
    }
    os << std::setw(8) << r.report.frames << std::setw(12) << r.parameter_count << "\n";
  }
  os << "(* best per column; kld lower is better)\n";
  return os.str();
}

std::string leaderboard_csv(std::vector<LeaderboardRow> rows) {
  if (rows.empty()) throw std::invalid_argument("leaderboard needs at least one row");
  sort_rows(rows);
  std::ostringstream os;
  os << "model,auc_judd,cc,kld,sim,nss,frames,parameters\n";
  for (const auto& r : rows) {
    os << r.model_name;
    for (const auto& col : kColumns) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.6f", r.report.*col.field);
      os << buf;
    }
    os << "," << r.report.frames << "," << r.parameter_count << "\n";
  }
  return os.str();
}

void save_loss_curve_csv(const TrainResult& result, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write loss curve: " + file.string());
  f << "step,loss\n";
  for (size_t i = 0; i < result.step_losses.size(); ++i) f << i << "," << result.step_losses[i] << "\n";
}

void save_train_log_csv(const TrainResult& result, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write train log: " + file.string());
  f << "epoch,train_loss,val_nss\n";
  for (size_t i = 0; i < result.epoch_losses.size(); ++i) {
    f << (i + 1) << "," << result.epoch_losses[i] << ",";
    if (i < result.val_nss.size() && std::isfinite(result.val_nss[i])) f << result.val_nss[i];
    f << "\n";
  }
}

}  // namespace egogaze
