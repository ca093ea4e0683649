#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <utility>
#include <vector>

#include "egogaze/gaze_maps.hpp"
#include "egogaze/metrics.hpp"
#include "egogaze/model.hpp"
#include "egogaze/recording.hpp"
#include "egogaze/run_manifest.hpp"
#include "egogaze/storage.hpp"
#include "egogaze/synthetic.hpp"
#include "egogaze/train.hpp"

namespace py = pybind11;
using namespace egogaze;

namespace {

using PyArrayD = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Points = std::vector<std::pair<double, double>>;

GridD to_grid(const PyArrayD& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  GridD g({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))});
  std::copy_n(a.data(), g.numel(), g.ptr());
  return g;
}

py::array_t<double> from_grid(const GridD& g) {
  py::array_t<double> a(std::vector<py::ssize_t>{g.dim(0), g.dim(1)});
  std::copy_n(g.ptr(), g.numel(), a.mutable_data());
  return a;
}

FixationMap fix_for(const GridD& pred, const Points& points) {
  return fixation_map_from_points(points, pred.dim(0), pred.dim(1));
}

ModelConfig config_for(const std::string& preset, const std::string& backbone, uint64_t seed) {
  const Backbone b = backbone_from_name(backbone);
  ModelConfig cfg;
  if (preset == "published") cfg = ModelConfig::published(b);
  else if (preset == "desk") cfg = ModelConfig::desk(b);
  else if (preset == "miniature") cfg = ModelConfig::miniature();
  else throw std::invalid_argument("unknown preset '" + preset + "'");
  cfg.seed = seed;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "egocentric gaze prediction toolkit (C++ core)";
  m.attr("__version__") = "0.1.0";

  // ---- saliency metrics ----
  m.def(
      "auc_judd",
      [](const PyArrayD& pred, const Points& points) {
        const GridD p = to_grid(pred);
        bool degenerate = false;
        const double v = auc_judd(p, fix_for(p, points), &degenerate);
        return py::make_tuple(v, degenerate);
      },
      py::arg("pred"), py::arg("fixations"), "AUC-Judd; returns (value, degenerate_flag)");
  m.def(
      "cc", [](const PyArrayD& pred, const PyArrayD& gt) { return cc(to_grid(pred), to_grid(gt)); }, py::arg("pred"),
      py::arg("gt"));
  m.def(
      "kld",
      [](const PyArrayD& pred, const Points& points, double eps) {
        MetricConfig cfg;
        cfg.epsilon = eps;
        const GridD p = to_grid(pred);
        return kld(p, fix_for(p, points), cfg);
      },
      py::arg("pred"), py::arg("fixations"), py::arg("eps") = 1e-7);
  m.def(
      "sim", [](const PyArrayD& pred, const PyArrayD& gt) { return sim(to_grid(pred), to_grid(gt)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "nss",
      [](const PyArrayD& pred, const Points& points) {
        const GridD p = to_grid(pred);
        return nss(p, fix_for(p, points));
      },
      py::arg("pred"), py::arg("fixations"));
  m.def(
      "evaluate_all",
      [](const std::vector<PyArrayD>& preds, const std::vector<Points>& fixations, double sigma) {
        std::vector<GridD> ps;
        std::vector<FixationMap> fx;
        std::vector<DensityMap> dn;
        for (size_t i = 0; i < preds.size(); ++i) {
          ps.push_back(to_grid(preds[i]));
          fx.push_back(fix_for(ps.back(), fixations.at(i)));
          const double s = sigma > 0 ? sigma : ps.back().dim(0) / 16.0;
          dn.push_back(density_from_fixations(fx.back(), s));
        }
        const MetricReport r = evaluate_all(ps, fx, dn);
        py::dict d;
        d["auc_judd"] = r.auc_judd;
        d["cc"] = r.cc;
        d["kld"] = r.kld;
        d["sim"] = r.sim;
        d["nss"] = r.nss;
        d["frames"] = r.frames;
        d["skipped"] = py::make_tuple(r.skipped_auc, r.skipped_cc, r.skipped_kld, r.skipped_sim, r.skipped_nss);
        d["degenerate_auc"] = r.degenerate_auc;
        return d;
      },
      py::arg("preds"), py::arg("fixations"), py::arg("sigma") = 0.0,
      "Batch metric means; sigma <= 0 uses H/16 for the density ground truth");

  // ---- gaze maps ----
  m.def(
      "fixation_grid",
      [](const Points& points, int h, int w) { return from_grid(fixation_map_from_points(points, h, w).grid); },
      py::arg("points"), py::arg("height"), py::arg("width"));
  m.def(
      "density_from_points",
      [](const Points& points, int h, int w, double sigma) {
        return from_grid(density_from_fixations(fixation_map_from_points(points, h, w), sigma).grid);
      },
      py::arg("points"), py::arg("height"), py::arg("width"), py::arg("sigma"));
  m.def(
      "blur_map", [](const PyArrayD& map, double sigma) { return from_grid(blur_map(to_grid(map), sigma)); },
      py::arg("map"), py::arg("sigma"));
  m.def(
      "fit_center_prior",
      [](const Points& points, int h, int w) {
        const CenterPrior p = fit_center_prior(points, h, w);
        py::dict d;
        d["mean"] = py::make_tuple(p.mean_x, p.mean_y);
        d["cov"] = py::make_tuple(p.cov_xx, p.cov_xy, p.cov_yy);
        d["grid"] = from_grid(p.grid);
        return d;
      },
      py::arg("points"), py::arg("height"), py::arg("width"));

  // ---- dataset pipeline ----
  m.def(
      "make_split",
      [](const std::vector<std::string>& ids, double ratio, uint64_t seed) {
        const SplitSpec s = make_split(ids, ratio, seed);
        return py::make_tuple(std::vector<std::string>(s.train_paths.begin(), s.train_paths.end()),
                              std::vector<std::string>(s.test_paths.begin(), s.test_paths.end()));
      },
      py::arg("path_ids"), py::arg("ratio") = 0.7, py::arg("seed") = 0);
  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& out_dir, int paths, uint64_t seed, int size, double duration, double fps) {
        std::vector<std::string> dirs;
        for (int i = 0; i < paths; ++i) {
          SynthSpec spec;
          spec.height = spec.width = size;
          spec.duration_s = duration;
          spec.fps = fps;
          char name[32];
          std::snprintf(name, sizeof(name), "path%03d", i);
          spec.path_id = name;
          const Recording rec = generate_synthetic_recording(spec, seed + static_cast<uint64_t>(i));
          save_recording(rec, out_dir / name);
          dirs.push_back((out_dir / name).string());
        }
        return dirs;
      },
      py::arg("out_dir"), py::arg("paths") = 2, py::arg("seed") = 0, py::arg("size") = 64, py::arg("duration") = 2.5,
      py::arg("fps") = 30.0);
  m.def(
      "load_gaze",
      [](const std::filesystem::path& rec_dir) {
        const Recording rec = load_recording(rec_dir);
        py::array_t<float> a(std::vector<py::ssize_t>{rec.frame_count(), 3});
        auto* p = a.mutable_data();
        for (int i = 0; i < rec.frame_count(); ++i) {
          const auto& g = rec.gaze_points[static_cast<size_t>(i)];
          p[3 * i] = g.x;
          p[3 * i + 1] = g.y;
          p[3 * i + 2] = g.valid;
        }
        return a;
      },
      py::arg("recording_dir"));

  // ---- model ----
  m.def(
      "param_count",
      [](const std::string& preset, const std::string& backbone, uint64_t seed) {
        EcnModel model = EcnModel::create(config_for(preset, backbone, seed));
        const ParamCount pc = count_parameters(model);
        py::dict d;
        d["trainable"] = pc.trainable;
        d["frozen"] = pc.frozen;
        d["total"] = pc.total();
        return d;
      },
      py::arg("preset") = "published", py::arg("backbone") = "x3d", py::arg("seed") = 17);
  m.def(
      "save_untrained_checkpoint",
      [](const std::filesystem::path& path, const std::string& preset, const std::string& backbone, uint64_t seed) {
        EcnModel model = EcnModel::create(config_for(preset, backbone, seed));
        save_checkpoint(model, path);
      },
      py::arg("path"), py::arg("preset") = "desk", py::arg("backbone") = "none", py::arg("seed") = 17);
  m.def(
      "predict_map",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& rec_dir, int window, int hop,
         int window_start) {
        EcnModel model = load_checkpoint(ckpt);
        const Recording rec = load_recording(rec_dir);
        const auto clips = sample_clips(rec, window, model.cfg.clip_len, hop);
        if (clips.empty()) throw std::runtime_error("no clips available in " + rec_dir.string());
        const ClipSample* chosen = &clips.front();
        if (window_start >= 0) {
          chosen = nullptr;
          for (const auto& c : clips)
            if (c.window_start == window_start) chosen = &c;
          if (!chosen) throw std::runtime_error("no clip with window start " + std::to_string(window_start));
        }
        return from_grid(model.predict(*chosen));
      },
      py::arg("ckpt"), py::arg("recording_dir"), py::arg("window") = 64, py::arg("hop") = 16,
      py::arg("window_start") = -1);
}
