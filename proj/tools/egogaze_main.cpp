#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "egogaze/array_io.hpp"
#include "egogaze/gaze_maps.hpp"
#include "egogaze/metrics.hpp"
#include "egogaze/model.hpp"
#include "egogaze/plot.hpp"
#include "egogaze/recording.hpp"
#include "egogaze/run_manifest.hpp"
#include "egogaze/storage.hpp"
#include "egogaze/synthetic.hpp"
#include "egogaze/train.hpp"

namespace fs = std::filesystem;
using namespace egogaze;

namespace {

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

RunManifest begin_manifest(const std::string& command_line, uint64_t seed) {
  RunManifest m;
  m.command = command_line;
  m.config_hash = fnv1a(command_line);
  m.seed = seed;
  m.started_at = iso8601_now();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& artifact_dir) {
  m.finished_at = iso8601_now();
  write_run_manifest(artifact_dir, m);
}

std::string manifest_path_id(const fs::path& rec_dir) {
  std::ifstream f(rec_dir / "manifest.json");
  if (!f) return rec_dir.filename().string();
  try {
    nlohmann::json j;
    f >> j;
    return j.value("path_id", rec_dir.filename().string());
  } catch (...) {
    return rec_dir.filename().string();
  }
}

std::vector<std::string> data_path_ids(const fs::path& data) {
  std::vector<std::string> ids;
  for (const auto& d : list_recordings(data)) ids.push_back(manifest_path_id(d));
  return ids;
}

struct ClipOptions {
  int window = 64, clip_len = 16, hop = 16;
};

std::vector<ClipSample> clips_for(const fs::path& data, const std::set<std::string>& ids, const ClipOptions& co) {
  std::vector<ClipSample> clips;
  for (const auto& d : list_recordings(data)) {
    if (!ids.count(manifest_path_id(d))) continue;
    const Recording rec = load_recording(d);
    auto c = sample_clips(rec, co.window, co.clip_len, co.hop);
    clips.insert(clips.end(), c.begin(), c.end());
  }
  return clips;
}

std::vector<std::pair<double, double>> split_gaze_points(const fs::path& data, const std::set<std::string>& ids,
                                                         int size) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& d : list_recordings(data)) {
    if (!ids.count(manifest_path_id(d))) continue;
    const Recording rec = load_recording(d);
    const double sx = static_cast<double>(size) / rec.width(), sy = static_cast<double>(size) / rec.height();
    for (const auto& g : rec.gaze_points)
      if (!g.missing()) pts.emplace_back(g.x * sx, g.y * sy);
  }
  return pts;
}

ModelConfig config_for(const std::string& preset, const std::string& backbone, uint64_t seed) {
  const Backbone b = backbone_from_name(backbone);
  ModelConfig cfg;
  if (preset == "published") cfg = ModelConfig::published(b);
  else if (preset == "desk") cfg = ModelConfig::desk(b);
  else if (preset == "miniature") cfg = ModelConfig::miniature();
  else throw CLI::ValidationError("--preset", "unknown preset '" + preset + "'");
  cfg.seed = seed;
  return cfg;
}

GridD tensor_to_grid(const Tensor<float>& t) {
  if (t.rank() != 2) throw std::runtime_error("expected a rank-2 map, got " + shape_str(t.shape));
  GridD g({t.dim(0), t.dim(1)});
  for (int64_t i = 0; i < t.numel(); ++i) g[i] = static_cast<double>(t[i]);
  return g;
}

Tensor<float> grid_to_tensor(const GridD& g) {
  Tensor<float> t({g.dim(0), g.dim(1)});
  for (int64_t i = 0; i < g.numel(); ++i) t[i] = static_cast<float>(g[i]);
  return t;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

fs::path find_frame_for(const fs::path& frames_dir, const std::string& stem) {
  for (const char* ext : {".png", ".jpg", ".jpeg", ".bmp"}) {
    fs::path p = frames_dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  throw std::runtime_error("no frame image for stem '" + stem + "' in " + frames_dir.string());
}

int run_synth(const fs::path& out, int paths, uint64_t seed, double duration, double fps, int size, int attractors,
              double w_center, double w_attr, double w_noise, double missing_rate, bool jpeg,
              const std::string& cmdline) {
  RunManifest m = begin_manifest(cmdline, seed);
  for (int i = 0; i < paths; ++i) {
    SynthSpec spec;
    spec.duration_s = duration;
    spec.fps = fps;
    spec.height = spec.width = size;
    spec.attractors = attractors;
    spec.center_weight = w_center;
    spec.attractor_weight = w_attr;
    spec.noise_weight = w_noise;
    spec.missing_gaze_rate = missing_rate;
    char name[32];
    std::snprintf(name, sizeof(name), "path%03d", i);
    spec.path_id = name;
    const Recording rec = generate_synthetic_recording(spec, seed + static_cast<uint64_t>(i));
    save_recording(rec, out / name, /*lossless=*/!jpeg);
    m.outputs.push_back((out / name).string());
    std::printf("synth %s: %d frames %dx%d\n", name, rec.frame_count(), rec.width(), rec.height());
  }
  finish_manifest(m, out);
  return 0;
}

int run_ingest(const fs::path& src, const fs::path& out, int target_size, const std::string& path_id,
               const std::string& direction, double fps, const std::string& cmdline, uint64_t seed) {
  RunManifest m = begin_manifest(cmdline, seed);
  m.inputs.push_back(src.string());

  Recording rec;
  rec.path_id = path_id.empty() ? src.filename().string() : path_id;
  rec.direction = direction;
  rec.source = src.string();

  std::vector<fs::path> frame_files;
  for (const char* ext : {".png", ".jpg", ".jpeg", ".bmp"}) {
    auto f = sorted_files(src / "frames", ext);
    frame_files.insert(frame_files.end(), f.begin(), f.end());
  }
  std::sort(frame_files.begin(), frame_files.end());
  if (frame_files.empty()) throw std::runtime_error("no frames found under " + (src / "frames").string());
  for (const auto& p : frame_files) {
    cv::Mat img = cv::imread(p.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("cannot decode " + p.string());
    rec.frames.push_back(img);
  }

  // frame timestamps: timestamps.csv (one ns value per line) or synthesized at fps
  if (fs::exists(src / "timestamps.csv")) {
    std::ifstream f(src / "timestamps.csv");
    std::string line;
    while (std::getline(f, line))
      if (!line.empty()) rec.frame_timestamps_ns.push_back(std::stoll(line));
    if (rec.frame_timestamps_ns.size() != rec.frames.size())
      throw std::runtime_error("length mismatch: timestamps.csv vs frame files");
  } else {
    for (size_t i = 0; i < rec.frames.size(); ++i)
      rec.frame_timestamps_ns.push_back(static_cast<int64_t>(std::llround(1e9 * static_cast<double>(i) / fps)));
  }

  // gaze.csv: timestamp_ns,x,y (pixels in source resolution)
  std::vector<std::tuple<int64_t, float, float>> gaze_stream;
  {
    std::ifstream f(src / "gaze.csv");
    if (!f) throw std::runtime_error("missing gaze.csv under " + src.string());
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
      std::istringstream ss(line);
      std::string tok;
      int64_t t = 0;
      float x = 0, y = 0;
      std::getline(ss, tok, ',');
      t = std::stoll(tok);
      std::getline(ss, tok, ',');
      x = std::stof(tok);
      std::getline(ss, tok, ',');
      y = std::stof(tok);
      gaze_stream.emplace_back(t, x, y);
    }
  }
  rec.gaze_points = align_gaze_to_frames(gaze_stream, rec.frame_timestamps_ns);

  // imu.csv: timestamp_ns,ax,ay,az,gx,gy,gz (optional)
  if (fs::exists(src / "imu.csv")) {
    std::vector<ImuSample> imu;
    std::ifstream f(src / "imu.csv");
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
      std::istringstream ss(line);
      std::string tok;
      ImuSample s;
      std::getline(ss, tok, ',');
      s.timestamp_ns = std::stoll(tok);
      for (int k = 0; k < 3; ++k) {
        std::getline(ss, tok, ',');
        s.accel[k] = std::stof(tok);
      }
      for (int k = 0; k < 3; ++k) {
        std::getline(ss, tok, ',');
        s.gyro[k] = std::stof(tok);
      }
      imu.push_back(s);
    }
    rec.imu_per_frame = aggregate_imu_per_frame(imu, rec.frame_timestamps_ns);
    rec.has_imu = !rec.imu_per_frame.empty();
  }

  // clamp obviously out-of-range gaze before validation (sensor glitches)
  for (auto& g : rec.gaze_points) {
    if (g.missing()) continue;
    g.x = std::clamp(g.x, 0.f, std::nextafter(static_cast<float>(rec.width()), 0.f));
    g.y = std::clamp(g.y, 0.f, std::nextafter(static_cast<float>(rec.height()), 0.f));
  }
  if (rec.height() > target_size || rec.width() > target_size)
    downscale_frames(rec, target_size, target_size);
  rec.validate();
  save_recording(rec, out / rec.path_id, /*lossless=*/false);
  m.outputs.push_back((out / rec.path_id).string());
  finish_manifest(m, out);
  std::printf("ingested %s: %d frames -> %dx%d\n", rec.path_id.c_str(), rec.frame_count(), rec.width(), rec.height());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egogaze: egocentric gaze prediction toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");
  const std::string cmdline = join_args(argc, argv);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate synthetic recordings");
  int synth_paths = 4;
  uint64_t synth_seed = 0;
  std::string synth_out;
  double synth_duration = 4.0, synth_fps = 30.0;
  int synth_size = 128, synth_attr = 2;
  double synth_wc = 0.25, synth_wa = 0.60, synth_wn = 0.15, synth_missing = 0.0;
  bool synth_jpeg = false;
  synth->add_option("--paths", synth_paths, "number of recordings")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "base RNG seed");
  synth->add_option("--out", synth_out, "output data root")->required();
  synth->add_option("--duration", synth_duration, "seconds per recording");
  synth->add_option("--fps", synth_fps, "frame rate");
  synth->add_option("--size", synth_size, "frame height/width");
  synth->add_option("--attractors", synth_attr, "moving blobs (1-3)");
  synth->add_option("--center-weight", synth_wc, "gaze mix: center");
  synth->add_option("--attractor-weight", synth_wa, "gaze mix: nearest attractor");
  synth->add_option("--noise-weight", synth_wn, "gaze mix: smooth noise");
  synth->add_option("--missing-rate", synth_missing, "fraction of frames with dropped gaze");
  synth->add_flag("--jpeg", synth_jpeg, "store frames as JPEG instead of lossless PNG");

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "import frames/gaze.csv/imu.csv into a recording");
  std::string ingest_src, ingest_out, ingest_id, ingest_dir = "forward";
  int ingest_size = 224;
  double ingest_fps = 30.0;
  uint64_t ingest_seed = 0;
  ingest->add_option("--src", ingest_src, "source dir with frames/, gaze.csv, optional imu.csv, timestamps.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  ingest->add_option("--out", ingest_out, "output data root")->required();
  ingest->add_option("--target-size", ingest_size, "downscale target");
  ingest->add_option("--path-id", ingest_id, "recording identifier (default: source dir name)");
  ingest->add_option("--direction", ingest_dir, "walking direction tag");
  ingest->add_option("--fps", ingest_fps, "frame rate when timestamps.csv is absent");
  ingest->add_option("--seed", ingest_seed, "recorded in the run manifest");

  // ---- split ----
  auto* split = app.add_subcommand("split", "path-level train/test split");
  std::string split_data, split_out;
  double split_ratio = 0.7;
  uint64_t split_seed = 0;
  split->add_option("--data", split_data, "data root")->envname("EGOGAZE_DATA")->required();
  split->add_option("--ratio", split_ratio, "train fraction in (0,1)");
  split->add_option("--seed", split_seed, "shuffle seed");
  split->add_option("--out", split_out, "split JSON file")->required();

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the gaze head on a split");
  std::string train_data, train_split, train_out, train_preset = "desk", train_backbone = "x3d";
  int train_epochs = 10, train_batch = 16, train_max_steps = 0;
  double train_lr = 0.002, train_valfrac = 0.15;
  uint64_t train_seed = 0;
  ClipOptions train_co;
  train_cmd->add_option("--data", train_data, "data root")->envname("EGOGAZE_DATA")->required();
  train_cmd->add_option("--split", train_split, "split JSON from `egogaze split`")->required();
  train_cmd->add_option("--out", train_out, "checkpoint directory")->required();
  train_cmd->add_option("--preset", train_preset, "published|desk|miniature");
  train_cmd->add_option("--backbone", train_backbone, "x3d|slow_r50|none");
  train_cmd->add_option("--epochs", train_epochs);
  train_cmd->add_option("--batch", train_batch);
  train_cmd->add_option("--lr", train_lr);
  train_cmd->add_option("--max-steps", train_max_steps, "stop after N optimizer steps (0 = all)");
  train_cmd->add_option("--val-fraction", train_valfrac);
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--window", train_co.window);
  train_cmd->add_option("--clip-len", train_co.clip_len);
  train_cmd->add_option("--hop", train_co.hop);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints/baselines on a split");
  std::string eval_data, eval_split, eval_out, eval_split_name = "test";
  std::vector<std::string> eval_ckpts, eval_baselines;
  int eval_size = 0;
  uint64_t eval_seed = 0;
  ClipOptions eval_co;
  eval_cmd->add_option("--data", eval_data, "data root")->envname("EGOGAZE_DATA")->required();
  eval_cmd->add_option("--split", eval_split, "split JSON")->required();
  eval_cmd->add_option("--split-name", eval_split_name, "test|train side of the split");
  eval_cmd->add_option("--ckpt", eval_ckpts, "checkpoint file(s)");
  eval_cmd->add_option("--baseline", eval_baselines, "center_prior|uniform (repeatable)");
  eval_cmd->add_option("--out", eval_out, "leaderboard CSV path")->required();
  eval_cmd->add_option("--size", eval_size, "baseline map resolution (default: first ckpt's input size)");
  eval_cmd->add_option("--seed", eval_seed);
  eval_cmd->add_option("--window", eval_co.window);
  eval_cmd->add_option("--clip-len", eval_co.clip_len);
  eval_cmd->add_option("--hop", eval_co.hop);

  // ---- predict ----
  auto* pred_cmd = app.add_subcommand("predict", "predict a map for one clip");
  std::string pred_ckpt, pred_clip, pred_out, pred_overlay;
  int pred_start = -1;
  uint64_t pred_seed = 0;
  ClipOptions pred_co;
  pred_cmd->add_option("--ckpt", pred_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--clip", pred_clip, "recording directory")->required()->check(CLI::ExistingDirectory);
  pred_cmd->add_option("--out", pred_out, "output map (.f32)")->required();
  pred_cmd->add_option("--overlay", pred_overlay, "optional overlay PNG");
  pred_cmd->add_option("--window-start", pred_start, "window start frame (default: first window)");
  pred_cmd->add_option("--window", pred_co.window);
  pred_cmd->add_option("--clip-len", pred_co.clip_len);
  pred_cmd->add_option("--hop", pred_co.hop);
  pred_cmd->add_option("--seed", pred_seed);

  // ---- metrics ----
  auto* met_cmd = app.add_subcommand("metrics", "score prediction maps against fixation files");
  std::string met_pred, met_gt, met_out;
  double met_sigma = 0.0;
  uint64_t met_seed = 0;
  met_cmd->add_option("--pred-dir", met_pred, "directory of .f32 maps")->required()->check(CLI::ExistingDirectory);
  met_cmd->add_option("--gt-dir", met_gt, "directory of matching .f32 (N,2) fixation coords")
      ->required()
      ->check(CLI::ExistingDirectory);
  met_cmd->add_option("--out", met_out, "per-frame CSV")->required();
  met_cmd->add_option("--sigma", met_sigma, "density blur sigma (default H/16)");
  met_cmd->add_option("--seed", met_seed);

  // ---- plot ----
  auto* plot_cmd = app.add_subcommand("plot", "overlays, montages, loss curves");
  std::string plot_pred, plot_frames, plot_gaze, plot_loss, plot_out;
  std::vector<int> plot_montage;
  uint64_t plot_seed = 0;
  plot_cmd->add_option("--pred-dir", plot_pred, "directory of .f32 maps");
  plot_cmd->add_option("--frames-dir", plot_frames, "directory of frame images with matching stems");
  plot_cmd->add_option("--gaze", plot_gaze, "gaze.f32 (T,3) aligned with sorted maps");
  plot_cmd->add_option("--loss-csv", plot_loss, "loss curve CSV (step,loss)");
  plot_cmd->add_option("--out", plot_out, "output directory")->required();
  plot_cmd->add_option("--montage", plot_montage, "rows cols: also emit a montage of the first rows*cols overlays")
      ->expected(2);
  plot_cmd->add_option("--seed", plot_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth)
      return run_synth(synth_out, synth_paths, synth_seed, synth_duration, synth_fps, synth_size, synth_attr,
                       synth_wc, synth_wa, synth_wn, synth_missing, synth_jpeg, cmdline);

    if (*ingest)
      return run_ingest(ingest_src, ingest_out, ingest_size, ingest_id, ingest_dir, ingest_fps, cmdline, ingest_seed);

    if (*split) {
      RunManifest m = begin_manifest(cmdline, split_seed);
      m.inputs.push_back(split_data);
      const auto ids = data_path_ids(split_data);
      const SplitSpec s = make_split(ids, split_ratio, split_seed);
      save_split(s, split_ratio, split_out);
      m.outputs.push_back(split_out);
      finish_manifest(m, fs::path(split_out).has_parent_path() ? fs::path(split_out).parent_path() : fs::path("."));
      std::printf("split: %zu train / %zu test paths -> %s\n", s.train_paths.size(), s.test_paths.size(),
                  split_out.c_str());
      return 0;
    }

    if (*train_cmd) {
      RunManifest m = begin_manifest(cmdline, train_seed);
      m.inputs = {train_data, train_split};
      ModelConfig mc = config_for(train_preset, train_backbone, train_seed == 0 ? 17 : train_seed);
      if (train_co.clip_len != mc.clip_len) mc.clip_len = train_co.clip_len;
      mc.validate();
      EcnModel model = EcnModel::create(mc);
      const ParamCount pc = count_parameters(model);
      std::printf("model %s/%s: %lld trainable + %lld frozen parameters\n", mc.preset.c_str(),
                  backbone_name(mc.backbone).c_str(), static_cast<long long>(pc.trainable),
                  static_cast<long long>(pc.frozen));

      const SplitSpec s = load_split(train_split);
      const auto clips = clips_for(train_data, s.train_paths, train_co);
      std::printf("training clips: %zu\n", clips.size());

      TrainConfig tc;
      tc.learning_rate = train_lr;
      tc.epochs = train_epochs;
      tc.batch_size = train_batch;
      tc.seed = train_seed;
      tc.max_steps = train_max_steps;
      tc.val_fraction = train_valfrac;
      const TrainResult r = train(model, clips, tc);

      const fs::path out(train_out);
      fs::create_directories(out);
      save_checkpoint(model, out / "model.egck");
      save_loss_curve_csv(r, out / "loss_curve.csv");
      save_train_log_csv(r, out / "train_log.csv");
      save_image(render_loss_curve(r.step_losses), out / "loss_curve.png");
      m.outputs = {(out / "model.egck").string(), (out / "loss_curve.csv").string(), (out / "train_log.csv").string(),
                   (out / "loss_curve.png").string()};
      finish_manifest(m, out);
      std::printf("checkpoint -> %s\n", (out / "model.egck").string().c_str());
      return 0;
    }

    if (*eval_cmd) {
      if (eval_ckpts.empty() && eval_baselines.empty()) {
        std::cerr << "eval: provide at least one --ckpt or --baseline\n" << eval_cmd->help() << "\n";
        return 2;
      }
      RunManifest m = begin_manifest(cmdline, eval_seed);
      m.inputs = {eval_data, eval_split};
      const SplitSpec s = load_split(eval_split);
      const auto& ids = eval_split_name == "train" ? s.train_paths : s.test_paths;
      if (eval_split_name != "train" && eval_split_name != "test")
        throw std::runtime_error("--split-name must be 'train' or 'test'");

      std::vector<LeaderboardRow> rows;
      int first_size = eval_size;
      ClipOptions co = eval_co;
      std::vector<ClipSample> clips;  // rebuilt if sizes differ; fine for desk scale
      for (const auto& ck : eval_ckpts) {
        EcnModel model = load_checkpoint(ck);
        if (co.clip_len != model.cfg.clip_len) co.clip_len = model.cfg.clip_len;
        if (clips.empty()) clips = clips_for(eval_data, ids, co);
        if (!first_size) first_size = model.cfg.input_size;
        rows.push_back(evaluate_model(model, fs::path(ck).stem().string(), clips));
      }
      if (!eval_baselines.empty()) {
        if (!first_size) first_size = 224;
        if (clips.empty()) clips = clips_for(eval_data, ids, co);
        for (const auto& b : eval_baselines) {
          if (b == "uniform") {
            GridD u({first_size, first_size});
            u.fill(1.0 / (static_cast<double>(first_size) * first_size));
            rows.push_back(evaluate_constant(u, "uniform", clips));
          } else if (b == "center_prior") {
            const auto pts = split_gaze_points(eval_data, s.train_paths, first_size);
            const CenterPrior prior = fit_center_prior(pts, first_size, first_size);
            rows.push_back(evaluate_constant(prior.grid, "center_prior", clips));
          } else {
            throw std::runtime_error("unknown baseline '" + b + "' (use center_prior or uniform)");
          }
        }
      }

      const std::string text = leaderboard_text(rows);
      std::fputs(text.c_str(), stdout);
      const fs::path out(eval_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      std::ofstream f(out);
      f << leaderboard_csv(rows);
      f.close();
      m.outputs = {eval_out};
      finish_manifest(m, out.has_parent_path() ? out.parent_path() : fs::path("."));
      return 0;
    }

    if (*pred_cmd) {
      RunManifest m = begin_manifest(cmdline, pred_seed);
      m.inputs = {pred_ckpt, pred_clip};
      EcnModel model = load_checkpoint(pred_ckpt);
      ClipOptions co = pred_co;
      co.clip_len = model.cfg.clip_len;
      const Recording rec = load_recording(pred_clip);
      const auto clips = sample_clips(rec, co.window, co.clip_len, co.hop);
      if (clips.empty()) throw std::runtime_error("no clips available in " + pred_clip);
      const ClipSample* chosen = &clips.front();
      if (pred_start >= 0) {
        chosen = nullptr;
        for (const auto& c : clips)
          if (c.window_start == pred_start) chosen = &c;
        if (!chosen) throw std::runtime_error("no clip with window start " + std::to_string(pred_start));
      }
      const GridD map = model.predict(*chosen);
      const fs::path out(pred_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_array(out, grid_to_tensor(map));
      m.outputs = {pred_out};
      if (!pred_overlay.empty()) {
        const int S = model.cfg.input_size;
        cv::Mat frame;
        cv::resize(chosen->frames.back(), frame, cv::Size(S, S), 0, 0, cv::INTER_LINEAR);
        const float sx = static_cast<float>(S) / chosen->frames.back().cols;
        const float sy = static_cast<float>(S) / chosen->frames.back().rows;
        const cv::Mat ov =
            overlay_heatmap(frame, map, std::make_pair(chosen->gaze_x * sx, chosen->gaze_y * sy));
        save_image(ov, pred_overlay);
        m.outputs.push_back(pred_overlay);
      }
      finish_manifest(m, out.has_parent_path() ? out.parent_path() : fs::path("."));
      std::printf("prediction (window %d) -> %s\n", chosen->window_start, pred_out.c_str());
      return 0;
    }

    if (*met_cmd) {
      RunManifest m = begin_manifest(cmdline, met_seed);
      m.inputs = {met_pred, met_gt};
      const auto files = sorted_files(met_pred, ".f32");
      if (files.empty()) throw std::runtime_error("no .f32 maps in " + met_pred);
      std::vector<GridD> preds;
      std::vector<FixationMap> fixs;
      std::vector<DensityMap> dens;
      std::vector<std::string> names;
      for (const auto& p : files) {
        const GridD pred = tensor_to_grid(load_array(p));
        const fs::path gtp = fs::path(met_gt) / p.filename();
        if (!fs::exists(gtp)) throw std::runtime_error("missing ground truth " + gtp.string());
        const Tensor<float> pts = load_array(gtp);
        if (pts.rank() != 2 || pts.dim(1) != 2)
          throw std::runtime_error("expected (N,2) fixation coords in " + gtp.string());
        std::vector<std::pair<double, double>> coords;
        for (int i = 0; i < pts.dim(0); ++i) coords.emplace_back(pts.at(i, 0), pts.at(i, 1));
        const double sigma = met_sigma > 0 ? met_sigma : pred.dim(0) / 16.0;
        const FixationMap fx = fixation_map_from_points(coords, pred.dim(0), pred.dim(1));
        fixs.push_back(fx);
        dens.push_back(density_from_fixations(fx, sigma));
        preds.push_back(pred);
        names.push_back(p.stem().string());
      }
      const MetricReport rep = evaluate_all(preds, fixs, dens);
      const fs::path out(met_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      std::ofstream f(out);
      f << "frame_id,auc_judd,cc,kld,sim,nss\n";
      auto cell = [](double v) {
        if (!std::isfinite(v)) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
      };
      for (size_t i = 0; i < names.size(); ++i) {
        const FrameMetrics& fmx = rep.per_frame[i];
        f << names[i] << "," << cell(fmx.auc_judd) << "," << cell(fmx.cc) << "," << cell(fmx.kld) << ","
          << cell(fmx.sim) << "," << cell(fmx.nss) << "\n";
      }
      f << "mean," << cell(rep.auc_judd) << "," << cell(rep.cc) << "," << cell(rep.kld) << "," << cell(rep.sim) << ","
        << cell(rep.nss) << "\n";
      f.close();
      m.outputs = {met_out};
      finish_manifest(m, out.has_parent_path() ? out.parent_path() : fs::path("."));
      std::printf("metrics over %zu frames -> %s\n", names.size(), met_out.c_str());
      return 0;
    }

    if (*plot_cmd) {
      RunManifest m = begin_manifest(cmdline, plot_seed);
      const fs::path out(plot_out);
      fs::create_directories(out);
      bool did_something = false;

      if (!plot_loss.empty()) {
        std::ifstream f(plot_loss);
        if (!f) throw std::runtime_error("missing loss CSV " + plot_loss);
        std::vector<double> losses;
        std::string line;
        while (std::getline(f, line)) {
          const auto comma = line.find(',');
          if (comma == std::string::npos) continue;
          try {
            losses.push_back(std::stod(line.substr(comma + 1)));
          } catch (...) {
          }
        }
        save_image(render_loss_curve(losses), out / "loss_curve.png");
        m.inputs.push_back(plot_loss);
        m.outputs.push_back((out / "loss_curve.png").string());
        did_something = true;
      }

      if (!plot_pred.empty()) {
        if (plot_frames.empty()) throw std::runtime_error("--pred-dir requires --frames-dir");
        const auto files = sorted_files(plot_pred, ".f32");
        if (files.empty()) throw std::runtime_error("no .f32 maps in " + plot_pred);
        Tensor<float> gaze;
        bool has_gaze = false;
        if (!plot_gaze.empty()) {
          gaze = load_array(plot_gaze);
          if (gaze.rank() != 2 || gaze.dim(1) != 3) throw std::runtime_error("gaze file must be (T,3)");
          has_gaze = true;
        }
        std::vector<cv::Mat> tiles;
        for (size_t i = 0; i < files.size(); ++i) {
          const GridD map = tensor_to_grid(load_array(files[i]));
          const fs::path fp = find_frame_for(plot_frames, files[i].stem().string());
          cv::Mat frame = cv::imread(fp.string(), cv::IMREAD_COLOR);
          if (frame.empty()) throw std::runtime_error("cannot decode " + fp.string());
          std::optional<std::pair<float, float>> gz;
          if (has_gaze && static_cast<int>(i) < gaze.dim(0) && gaze.at(static_cast<int>(i), 2) > 0.f)
            gz = std::make_pair(gaze.at(static_cast<int>(i), 0), gaze.at(static_cast<int>(i), 1));
          const cv::Mat ov = overlay_heatmap(frame, map, gz);
          tiles.push_back(ov);
          const fs::path of = out / (files[i].stem().string() + "_overlay.png");
          save_image(ov, of);
          m.outputs.push_back(of.string());
        }
        if (plot_montage.size() == 2) {
          const int rows = plot_montage[0], cols = plot_montage[1];
          if (static_cast<size_t>(rows) * cols > tiles.size())
            throw std::runtime_error("montage needs rows*cols <= number of overlays");
          tiles.resize(static_cast<size_t>(rows) * cols);
          save_image(montage(tiles, rows, cols), out / "montage.png");
          m.outputs.push_back((out / "montage.png").string());
        }
        m.inputs.push_back(plot_pred);
        did_something = true;
      }

      if (!did_something) {
        std::cerr << "plot: provide --loss-csv and/or --pred-dir\n" << plot_cmd->help() << "\n";
        return 2;
      }
      finish_manifest(m, out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
