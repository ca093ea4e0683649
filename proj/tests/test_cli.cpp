#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "egogaze/array_io.hpp"
#include "egogaze/tensor.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("EGOGAZE_BIN");
  REQUIRE_MESSAGE(b != nullptr, "EGOGAZE_BIN must point at the egogaze binary");
  return b;
}

struct RunResult {
  int code = -1;
  std::string out;
};

// prefix lets tests set environment variables for one invocation
RunResult run_cli(const std::string& args, const std::string& prefix = "") {
  const std::string cmd = prefix + "\"" + bin() + "\" " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("egogaze_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  std::string str(const std::string& rel) const { return (path / rel).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("help exits 0, parse failures exit 2") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("synth --help").code == 0);
  CHECK(run_cli("").code == 2);                  // subcommand required
  CHECK(run_cli("frobnicate").code == 2);        // unknown subcommand
  CHECK(run_cli("synth").code == 2);             // missing required --out
  CHECK(run_cli("synth --paths -3 --out /tmp/x").code == 2);
}

TEST_CASE("eval and plot demand a mode") {
  TempDir tmp;
  const RunResult ev = run_cli("eval --data " + tmp.str("nope") + " --split " + tmp.str("s.json") + " --out " +
                               tmp.str("lb.csv"));
  CHECK(ev.code == 2);
  CHECK(ev.out.find("--ckpt or --baseline") != std::string::npos);

  const RunResult pl = run_cli("plot --out " + tmp.str("plots"));
  CHECK(pl.code == 2);
  CHECK(pl.out.find("--loss-csv and/or --pred-dir") != std::string::npos);
}

TEST_CASE("runtime failures report errors on exit 1") {
  TempDir tmp;
  fs::create_directories(tmp.path / "empty");
  const RunResult r = run_cli("split --data " + tmp.str("empty") + " --out " + tmp.str("split.json"));
  CHECK(r.code == 1);
  CHECK(r.out.find("error:") != std::string::npos);
}

TEST_CASE("synth is deterministic in the seed and writes run manifests") {
  TempDir tmp;
  const std::string common = "synth --paths 1 --seed 5 --size 48 --duration 1.0 --fps 10 --out ";
  CHECK(run_cli(common + tmp.str("a")).code == 0);
  CHECK(run_cli(common + tmp.str("b")).code == 0);
  CHECK(run_cli("synth --paths 1 --seed 6 --size 48 --duration 1.0 --fps 10 --out " + tmp.str("c")).code == 0);

  CHECK(slurp(tmp.path / "a/path000/gaze.f32") == slurp(tmp.path / "b/path000/gaze.f32"));
  CHECK(slurp(tmp.path / "a/path000/imu.f32") == slurp(tmp.path / "b/path000/imu.f32"));
  CHECK(slurp(tmp.path / "a/path000/frames/000000.png") == slurp(tmp.path / "b/path000/frames/000000.png"));
  CHECK(slurp(tmp.path / "a/path000/gaze.f32") != slurp(tmp.path / "c/path000/gaze.f32"));

  const std::string manifest = slurp(tmp.path / "a/path000/manifest.json");
  CHECK(manifest.find("\"path_id\": \"path000\"") != std::string::npos);
  CHECK(manifest.find("\"frame_count\": 10") != std::string::npos);

  const std::string run = slurp(tmp.path / "a/run_manifest.json");
  CHECK(run.find("egogaze 0.1.0") != std::string::npos);
  CHECK(run.find("\"seed\": 5") != std::string::npos);
}

TEST_CASE("config file fills defaults but explicit flags win") {
  TempDir tmp;
  std::ofstream cfg(tmp.path / "run.ini");
  cfg << "[synth]\n"
      << "size=32\n"
      << "paths=3\n";
  cfg.close();

  const RunResult r = run_cli("--config " + tmp.str("run.ini") + " synth --paths 1 --seed 1 --duration 0.5 --fps 8 "
                              "--out " + tmp.str("d"));
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp.path / "d/path000"));
  CHECK(!fs::exists(tmp.path / "d/path001"));  // flag --paths 1 overrode paths=3
  const std::string manifest = slurp(tmp.path / "d/path000/manifest.json");
  CHECK(manifest.find("32") != std::string::npos);  // size came from the config file
}

TEST_CASE("EGOGAZE_DATA supplies the data root") {
  TempDir tmp;
  CHECK(run_cli("synth --paths 2 --seed 9 --size 48 --duration 1.0 --fps 10 --out " + tmp.str("data")).code == 0);
  const RunResult r =
      run_cli("split --ratio 0.5 --seed 2 --out " + tmp.str("split.json"), "EGOGAZE_DATA=" + tmp.str("data") + " ");
  CHECK(r.code == 0);
  CHECK(fs::exists(tmp.path / "split.json"));
  const std::string s = slurp(tmp.path / "split.json");
  CHECK(s.find("train") != std::string::npos);
  CHECK(s.find("test") != std::string::npos);
}

TEST_CASE("end-to-end: synth, split, train, predict, eval, metrics, plot") {
  TempDir tmp;
  const std::string data = tmp.str("data");
  CHECK(run_cli("synth --paths 2 --seed 21 --size 64 --duration 2.0 --fps 12 --out " + data).code == 0);
  CHECK(run_cli("split --data " + data + " --ratio 0.5 --seed 3 --out " + tmp.str("split.json")).code == 0);

  const RunResult tr = run_cli("train --data " + data + " --split " + tmp.str("split.json") +
                               " --out " + tmp.str("run") +
                               " --preset desk --backbone none --epochs 1 --batch 8 --lr 0.002"
                               " --window 16 --clip-len 8 --hop 8 --seed 4");
  INFO(tr.out);
  CHECK(tr.code == 0);
  CHECK(fs::exists(tmp.path / "run/model.egck"));
  CHECK(fs::exists(tmp.path / "run/loss_curve.csv"));
  CHECK(fs::exists(tmp.path / "run/train_log.csv"));
  CHECK(fs::exists(tmp.path / "run/loss_curve.png"));
  CHECK(fs::exists(tmp.path / "run/run_manifest.json"));

  // predict on the first recording of the data root
  std::string first_rec;
  for (const auto& e : fs::directory_iterator(data))
    if (e.is_directory() && (first_rec.empty() || e.path().string() < first_rec)) first_rec = e.path().string();
  REQUIRE(!first_rec.empty());
  fs::create_directories(tmp.path / "preds");
  const RunResult pr = run_cli("predict --ckpt " + tmp.str("run/model.egck") + " --clip " + first_rec +
                               " --out " + tmp.str("preds/000000.f32") + " --overlay " + tmp.str("overlay.png") +
                               " --window 16 --hop 8");
  INFO(pr.out);
  CHECK(pr.code == 0);
  CHECK(fs::exists(tmp.path / "preds/000000.f32"));
  CHECK(fs::exists(tmp.path / "overlay.png"));
  const egogaze::Tensor<float> map = egogaze::load_array(tmp.path / "preds/000000.f32");
  REQUIRE(map.rank() == 2);
  CHECK(map.dim(0) == 128);
  CHECK(map.dim(1) == 128);
  double sum = 0.0;
  float lo = 1.f;
  for (float v : map.data) {
    sum += v;
    lo = std::min(lo, v);
  }
  CHECK(lo >= 0.f);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));

  const RunResult ev = run_cli("eval --data " + data + " --split " + tmp.str("split.json") +
                               " --ckpt " + tmp.str("run/model.egck") +
                               " --baseline center_prior --baseline uniform --split-name test"
                               " --out " + tmp.str("leaderboard.csv") + " --window 16 --hop 8");
  INFO(ev.out);
  CHECK(ev.code == 0);
  const std::string lb = slurp(tmp.path / "leaderboard.csv");
  CHECK(lb.rfind("model,auc_judd,cc,kld,sim,nss,frames,parameters", 0) == 0);
  CHECK(lb.find("uniform") != std::string::npos);
  CHECK(lb.find("center_prior") != std::string::npos);
  CHECK(lb.find("model,") == 0);

  // score the prediction against a hand-written fixation file
  fs::create_directories(tmp.path / "gt");
  egogaze::Tensor<float> coords({1, 2});
  coords.at(0, 0) = 64.f;
  coords.at(0, 1) = 48.f;
  egogaze::save_array(tmp.path / "gt/000000.f32", coords);
  const RunResult mt = run_cli("metrics --pred-dir " + tmp.str("preds") + " --gt-dir " + tmp.str("gt") +
                               " --out " + tmp.str("metrics.csv"));
  INFO(mt.out);
  CHECK(mt.code == 0);
  const std::string mcsv = slurp(tmp.path / "metrics.csv");
  CHECK(mcsv.rfind("frame_id,auc_judd,cc,kld,sim,nss", 0) == 0);
  CHECK(mcsv.find("\nmean,") != std::string::npos);

  const RunResult pl = run_cli("plot --loss-csv " + tmp.str("run/loss_curve.csv") + " --out " + tmp.str("plots"));
  INFO(pl.out);
  CHECK(pl.code == 0);
  CHECK(fs::exists(tmp.path / "plots/loss_curve.png"));
  CHECK(fs::exists(tmp.path / "plots/run_manifest.json"));
}
