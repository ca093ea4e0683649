#include "egogaze/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace egogaze {

namespace {

constexpr double kTau = 6.283185307179586;

// Value-noise lattice sampled with bilinear interpolation and wrap-around,
// so the background can scroll forever without seams.
struct NoiseField {
  int n = 32;
  std::vector<float> v;  // n*n

  explicit NoiseField(std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(0.f, 1.f);
    v.resize(static_cast<size_t>(n) * n);
    for (auto& x : v) x = u(rng);
  }

  float at(int i, int j) const {
    i = ((i % n) + n) % n;
    j = ((j % n) + n) % n;
    return v[static_cast<size_t>(i) * n + j];
  }

  float sample(double y, double x) const {
    const double fy = std::floor(y), fx = std::floor(x);
    const double ay = y - fy, ax = x - fx;
    const int i = static_cast<int>(fy), j = static_cast<int>(fx);
    const double top = at(i, j) * (1 - ax) + at(i, j + 1) * ax;
    const double bot = at(i + 1, j) * (1 - ax) + at(i + 1, j + 1) * ax;
    return static_cast<float>(top * (1 - ay) + bot * ay);
  }
};

// Smooth sinusoidal path inside the frame, per attractor.
struct AttractorPath {
  double ax, ay;        // amplitudes (pixels)
  double wx, wy;        // angular frequencies
  double px, py;        // phases
  double cx, cy;        // orbit center

  std::pair<double, double> at(double t) const {
    return {cx + ax * std::sin(wx * t + px), cy + ay * std::sin(wy * t + py)};
  }
};

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

Recording generate_synthetic_recording(const SynthSpec& spec, uint64_t seed) {
  if (spec.duration_s <= 0.0) throw std::invalid_argument("duration must be positive");
  if (spec.height < 8 || spec.width < 8) throw std::invalid_argument("resolution too small");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const int h = spec.height, w = spec.width;
  const int frames = std::max(1, static_cast<int>(std::lround(spec.duration_s * spec.fps)));
  const int n_attr = std::clamp(spec.attractors, 1, 3);

  Recording rec;
  rec.path_id = spec.path_id;
  rec.direction = spec.direction;
  rec.source = "synthetic";
  rec.frames.reserve(static_cast<size_t>(frames));
  rec.frame_timestamps_ns.reserve(static_cast<size_t>(frames));
  rec.gaze_points.resize(static_cast<size_t>(frames));

  NoiseField noise(rng);
  const double noise_scale = 14.0 + 10.0 * uni(rng);  // pixels per lattice cell

  // Camera/scroll motion: constant drift plus a gentle sway. Analytic so the
  // IMU can be derived from exact derivatives.
  const double drift_x = 18.0 + 22.0 * uni(rng);  // px/s
  const double drift_y = 42.0 + 26.0 * uni(rng);
  const double sway_amp = 5.0 + 6.0 * uni(rng);
  const double sway_w = kTau * (0.23 + 0.3 * uni(rng));
  const double sway_phase = kTau * uni(rng);
  auto scroll_x = [&](double t) { return drift_x * t + sway_amp * std::sin(sway_w * t + sway_phase); };
  auto scroll_y = [&](double t) { return drift_y * t + 0.6 * sway_amp * std::cos(sway_w * t); };

  std::vector<AttractorPath> paths;
  for (int a = 0; a < n_attr; ++a) {
    AttractorPath p;
    p.cx = w * (0.30 + 0.40 * uni(rng));
    p.cy = h * (0.30 + 0.40 * uni(rng));
    p.ax = w * (0.12 + 0.16 * uni(rng));
    p.ay = h * (0.12 + 0.16 * uni(rng));
    p.wx = kTau * (0.15 + 0.30 * uni(rng));
    p.wy = kTau * (0.15 + 0.30 * uni(rng));
    p.px = kTau * uni(rng);
    p.py = kTau * uni(rng);
    paths.push_back(p);
  }
  const double blob_sigma = 0.035 * std::min(h, w) + 2.0;

  // Band-limited gaze jitter: a couple of incommensurate sines per axis.
  const double jit_amp = 0.06 * std::min(h, w);
  const double jw1 = kTau * (0.4 + 0.5 * uni(rng)), jw2 = kTau * (1.1 + 0.7 * uni(rng));
  const double jp1 = kTau * uni(rng), jp2 = kTau * uni(rng), jp3 = kTau * uni(rng), jp4 = kTau * uni(rng);

  double wc = spec.center_weight, wa = spec.attractor_weight, wn = spec.noise_weight;
  if (wc < 0 || wa < 0 || wn < 0) throw std::invalid_argument("mix weights must be nonnegative");
  const double wsum = wc + wa + wn;
  if (wsum <= 0.0) throw std::invalid_argument("mix weights sum to zero");
  wc /= wsum;
  wa /= wsum;
  wn /= wsum;

  const double cx0 = (w - 1) / 2.0, cy0 = (h - 1) / 2.0;
  double prev_gx = cx0, prev_gy = cy0;

  // Pre-draw missing-gaze decisions so frame rendering stays independent.
  std::vector<char> drop(static_cast<size_t>(frames), 0);
  for (int f = 0; f < frames; ++f) drop[static_cast<size_t>(f)] = uni(rng) < spec.missing_gaze_rate ? 1 : 0;

  for (int f = 0; f < frames; ++f) {
    const double t = f / spec.fps;
    rec.frame_timestamps_ns.push_back(static_cast<int64_t>(std::llround(t * 1e9)));

    const double ox = scroll_x(t), oy = scroll_y(t);
    cv::Mat img(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y) {
      auto* row = img.ptr<cv::Vec3b>(y);
      for (int x = 0; x < w; ++x) {
        const double ny = (y + oy) / noise_scale, nx = (x + ox) / noise_scale;
        const float base = noise.sample(ny, nx);
        const float fine = noise.sample(ny * 3.1 + 11.7, nx * 3.1 + 5.3);
        double val = 40.0 + 150.0 * (0.7 * base + 0.3 * fine);
        // slight per-channel tint to avoid a pure grayscale scene
        row[x][0] = static_cast<uchar>(clampd(val * 0.92, 0, 255));
        row[x][1] = static_cast<uchar>(clampd(val, 0, 255));
        row[x][2] = static_cast<uchar>(clampd(val * 1.06, 0, 255));
      }
    }

    // bright blobs
    std::vector<std::pair<double, double>> centers;
    for (const auto& p : paths) {
      auto [bx, by] = p.at(t);
      bx = clampd(bx, 2.0, w - 3.0);
      by = clampd(by, 2.0, h - 3.0);
      centers.emplace_back(bx, by);
      const int r = static_cast<int>(std::ceil(3.0 * blob_sigma));
      const int y0 = std::max(0, static_cast<int>(by) - r), y1 = std::min(h - 1, static_cast<int>(by) + r);
      const int x0 = std::max(0, static_cast<int>(bx) - r), x1 = std::min(w - 1, static_cast<int>(bx) + r);
      for (int y = y0; y <= y1; ++y) {
        auto* row = img.ptr<cv::Vec3b>(y);
        for (int x = x0; x <= x1; ++x) {
          const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
          const double add = 190.0 * std::exp(-d2 / (2.0 * blob_sigma * blob_sigma));
          if (add < 1.0) continue;
          row[x][0] = static_cast<uchar>(clampd(row[x][0] + add * 0.4, 0, 255));
          row[x][1] = static_cast<uchar>(clampd(row[x][1] + add, 0, 255));
          row[x][2] = static_cast<uchar>(clampd(row[x][2] + add, 0, 255));
        }
      }
    }
    rec.frames.push_back(img);

    // gaze: convex mix of center, nearest attractor (w.r.t. previous gaze), jitter
    size_t nearest = 0;
    double best = 1e300;
    for (size_t a = 0; a < centers.size(); ++a) {
      const double dx = centers[a].first - prev_gx, dy = centers[a].second - prev_gy;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        nearest = a;
      }
    }
    const double nx = jit_amp * (std::sin(jw1 * t + jp1) + 0.5 * std::sin(jw2 * t + jp2)) / 1.5;
    const double ny = jit_amp * (std::sin(jw1 * t + jp3) + 0.5 * std::sin(jw2 * t + jp4)) / 1.5;
    double gx = wc * cx0 + wa * centers[nearest].first + wn * (cx0 + nx);
    double gy = wc * cy0 + wa * centers[nearest].second + wn * (cy0 + ny);
    gx = clampd(gx, 0.0, w - 1.0);
    gy = clampd(gy, 0.0, h - 1.0);
    prev_gx = gx;
    prev_gy = gy;
    if (!drop[static_cast<size_t>(f)]) {
      rec.gaze_points[static_cast<size_t>(f)] = {static_cast<float>(gx), static_cast<float>(gy), 1.f};
    }
  }

  // IMU at ~imu_rate_hz: exact derivatives of the scroll motion plus noise.
  // accel from d²/dt² of scroll (px/s² scaled down to m/s²-ish), gyro from sway rate.
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dur = frames / spec.fps;
  const int n_imu = std::max(1, static_cast<int>(std::lround(dur * spec.imu_rate_hz)));
  std::vector<ImuSample> imu;
  imu.reserve(static_cast<size_t>(n_imu));
  for (int i = 0; i < n_imu; ++i) {
    const double t = i / spec.imu_rate_hz;
    ImuSample s;
    s.timestamp_ns = static_cast<int64_t>(std::llround(t * 1e9));
    const double ax = -sway_amp * sway_w * sway_w * std::sin(sway_w * t + sway_phase) * 0.01;
    const double ay = -0.6 * sway_amp * sway_w * sway_w * std::cos(sway_w * t) * 0.01;
    s.accel[0] = static_cast<float>(ax + 0.05 * gauss(rng));
    s.accel[1] = static_cast<float>(ay + 0.05 * gauss(rng));
    s.accel[2] = static_cast<float>(-9.81 + 0.05 * gauss(rng));
    const double gz = sway_amp * sway_w * std::cos(sway_w * t + sway_phase) * 0.002;
    s.gyro[0] = static_cast<float>(0.01 * gauss(rng));
    s.gyro[1] = static_cast<float>(gz + 0.01 * gauss(rng));
    s.gyro[2] = static_cast<float>(0.01 * gauss(rng));
    imu.push_back(s);
  }
  rec.imu_per_frame = aggregate_imu_per_frame(imu, rec.frame_timestamps_ns);
  rec.has_imu = !rec.imu_per_frame.empty();

  rec.validate();
  return rec;
}

}  // namespace egogaze
