#include "egogaze/gaze_maps.hpp"

#include <cmath>
#include <stdexcept>

#include "egogaze/nn/blur.hpp"

namespace egogaze {

FixationMap fixation_map_from_points(const std::vector<std::pair<double, double>>& points, int height, int width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("map dimensions must be positive");
  FixationMap fix;
  fix.height = height;
  fix.width = width;
  fix.grid = GridD({height, width}, 0.0);
  for (const auto& [px, py] : points) {
    const long x = std::lround(px);  // round half away from zero
    const long y = std::lround(py);
    if (x < 0 || x >= width || y < 0 || y >= height) continue;
    fix.coords.emplace_back(static_cast<int>(x), static_cast<int>(y));
    fix.grid.at(static_cast<int>(y), static_cast<int>(x)) = 1.0;
  }
  if (fix.coords.empty()) throw std::invalid_argument("no fixations: no point lies inside the map");
  return fix;
}

GridD blur_map(const GridD& map, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
  if (map.rank() != 2) throw std::invalid_argument("blur_map expects a rank-2 map");
  for (double v : map.data)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite input to blur_map");
  const int h = map.dim(0), w = map.dim(1);
  GridD out({h, w});
  auto kernel = nn::gaussian_kernel<double>(sigma);
  std::vector<double> scratch;
  nn::blur_channel(map.ptr(), out.ptr(), h, w, kernel, scratch);
  return out;
}

DensityMap density_from_fixations(const FixationMap& fix, double sigma) {
  if (fix.count() < 1) throw std::invalid_argument("no fixations");
  DensityMap d;
  d.grid = blur_map(fix.grid, sigma);
  double sum = 0.0;
  for (double v : d.grid.data) sum += v;
  if (sum <= 0.0) throw std::runtime_error("density normalization failed");
  for (auto& v : d.grid.data) v /= sum;
  return d;
}

GridD rasterize_gaussian(double mean_x, double mean_y, double cov_xx, double cov_xy, double cov_yy, int height,
                         int width) {
  const double det = cov_xx * cov_yy - cov_xy * cov_xy;
  if (!(det > 0.0) || !std::isfinite(det)) throw std::invalid_argument("degenerate covariance");
  const double ixx = cov_yy / det, iyy = cov_xx / det, ixy = -cov_xy / det;
  GridD g({height, width});
  double sum = 0.0;
  for (int y = 0; y < height; ++y) {
    const double dy = y - mean_y;
    for (int x = 0; x < width; ++x) {
      const double dx = x - mean_x;
      const double q = ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
      const double v = std::exp(-0.5 * q);
      g.at(y, x) = v;
      sum += v;
    }
  }
  if (!(sum > 0.0)) throw std::invalid_argument("degenerate covariance");
  for (auto& v : g.data) v /= sum;
  return g;
}

CenterPrior fit_center_prior(const std::vector<std::pair<double, double>>& train_gaze, int height, int width,
                             double ridge) {
  if (train_gaze.size() < 2) throw std::invalid_argument("fit_center_prior needs at least 2 points");

  const double n = static_cast<double>(train_gaze.size());
  double mx = 0, my = 0;
  for (const auto& [x, y] : train_gaze) { mx += x; my += y; }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : train_gaze) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  CenterPrior prior;
  prior.mean_x = mx;
  prior.mean_y = my;
  prior.cov_xx = sxx / n + ridge;
  prior.cov_xy = sxy / n;
  prior.cov_yy = syy / n + ridge;
  prior.grid = rasterize_gaussian(prior.mean_x, prior.mean_y, prior.cov_xx, prior.cov_xy, prior.cov_yy, height, width);
  return prior;
}

}  // namespace egogaze
