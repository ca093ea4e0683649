#pragma once

#include <utility>
#include <vector>

#include "egogaze/tensor.hpp"

namespace egogaze {

// Binary ground-truth fixation map. The grid collapses duplicate points to a
// single 1, the coords list keeps every point (multiplicity matters for NSS
// and the KLD ground-truth PMF).
struct FixationMap {
  int height = 0, width = 0;
  std::vector<std::pair<int, int>> coords;  // (x, y) pixel indices
  GridD grid;                               // height x width, values 0/1

  int count() const { return static_cast<int>(coords.size()); }
};

// Gaussian-blurred fixation map, normalized to sum 1.
struct DensityMap {
  GridD grid;
};

// Gaussian center-bias model plus its rasterization on the image grid.
struct CenterPrior {
  double mean_x = 0, mean_y = 0;
  double cov_xx = 0, cov_xy = 0, cov_yy = 0;
  GridD grid;  // sums to 1
};

// Points are (x, y) in pixel coordinates; rounded half-away-from-zero to pixel
// indices. Out-of-bounds points are dropped; throws "no fixations" if none
// survive.
FixationMap fixation_map_from_points(const std::vector<std::pair<double, double>>& points, int height, int width);

DensityMap density_from_fixations(const FixationMap& fix, double sigma);

// Truncated (4*sigma) Gaussian blur with whole-sample reflected borders.
// Mass-preserving for any nonnegative input.
GridD blur_map(const GridD& map, double sigma);

// Maximum-likelihood Gaussian over the training gaze points with a small
// diagonal ridge, rasterized and normalized onto a height x width grid.
CenterPrior fit_center_prior(const std::vector<std::pair<double, double>>& train_gaze, int height, int width,
                             double ridge = 1.0);

// Unnormalized-then-normalized bivariate Gaussian evaluated at integer pixel
// coordinates.
GridD rasterize_gaussian(double mean_x, double mean_y, double cov_xx, double cov_xy, double cov_yy, int height,
                         int width);

}  // namespace egogaze
