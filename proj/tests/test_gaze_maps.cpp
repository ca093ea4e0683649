#include <doctest.h>

#include <cmath>
#include <random>

#include "egogaze/gaze_maps.hpp"
#include "oracles.hpp"

using namespace egogaze;

TEST_CASE("fixation map: rounding, duplicates, bounds") {
  // (2.4, 3.6) on 8x8 -> column 2, row 4
  const FixationMap fm = fixation_map_from_points({{2.4, 3.6}}, 8, 8);
  CHECK(fm.count() == 1);
  CHECK(fm.grid.at(4, 2) == 1.0);
  double sum = 0;
  for (int64_t i = 0; i < fm.grid.numel(); ++i) sum += fm.grid[i];
  CHECK(sum == 1.0);

  // duplicates: N = 2, grid sum 1, coords length 2
  const FixationMap dup = fixation_map_from_points({{1.0, 1.0}, {1.2, 0.8}}, 8, 8);
  CHECK(dup.count() == 2);
  sum = 0;
  for (int64_t i = 0; i < dup.grid.numel(); ++i) sum += dup.grid[i];
  CHECK(sum == 1.0);

  // half-away-from-zero rounding
  const FixationMap half = fixation_map_from_points({{2.5, 0.0}}, 8, 8);
  CHECK(half.grid.at(0, 3) == 1.0);

  // out-of-bounds points are dropped; none left -> error
  CHECK_THROWS_WITH_AS(fixation_map_from_points({{-3.0, 1.0}}, 8, 8), doctest::Contains("no fixations"),
                       std::invalid_argument);
  const FixationMap mixed = fixation_map_from_points({{-3.0, 1.0}, {1.0, 1.0}}, 8, 8);
  CHECK(mixed.count() == 1);
}

TEST_CASE("density map: normalization, argmax at fixation, sigma guard") {
  const FixationMap fm = fixation_map_from_points({{5.0, 2.0}}, 16, 16);
  const DensityMap dm = density_from_fixations(fm, 1.5);
  double sum = 0, best = -1;
  int argmax = -1;
  for (int64_t i = 0; i < dm.grid.numel(); ++i) {
    sum += dm.grid[i];
    CHECK(dm.grid[i] >= 0.0);
    if (dm.grid[i] > best) {
      best = dm.grid[i];
      argmax = static_cast<int>(i);
    }
  }
  CHECK(std::abs(sum - 1.0) < 1e-6);
  CHECK(argmax == 2 * 16 + 5);
  CHECK_THROWS(density_from_fixations(fm, 0.0));
  CHECK_THROWS(density_from_fixations(fm, -1.0));
}

TEST_CASE("blur: matches direct convolution, preserves mass, semigroup") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GridD m({12, 17});
  for (int64_t i = 0; i < m.numel(); ++i) m[i] = u(rng);

  const GridD fast = blur_map(m, 1.7);
  const GridD slow = oracle::blur_direct(m, 1.7);
  double maxdiff = 0, sum_in = 0, sum_out = 0;
  for (int64_t i = 0; i < m.numel(); ++i) {
    maxdiff = std::max(maxdiff, std::abs(fast[i] - slow[i]));
    sum_in += m[i];
    sum_out += fast[i];
  }
  CHECK(maxdiff < 1e-12);
  CHECK(sum_out == doctest::Approx(sum_in).epsilon(1e-12));

  // blur sigma1 then sigma2 ~ blur sqrt(s1^2 + s2^2), away from truncation error
  const GridD twice = blur_map(blur_map(m, 1.0), 1.2);
  const GridD once = blur_map(m, std::sqrt(1.0 + 1.44));
  for (int64_t i = 0; i < m.numel(); ++i) CHECK(std::abs(twice[i] - once[i]) < 1e-4);

  CHECK_THROWS(blur_map(m, -0.5));
}

TEST_CASE("center prior: fitting, ridge, degenerate input") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gx(32.0, 6.0), gy(24.0, 4.0);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 4000; ++i) pts.emplace_back(gx(rng), gy(rng));
  const CenterPrior p = fit_center_prior(pts, 48, 64);
  CHECK(p.mean_x == doctest::Approx(32.0).epsilon(0.02));
  CHECK(p.mean_y == doctest::Approx(24.0).epsilon(0.02));
  CHECK(p.cov_xx == doctest::Approx(36.0 + 1.0).epsilon(0.1));  // + ridge
  CHECK(p.cov_yy == doctest::Approx(16.0 + 1.0).epsilon(0.1));
  double sum = 0;
  for (int64_t i = 0; i < p.grid.numel(); ++i) sum += p.grid[i];
  CHECK(std::abs(sum - 1.0) < 1e-6);

  // all points identical: covariance collapses to the ridge
  std::vector<std::pair<double, double>> centered(10, {31.5, 23.5});
  const CenterPrior c = fit_center_prior(centered, 48, 64);
  CHECK(c.cov_xx == doctest::Approx(1.0));
  CHECK(c.cov_yy == doctest::Approx(1.0));
  CHECK(std::abs(c.cov_xy) < 1e-12);

  CHECK_THROWS(fit_center_prior({{1.0, 1.0}}, 48, 64));
  CHECK_THROWS(fit_center_prior({}, 48, 64));
}

TEST_CASE("rasterize_gaussian: degenerate covariance rejected") {
  CHECK_THROWS_WITH_AS(rasterize_gaussian(8, 8, 0.0, 0.0, 0.0, 16, 16), doctest::Contains("degenerate covariance"),
                       std::invalid_argument);
  const GridD g = rasterize_gaussian(8, 8, 4.0, 0.0, 4.0, 16, 16);
  double sum = 0;
  for (int64_t i = 0; i < g.numel(); ++i) sum += g[i];
  CHECK(std::abs(sum - 1.0) < 1e-9);
}
