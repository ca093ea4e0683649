#pragma once

#include <cmath>
#include <vector>

namespace egogaze::nn {

// Normalized 1-D Gaussian taps truncated at 4*sigma.
template <typename T>
std::vector<T> gaussian_kernel(double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<T> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double w = std::exp(-0.5 * (static_cast<double>(i) * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = static_cast<T>(w);
    sum += w;
  }
  for (auto& v : k) v = static_cast<T>(static_cast<double>(v) / sum);
  return k;
}

// Whole-sample reflection: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} ...
// Keeps the total mass of a normalized kernel exactly.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Separable blur of one H x W channel, out-of-place.
template <typename T>
void blur_channel(const T* src, T* dst, int h, int w, const std::vector<T>& kernel, std::vector<T>& scratch) {
  const int r = (static_cast<int>(kernel.size()) - 1) / 2;
  scratch.resize(static_cast<size_t>(h) * w);
  // horizontal pass
  for (int y = 0; y < h; ++y) {
    const T* row = src + static_cast<size_t>(y) * w;
    T* out = scratch.data() + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += static_cast<double>(kernel[static_cast<size_t>(k + r)]) * row[reflect_index(x + k, w)];
      out[x] = static_cast<T>(acc);
    }
  }
  // vertical pass
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k)
        acc += static_cast<double>(kernel[static_cast<size_t>(k + r)]) * scratch[static_cast<size_t>(reflect_index(y + k, h)) * w + x];
      dst[static_cast<size_t>(y) * w + x] = static_cast<T>(acc);
    }
  }
}

// Adjoint of blur_channel (scatter form), used by backprop through the fixed blur.
template <typename T>
void blur_channel_adjoint(const T* grad_out, T* grad_in, int h, int w, const std::vector<T>& kernel,
                          std::vector<T>& scratch) {
  const int r = (static_cast<int>(kernel.size()) - 1) / 2;
  scratch.assign(static_cast<size_t>(h) * w, T(0));
  // adjoint of the vertical pass
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      const T g = grad_out[static_cast<size_t>(y) * w + x];
      if (g == T(0)) continue;
      for (int k = -r; k <= r; ++k)
        scratch[static_cast<size_t>(reflect_index(y + k, h)) * w + x] += kernel[static_cast<size_t>(k + r)] * g;
    }
  }
  // adjoint of the horizontal pass
  for (int y = 0; y < h; ++y) {
    const T* row = scratch.data() + static_cast<size_t>(y) * w;
    T* out = grad_in + static_cast<size_t>(y) * w;
    for (int x = 0; x < w; ++x) out[x] = T(0);
    for (int x = 0; x < w; ++x) {
      const T g = row[x];
      if (g == T(0)) continue;
      for (int k = -r; k <= r; ++k) out[reflect_index(x + k, w)] += kernel[static_cast<size_t>(k + r)] * g;
    }
  }
}

}  // namespace egogaze::nn
