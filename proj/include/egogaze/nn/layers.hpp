#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "egogaze/nn/gemm.hpp"
#include "egogaze/tensor.hpp"

// Minimal training-capable layer set: batched NCHW tensors, im2col + GEMM
// convolutions, explicit forward/backward pairs. Templated on the scalar so
// the same graph runs in float for training and double for finite-difference
// gradient checks.
namespace egogaze::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> v;  // value
  Tensor<T> g;  // accumulated gradient, same shape

  void resize(std::vector<int> shape) {
    v = Tensor<T>(shape);
    g = Tensor<T>(std::move(shape));
  }
  int64_t numel() const { return v.numel(); }
};

template <typename T>
void he_normal_init(Tensor<T>& w, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& x : w.data) x = static_cast<T>(dist(rng));
}

inline int conv_out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// cols is (c * k * k) x (oh * ow); the (oh, ow) grid is passed in so the same
// routine serves both conv (gather from x) and the transpose-conv gradient.
template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow, T* cols) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* dst = cols + ((static_cast<size_t>(ch) * k + ki) * k + kj) * oh * ow;
        for (int i = 0; i < oh; ++i) {
          const int yy = i * stride - pad + ki;
          if (yy < 0 || yy >= h) {
            for (int j = 0; j < ow; ++j) dst[static_cast<size_t>(i) * ow + j] = T(0);
            continue;
          }
          const T* src = x + (static_cast<size_t>(ch) * h + yy) * w;
          for (int j = 0; j < ow; ++j) {
            const int xx = j * stride - pad + kj;
            dst[static_cast<size_t>(i) * ow + j] = (xx >= 0 && xx < w) ? src[xx] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the (c, h, w) image.
template <typename T>
void col2im(const T* cols, int c, int h, int w, int k, int stride, int pad, int oh, int ow, T* x) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* src = cols + ((static_cast<size_t>(ch) * k + ki) * k + kj) * oh * ow;
        for (int i = 0; i < oh; ++i) {
          const int yy = i * stride - pad + ki;
          if (yy < 0 || yy >= h) continue;
          T* dst = x + (static_cast<size_t>(ch) * h + yy) * w;
          for (int j = 0; j < ow; ++j) {
            const int xx = j * stride - pad + kj;
            if (xx >= 0 && xx < w) dst[xx] += src[static_cast<size_t>(i) * ow + j];
          }
        }
      }
    }
  }
}

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0, groups = 1;
  Param<T> weight;  // (out_ch, in_ch/groups, k, k)
  Param<T> bias;    // (out_ch)
  Tensor<T> x_cache;
  std::vector<T> cols;

  void init(const std::string& name, int in_c, int out_c, int kk, int s, int p, int g, std::mt19937_64& rng) {
    if (in_c % g || out_c % g) throw std::invalid_argument("conv channels not divisible by groups");
    in_ch = in_c; out_ch = out_c; k = kk; stride = s; pad = p; groups = g;
    weight.name = name + ".weight";
    weight.resize({out_c, in_c / g, kk, kk});
    he_normal_init(weight.v, (in_c / g) * kk * kk, rng);
    bias.name = name + ".bias";
    bias.resize({out_c});
  }

  Tensor<T> forward(const Tensor<T>& x, bool keep = true) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_ch) throw std::invalid_argument("conv input channel mismatch");
    const int oh = conv_out_dim(h, k, stride, pad), ow = conv_out_dim(w, k, stride, pad);
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv output would be empty");
    Tensor<T> y({n, out_ch, oh, ow});
    cols.resize(static_cast<size_t>(in_ch) * k * k * oh * ow);
    const int kdim = (in_ch / groups) * k * k;  // GEMM K per group
    const int mdim = out_ch / groups;
    for (int b = 0; b < n; ++b) {
      im2col(x.ptr() + static_cast<size_t>(b) * in_ch * h * w, in_ch, h, w, k, stride, pad, oh, ow, cols.data());
      for (int g = 0; g < groups; ++g) {
        gemm(false, false, mdim, oh * ow, kdim, T(1), weight.v.ptr() + static_cast<size_t>(g) * mdim * kdim, kdim,
             cols.data() + static_cast<size_t>(g) * kdim * oh * ow, oh * ow, T(0),
             y.ptr() + (static_cast<size_t>(b) * out_ch + static_cast<size_t>(g) * mdim) * oh * ow, oh * ow);
      }
      for (int oc = 0; oc < out_ch; ++oc) {
        T* row = y.ptr() + (static_cast<size_t>(b) * out_ch + oc) * oh * ow;
        const T bv = bias.v[oc];
        for (int i = 0; i < oh * ow; ++i) row[i] += bv;
      }
    }
    if (keep) x_cache = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Tensor<T>& x = x_cache;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = gy.dim(2), ow = gy.dim(3);
    Tensor<T> gx({n, in_ch, h, w});
    cols.resize(static_cast<size_t>(in_ch) * k * k * oh * ow);
    std::vector<T> gcols(cols.size());
    const int kdim = (in_ch / groups) * k * k;
    const int mdim = out_ch / groups;
    for (int b = 0; b < n; ++b) {
      im2col(x.ptr() + static_cast<size_t>(b) * in_ch * h * w, in_ch, h, w, k, stride, pad, oh, ow, cols.data());
      for (int g = 0; g < groups; ++g) {
        const T* gy_blk = gy.ptr() + (static_cast<size_t>(b) * out_ch + static_cast<size_t>(g) * mdim) * oh * ow;
        // dW += gy * cols^T
        gemm(false, true, mdim, kdim, oh * ow, T(1), gy_blk, oh * ow,
             cols.data() + static_cast<size_t>(g) * kdim * oh * ow, oh * ow, T(1),
             weight.g.ptr() + static_cast<size_t>(g) * mdim * kdim, kdim);
        // dcols = W^T * gy
        gemm(true, false, kdim, oh * ow, mdim, T(1), weight.v.ptr() + static_cast<size_t>(g) * mdim * kdim, kdim,
             gy_blk, oh * ow, T(0), gcols.data() + static_cast<size_t>(g) * kdim * oh * ow, oh * ow);
      }
      col2im(gcols.data(), in_ch, h, w, k, stride, pad, oh, ow, gx.ptr() + static_cast<size_t>(b) * in_ch * h * w);
      for (int oc = 0; oc < out_ch; ++oc) {
        const T* row = gy.ptr() + (static_cast<size_t>(b) * out_ch + oc) * oh * ow;
        T acc = T(0);
        for (int i = 0; i < oh * ow; ++i) acc += row[i];
        bias.g[oc] += acc;
      }
    }
    return gx;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

// Transpose convolution; weight layout (in_ch, out_ch, k, k). out = (in-1)*s + k - 2p.
template <typename T>
struct ConvTranspose2d {
  int in_ch = 0, out_ch = 0, k = 2, stride = 2, pad = 0;
  Param<T> weight;
  Param<T> bias;
  Tensor<T> x_cache;
  std::vector<T> cols;

  void init(const std::string& name, int in_c, int out_c, int kk, int s, int p, std::mt19937_64& rng) {
    in_ch = in_c; out_ch = out_c; k = kk; stride = s; pad = p;
    weight.name = name + ".weight";
    weight.resize({in_c, out_c, kk, kk});
    he_normal_init(weight.v, in_c * kk * kk / (s * s), rng);
    bias.name = name + ".bias";
    bias.resize({out_c});
  }

  int out_dim(int in) const { return (in - 1) * stride + k - 2 * pad; }

  Tensor<T> forward(const Tensor<T>& x, bool keep = true) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_ch) throw std::invalid_argument("deconv input channel mismatch");
    const int oh = out_dim(h), ow = out_dim(w);
    Tensor<T> y({n, out_ch, oh, ow});
    const int kdim = out_ch * k * k;
    cols.resize(static_cast<size_t>(kdim) * h * w);
    for (int b = 0; b < n; ++b) {
      // cols = W^T x, then scatter into the larger image (adjoint of im2col).
      gemm(true, false, kdim, h * w, in_ch, T(1), weight.v.ptr(), kdim,
           x.ptr() + static_cast<size_t>(b) * in_ch * h * w, h * w, T(0), cols.data(), h * w);
      T* yb = y.ptr() + static_cast<size_t>(b) * out_ch * oh * ow;
      col2im(cols.data(), out_ch, oh, ow, k, stride, pad, h, w, yb);
      for (int oc = 0; oc < out_ch; ++oc) {
        T* row = yb + static_cast<size_t>(oc) * oh * ow;
        const T bv = bias.v[oc];
        for (int i = 0; i < oh * ow; ++i) row[i] += bv;
      }
    }
    if (keep) x_cache = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Tensor<T>& x = x_cache;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = gy.dim(2), ow = gy.dim(3);
    Tensor<T> gx({n, in_ch, h, w});
    const int kdim = out_ch * k * k;
    cols.resize(static_cast<size_t>(kdim) * h * w);
    for (int b = 0; b < n; ++b) {
      const T* gyb = gy.ptr() + static_cast<size_t>(b) * out_ch * oh * ow;
      im2col(gyb, out_ch, oh, ow, k, stride, pad, h, w, cols.data());
      // dW += x * gcols^T ; dx = W * gcols
      gemm(false, true, in_ch, kdim, h * w, T(1), x.ptr() + static_cast<size_t>(b) * in_ch * h * w, h * w,
           cols.data(), h * w, T(1), weight.g.ptr(), kdim);
      gemm(false, false, in_ch, h * w, kdim, T(1), weight.v.ptr(), kdim, cols.data(), h * w, T(0),
           gx.ptr() + static_cast<size_t>(b) * in_ch * h * w, h * w);
      for (int oc = 0; oc < out_ch; ++oc) {
        const T* row = gyb + static_cast<size_t>(oc) * oh * ow;
        T acc = T(0);
        for (int i = 0; i < oh * ow; ++i) acc += row[i];
        bias.g[oc] += acc;
      }
    }
    return gx;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename T>
struct ReLU {
  Tensor<T> mask;
  Tensor<T> forward(Tensor<T> x, bool keep = true) {
    if (keep) {
      mask = Tensor<T>(x.shape);
      for (size_t i = 0; i < x.data.size(); ++i) mask.data[i] = x.data[i] > T(0) ? T(1) : T(0);
    }
    for (auto& v : x.data) v = v > T(0) ? v : T(0);
    return x;
  }
  Tensor<T> backward(Tensor<T> gy) const {
    for (size_t i = 0; i < gy.data.size(); ++i) gy.data[i] *= mask.data[i];
    return gy;
  }
};

// ResNeXt bottleneck: 1x1 reduce -> grouped 3x3 -> 1x1 expand, identity skip.
template <typename T>
struct ResNeXtBlock {
  Conv2d<T> reduce, grouped, expand;
  ReLU<T> r1, r2, r3;

  void init(const std::string& name, int ch, int bottleneck, int cardinality, std::mt19937_64& rng) {
    reduce.init(name + ".reduce", ch, bottleneck, 1, 1, 0, 1, rng);
    grouped.init(name + ".grouped", bottleneck, bottleneck, 3, 1, 1, cardinality, rng);
    expand.init(name + ".expand", bottleneck, ch, 1, 1, 0, 1, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool keep = true) {
    Tensor<T> y = r1.forward(reduce.forward(x, keep), keep);
    y = r2.forward(grouped.forward(y, keep), keep);
    y = expand.forward(y, keep);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
    return r3.forward(std::move(y), keep);
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> g = r3.backward(gy);
    Tensor<T> gx = reduce.backward(r1.backward(grouped.backward(r2.backward(expand.backward(g)))));
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];  // identity skip
    return gx;
  }

  void collect(std::vector<Param<T>*>& out) {
    reduce.collect(out);
    grouped.collect(out);
    expand.collect(out);
  }
};

template <typename T>
void zero_grad(std::vector<Param<T>*>& params) {
  for (auto* p : params) p->g.zero();
}

template <typename T>
int64_t total_params(const std::vector<Param<T>*>& params) {
  int64_t n = 0;
  for (const auto* p : params) n += p->numel();
  return n;
}

}  // namespace egogaze::nn
