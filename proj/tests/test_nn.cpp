#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "egogaze/nn/adam.hpp"
#include "egogaze/nn/blur.hpp"
#include "egogaze/nn/layers.hpp"
#include "egogaze/tensor.hpp"

using namespace egogaze;
using nn::Conv2d;
using nn::ConvTranspose2d;
using nn::Param;
using nn::ReLU;
using nn::ResNeXtBlock;

namespace {

std::mt19937_64 g_rng(1234);

void randomize(Tensor<double>& t, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : t.data) v = n(g_rng);
}

// Scalar objective: weighted sum of the layer output against fixed random
// weights, so dL/dout is known exactly.
struct Probe {
  Tensor<double> w;
  explicit Probe(const std::vector<int>& shape) : w(shape) { randomize(w); }
  double loss(const Tensor<double>& out) const {
    double s = 0;
    for (size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * w.data[i];
    return s;
  }
  Tensor<double> grad() const { return w; }
};

// Central finite differences on one scalar slot.
double fd(const std::function<double()>& eval, double& slot, double h = 1e-6) {
  const double keep = slot;
  slot = keep + h;
  const double up = eval();
  slot = keep - h;
  const double dn = eval();
  slot = keep;
  return (up - dn) / (2 * h);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

template <typename Layer>
void check_layer_grads(Layer& layer, Tensor<double>& x, int checks = 24, double tol = 1e-6) {
  auto out0 = layer.forward(x, /*keep=*/true);
  Probe probe(out0.shape);
  const Tensor<double> gin = layer.backward(probe.grad());

  std::vector<Param<double>*> params;
  layer.collect(params);

  auto eval = [&]() { return probe.loss(layer.forward(x, false)); };

  std::uniform_int_distribution<size_t> pick_param(0, params.size() - 1);
  for (int c = 0; c < checks; ++c) {
    auto* p = params[pick_param(g_rng)];
    std::uniform_int_distribution<size_t> pick(0, p->v.data.size() - 1);
    const size_t i = pick(g_rng);
    const double analytic = p->g.data[i];
    const double numeric = fd(eval, p->v.data[i]);
    CHECK(rel_err(analytic, numeric) < tol);
  }
  std::uniform_int_distribution<size_t> pickx(0, x.data.size() - 1);
  for (int c = 0; c < checks / 2; ++c) {
    const size_t i = pickx(g_rng);
    const double analytic = gin.data[i];
    const double numeric = fd(eval, x.data[i]);
    CHECK(rel_err(analytic, numeric) < tol);
  }
}

}  // namespace

TEST_CASE("conv2d gradients (stride, padding, groups)") {
  Conv2d<double> conv;
  conv.init("conv", 6, 8, 3, /*stride=*/2, /*pad=*/1, /*groups=*/2, g_rng);
  Tensor<double> x({2, 6, 7, 7});
  randomize(x);
  check_layer_grads(conv, x);
}

TEST_CASE("conv2d 1x1 gradients") {
  Conv2d<double> conv;
  conv.init("pw", 5, 4, 1, 1, 0, 1, g_rng);
  Tensor<double> x({2, 5, 5, 5});
  randomize(x);
  check_layer_grads(conv, x);
}

TEST_CASE("transpose conv gradients (k4 s2 p1 doubles the grid)") {
  ConvTranspose2d<double> up;
  up.init("up", 6, 3, 4, 2, 1, g_rng);
  Tensor<double> x({2, 6, 5, 5});
  randomize(x);
  const auto y = up.forward(x, true);
  CHECK(y.dim(2) == 10);
  CHECK(y.dim(3) == 10);
  check_layer_grads(up, x);
}

TEST_CASE("relu gradient mask") {
  ReLU<double> r;
  Tensor<double> x({1, 3, 4, 4});
  randomize(x);
  auto y = r.forward(x, true);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == (x.data[i] > 0 ? x.data[i] : 0.0));
  Tensor<double> g(y.shape);
  randomize(g);
  const auto gx = r.backward(g);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(gx.data[i] == (x.data[i] > 0 ? g.data[i] : 0.0));
}

TEST_CASE("resnext block gradients and identity skip") {
  ResNeXtBlock<double> block;
  block.init("blk", 8, 4, /*cardinality=*/2, g_rng);
  Tensor<double> x({1, 8, 5, 5});
  randomize(x, 0.5);
  // relu kinks make finite differences slightly noisier than the linear layers
  check_layer_grads(block, x, 30, 2e-5);
}

TEST_CASE("col2im is the adjoint of im2col") {
  const int c = 3, h = 6, w = 5, k = 3, stride = 2, pad = 1;
  const int oh = nn::conv_out_dim(h, k, stride, pad), ow = nn::conv_out_dim(w, k, stride, pad);
  std::vector<double> x(static_cast<size_t>(c) * h * w), cols(static_cast<size_t>(c) * k * k * oh * ow),
      u(cols.size()), utx(x.size(), 0.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : x) v = n(g_rng);
  for (auto& v : u) v = n(g_rng);
  nn::im2col(x.data(), c, h, w, k, stride, pad, oh, ow, cols.data());
  nn::col2im(u.data(), c, h, w, k, stride, pad, oh, ow, utx.data());
  double lhs = 0, rhs = 0;
  for (size_t i = 0; i < cols.size(); ++i) lhs += cols[i] * u[i];
  for (size_t i = 0; i < x.size(); ++i) rhs += x[i] * utx[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("blur adjoint satisfies the dot-product identity") {
  const int h = 9, w = 7;
  const auto kernel = nn::gaussian_kernel<double>(1.3);
  std::vector<double> x(static_cast<size_t>(h) * w), y(x.size()), bx(x.size()), aty(x.size()), scratch;
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : x) v = n(g_rng);
  for (auto& v : y) v = n(g_rng);
  nn::blur_channel(x.data(), bx.data(), h, w, kernel, scratch);
  nn::blur_channel_adjoint(y.data(), aty.data(), h, w, kernel, scratch);
  double lhs = 0, rhs = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    lhs += bx[i] * y[i];
    rhs += x[i] * aty[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("adam: descends a quadratic, deterministic, lr 0 freezes") {
  Param<double> p;
  p.name = "q";
  p.resize({4});
  p.v.data = {1.0, -2.0, 3.0, 0.5};
  std::vector<Param<double>*> params{&p};

  nn::Adam<double> opt(0.05);
  for (int it = 0; it < 400; ++it) {
    for (size_t i = 0; i < 4; ++i) p.g.data[i] = 2.0 * p.v.data[i];  // d/dx x^2
    opt.step(params);
  }
  for (double v : p.v.data) CHECK(std::abs(v) < 1e-2);

  Param<double> q;
  q.name = "f";
  q.resize({2});
  q.v.data = {1.0, 1.0};
  std::vector<Param<double>*> frozen{&q};
  nn::Adam<double> opt0(0.0);
  q.g.data = {5.0, -3.0};
  opt0.step(frozen);
  CHECK(q.v.data[0] == 1.0);
  CHECK(q.v.data[1] == 1.0);
}

TEST_CASE("he init is deterministic per seed and name") {
  std::mt19937_64 a(77), b(77), c(78);
  Conv2d<double> ca, cb, cc2;
  ca.init("same", 4, 4, 3, 1, 1, 1, a);
  cb.init("same", 4, 4, 3, 1, 1, 1, b);
  cc2.init("same", 4, 4, 3, 1, 1, 1, c);
  CHECK(ca.weight.v.data == cb.weight.v.data);
  CHECK(ca.weight.v.data != cc2.weight.v.data);
}
