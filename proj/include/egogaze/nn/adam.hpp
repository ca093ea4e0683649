#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "egogaze/nn/layers.hpp"

namespace egogaze::nn {

// Adam (Kingma & Ba). Moments kept in double so float training stays well
// conditioned; the parameter list must not change between steps.
template <typename T>
struct Adam {
  double lr = 2e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<std::vector<double>> m, v;

  explicit Adam(double learning_rate = 2e-3) : lr(learning_rate) {}

  void step(std::vector<Param<T>*>& params) {
    if (m.empty()) {
      m.resize(params.size());
      v.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        m[i].assign(static_cast<size_t>(params[i]->numel()), 0.0);
        v[i].assign(static_cast<size_t>(params[i]->numel()), 0.0);
      }
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& val = params[i]->v.data;
      auto& grad = params[i]->g.data;
      for (size_t j = 0; j < val.size(); ++j) {
        const double g = static_cast<double>(grad[j]);
        m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
        v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
        const double mh = m[i][j] / bc1;
        const double vh = v[i][j] / bc2;
        val[j] = static_cast<T>(static_cast<double>(val[j]) - lr * mh / (std::sqrt(vh) + eps));
      }
    }
  }
};

}  // namespace egogaze::nn
