#ifndef VTON_NN_LOSSES_HPP
#define VTON_NN_LOSSES_HPP

#include <cmath>
#include <vector>

#include "vton/tensor.hpp"

namespace vton::nn {

// Numerically stable per-pixel softmax over the channel axis of NCHW.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  const int n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  Tensor<T> probs(logits.shape());
  const int plane = h * w;
  for (int i = 0; i < n; ++i) {
    const T* lp = &logits.at(i, 0, 0, 0);
    T* pp = &probs.at(i, 0, 0, 0);
    for (int j = 0; j < plane; ++j) {
      T mx = lp[j];
      for (int ch = 1; ch < c; ++ch) mx = std::max(mx, lp[ch * plane + j]);
      double z = 0;
      for (int ch = 0; ch < c; ++ch) {
        const double e = std::exp(static_cast<double>(lp[ch * plane + j] - mx));
        pp[ch * plane + j] = static_cast<T>(e);
        z += e;
      }
      for (int ch = 0; ch < c; ++ch) pp[ch * plane + j] = static_cast<T>(pp[ch * plane + j] / z);
    }
  }
  return probs;
}

template <typename T>
struct LossGrad {
  double loss = 0;
  Tensor<T> grad;
};

// Mean per-pixel cross-entropy against integer labels, optionally class
// weighted: loss = mean_{n,h,w} w[y] * (-log softmax(logits)[y]).
// The mean is over all pixels regardless of weights.
template <typename T>
LossGrad<T> cross_entropy(const Tensor<T>& logits, const Tensor<int>& labels,
                          const std::vector<double>& class_weights = {}) {
  const int n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  if (labels.ndim() != 3 || labels.dim(0) != n || labels.dim(1) != h || labels.dim(2) != w)
    throw ShapeError("cross_entropy: labels must be [N,H,W] matching logits");
  if (!class_weights.empty() && static_cast<int>(class_weights.size()) != c)
    throw ShapeError("cross_entropy: weight count must equal channel count");
  Tensor<T> probs = softmax_channels(logits);
  LossGrad<T> out;
  out.grad = Tensor<T>(logits.shape());
  const int plane = h * w;
  const double inv_m = 1.0 / (static_cast<double>(n) * plane);
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    const T* pp = &probs.at(i, 0, 0, 0);
    T* gp = &out.grad.at(i, 0, 0, 0);
    const int* yp = &labels.at(i, 0, 0);
    for (int j = 0; j < plane; ++j) {
      const int y = yp[j];
      if (y < 0 || y >= c) throw DataError("cross_entropy: label " + std::to_string(y) + " out of range");
      const double wgt = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
      const double p = std::max(static_cast<double>(pp[y * plane + j]), 1e-12);
      loss += -wgt * std::log(p);
      for (int ch = 0; ch < c; ++ch) {
        const double delta = ch == y ? 1.0 : 0.0;
        gp[ch * plane + j] = static_cast<T>(wgt * (pp[ch * plane + j] - delta) * inv_m);
      }
    }
  }
  out.loss = loss * inv_m;
  return out;
}

// Mean absolute error with its subgradient (0 at exact ties).
template <typename T>
LossGrad<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw ShapeError("l1_loss: shape mismatch");
  LossGrad<T> out;
  out.grad = Tensor<T>(pred.shape());
  const double inv_m = 1.0 / static_cast<double>(pred.numel());
  double loss = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    loss += std::abs(d);
    out.grad[i] = static_cast<T>((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) * inv_m);
  }
  out.loss = loss * inv_m;
  return out;
}

// Mean squared error against a constant target, as used by least-squares GAN
// objectives. Returns d loss / d pred.
template <typename T>
LossGrad<T> mse_to_constant(const Tensor<T>& pred, double target, double scale = 1.0) {
  LossGrad<T> out;
  out.grad = Tensor<T>(pred.shape());
  const double inv_m = 1.0 / static_cast<double>(pred.numel());
  double loss = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - target;
    loss += d * d;
    out.grad[i] = static_cast<T>(2.0 * scale * d * inv_m);
  }
  out.loss = scale * loss * inv_m;
  return out;
}

}  // namespace vton::nn

#endif  // VTON_NN_LOSSES_HPP
