#ifndef VTON_ADVERSARIAL_LOSSES_HPP
#define VTON_ADVERSARIAL_LOSSES_HPP

#include <string>
#include <vector>

#include "vton/nn/losses.hpp"
#include "vton/tensor.hpp"

namespace vton::adversarial {

// Gradients are w.r.t. the discriminator logit/score maps; callers chain
// them through the discriminator (and, for generator terms, onward into the
// generated image).
template <typename T>
struct DiscLoss {
  double total = 0;
  double real_term = 0;
  double fake_term = 0;
  Tensor<T> d_real;
  Tensor<T> d_fake;
};

template <typename T>
struct GenLoss {
  double total = 0;
  Tensor<T> d_fake;
};

namespace detail {

template <typename T>
void check_semantic_args(const Tensor<T>& logits, const Tensor<int>& labels, const std::vector<double>& weights) {
  const int c = logits.dim(1);
  if (static_cast<int>(weights.size()) != c - 1)
    throw ShapeError("pixel discriminator loss: weight vector length " + std::to_string(weights.size()) +
                     " != real-class count " + std::to_string(c - 1));
  for (std::size_t i = 0; i < labels.numel(); ++i)
    if (labels[i] < 0 || labels[i] >= c - 1)
      throw DataError("pixel discriminator loss: label " + std::to_string(labels[i]) +
                      " outside real classes [0," + std::to_string(c - 1) + ")");
}

inline std::vector<double> extend_weights(const std::vector<double>& weights) {
  std::vector<double> w = weights;
  w.push_back(0.0);  // fake channel never appears as a real label
  return w;
}

}  // namespace detail

// Pixel-level semantic discriminator objective. Real images are scored by a
// class-weighted per-pixel cross-entropy against the true parse labels; the
// generated image is pushed wholly onto the extra fake channel with no class
// weighting. Both expectations are means over batch and pixels.
template <typename T>
DiscLoss<T> psad_d_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits, const Tensor<int>& labels,
                        const std::vector<double>& weights) {
  if (!real_logits.same_shape(fake_logits))
    throw ShapeError("pixel discriminator loss: real/fake logit shapes differ");
  detail::check_semantic_args(real_logits, labels, weights);
  const int c = real_logits.dim(1);
  auto real = nn::cross_entropy(real_logits, labels, detail::extend_weights(weights));
  Tensor<int> fake_labels({fake_logits.dim(0), fake_logits.dim(2), fake_logits.dim(3)});
  fake_labels.fill(c - 1);
  auto fake = nn::cross_entropy(fake_logits, fake_labels);
  DiscLoss<T> out;
  out.real_term = real.loss;
  out.fake_term = fake.loss;
  out.total = real.loss + fake.loss;
  out.d_real = std::move(real.grad);
  out.d_fake = std::move(fake.grad);
  return out;
}

// Generator side of the pixel-level semantic objective: every generated
// pixel is pulled toward its true semantic class (non-saturating form).
template <typename T>
GenLoss<T> psad_g_loss(const Tensor<T>& fake_logits, const Tensor<int>& labels, const std::vector<double>& weights) {
  detail::check_semantic_args(fake_logits, labels, weights);
  auto ce = nn::cross_entropy(fake_logits, labels, detail::extend_weights(weights));
  GenLoss<T> out;
  out.total = ce.loss;
  out.d_fake = std::move(ce.grad);
  return out;
}

// Real/fake-only ablation: the same per-pixel machinery with a single real
// class (uniform weight) and the fake channel.
template <typename T>
DiscLoss<T> binary_d_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits) {
  if (real_logits.dim(1) != 2) throw ShapeError("binary discriminator loss: expected 2 channels");
  Tensor<int> labels({real_logits.dim(0), real_logits.dim(2), real_logits.dim(3)});
  return psad_d_loss(real_logits, fake_logits, labels, {1.0});
}

template <typename T>
GenLoss<T> binary_g_loss(const Tensor<T>& fake_logits) {
  if (fake_logits.dim(1) != 2) throw ShapeError("binary discriminator loss: expected 2 channels");
  Tensor<int> labels({fake_logits.dim(0), fake_logits.dim(2), fake_logits.dim(3)});
  return psad_g_loss(fake_logits, labels, {1.0});
}

// Least-squares patch objective over the score map: real -> 1, fake -> 0,
// generator targets 1. The discriminator loss carries the usual 1/2.
template <typename T>
DiscLoss<T> patch_d_loss(const Tensor<T>& real_scores, const Tensor<T>& fake_scores) {
  auto real = nn::mse_to_constant(real_scores, 1.0, 0.5);
  auto fake = nn::mse_to_constant(fake_scores, 0.0, 0.5);
  DiscLoss<T> out;
  out.real_term = real.loss;
  out.fake_term = fake.loss;
  out.total = real.loss + fake.loss;
  out.d_real = std::move(real.grad);
  out.d_fake = std::move(fake.grad);
  return out;
}

template <typename T>
GenLoss<T> patch_g_loss(const Tensor<T>& fake_scores) {
  auto fake = nn::mse_to_constant(fake_scores, 1.0);
  GenLoss<T> out;
  out.total = fake.loss;
  out.d_fake = std::move(fake.grad);
  return out;
}

}  // namespace vton::adversarial

#endif  // VTON_ADVERSARIAL_LOSSES_HPP
