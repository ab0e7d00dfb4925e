#ifndef VTON_SYNTHESIS_PERCEPTUAL_HPP
#define VTON_SYNTHESIS_PERCEPTUAL_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "vton/nn/layers.hpp"
#include "vton/nn/losses.hpp"
#include "vton/tensor.hpp"

namespace vton::synthesis {

// Fixed multi-stage convolutional feature stack for the feature-space image
// distance. Weights are seeded once at construction and never trained, so
// results are reproducible without external weight files. A stage is a
// stride-2 conv + ReLU; gradients still flow through to the input image.
template <typename T>
class PerceptualExtractor {
 public:
  explicit PerceptualExtractor(int stages = 5, int base_channels = 8, std::uint64_t seed = 0x5eedfacefeedULL) {
    int prev = 3;
    for (int s = 0; s < stages; ++s) {
      const int ch = base_channels * (1 << std::min(s, 3));
      stages_.emplace_back(prev, ch, 3, 2, nn::Norm::none, nn::Act::relu);
      prev = ch;
    }
    Rng rng(seed);
    for (auto& st : stages_) st.init(rng);
    for (auto& st : stages_) st.set_train(false);
  }

  int num_stages() const { return static_cast<int>(stages_.size()); }

  // Mutable stage access for instrumentation (e.g. wiring an identity probe).
  nn::ConvUnit<T>& stage(int i) { return stages_.at(static_cast<std::size_t>(i)); }

  std::string name() const {
    return "seeded-conv" + std::to_string(stages_.size());
  }

  // Stage activations for x; caches intermediates for backward().
  std::vector<Tensor<T>> forward(const Tensor<T>& x) {
    std::vector<Tensor<T>> feats;
    Tensor<T> y = x;
    for (auto& st : stages_) {
      y = st.forward(y);
      feats.push_back(y);
    }
    return feats;
  }

  // Gradient w.r.t. the input of the most recent forward() given gradients
  // w.r.t. every stage output. Weights are frozen: their grads are discarded.
  Tensor<T> backward(const std::vector<Tensor<T>>& dfeats) {
    Tensor<T> d = dfeats.back();
    for (int s = num_stages() - 1; s >= 0; --s) {
      d = stages_[s].backward(d, false);
      if (s > 0) d += dfeats[s - 1];
    }
    return d;
  }

 private:
  std::vector<nn::ConvUnit<T>> stages_;
};

// Sum over stages of the mean L1 distance between stage features; gradient
// is w.r.t. `pred`. Symmetric in value between the two images.
template <typename T>
nn::LossGrad<T> perceptual_loss(const Tensor<T>& pred, const Tensor<T>& target, PerceptualExtractor<T>& extractor) {
  if (!pred.same_shape(target)) throw ShapeError("perceptual_loss: image shapes differ");
  std::vector<Tensor<T>> target_feats = extractor.forward(target);
  std::vector<Tensor<T>> pred_feats = extractor.forward(pred);  // last: caches belong to pred
  nn::LossGrad<T> out;
  out.loss = 0;
  std::vector<Tensor<T>> dfeats;
  for (std::size_t s = 0; s < pred_feats.size(); ++s) {
    auto stage = nn::l1_loss(pred_feats[s], target_feats[s]);
    out.loss += stage.loss;
    dfeats.push_back(std::move(stage.grad));
  }
  out.grad = extractor.backward(dfeats);
  return out;
}

template <typename T>
struct TryOnLossParts {
  double total = 0;
  double l1 = 0;
  double perceptual = 0;
  double adv = 0;  // unweighted generator-side adversarial term
  double lambda_adv = 0;
  Tensor<T> d_image;        // gradient of (l1 + perceptual) w.r.t. the generated image
};

// Composite synthesis objective: pixel L1 + feature distance + weighted
// adversarial term. The adversarial gradient flows through the discriminator
// separately; here the term enters as a scalar with its weight recorded.
template <typename T>
TryOnLossParts<T> tryon_loss(const Tensor<T>& pred, const Tensor<T>& target, PerceptualExtractor<T>& extractor,
                             double adv_term = 0.0, double lambda_adv = 0.1) {
  TryOnLossParts<T> out;
  auto l1 = nn::l1_loss(pred, target);
  auto perc = perceptual_loss(pred, target, extractor);
  out.l1 = l1.loss;
  out.perceptual = perc.loss;
  out.adv = adv_term;
  out.lambda_adv = lambda_adv;
  out.total = out.l1 + out.perceptual + lambda_adv * adv_term;
  out.d_image = std::move(l1.grad);
  out.d_image += perc.grad;
  return out;
}

}  // namespace vton::synthesis

#endif  // VTON_SYNTHESIS_PERCEPTUAL_HPP
