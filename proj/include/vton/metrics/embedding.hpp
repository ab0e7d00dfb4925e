#ifndef VTON_METRICS_EMBEDDING_HPP
#define VTON_METRICS_EMBEDDING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "vton/nn/layers.hpp"
#include "vton/tensor.hpp"

namespace vton::metrics {

// Deterministic seeded convolutional embedding for the distribution metrics.
// Features are channel-wise global averages after a stride-2 conv stack, so
// any input resolution maps to the same dimensionality; the classifier head
// is a linear softmax over the features. The weight hash pins the backend
// identity inside every metric report.
class EmbeddingBackend {
 public:
  explicit EmbeddingBackend(int stages = 4, int base_channels = 8, int classes = 10,
                            std::uint64_t seed = 0xE3BEDDED5EEDULL)
      : classes_(classes) {
    int prev = 3;
    for (int s = 0; s < stages; ++s) {
      const int ch = base_channels * (1 << std::min(s, 3));
      stages_.emplace_back(prev, ch, 3, 2, nn::Norm::none, nn::Act::leaky_relu);
      prev = ch;
    }
    dim_ = prev;
    head_ = nn::Linear<float>(dim_, classes_);
    Rng rng(seed);
    for (auto& st : stages_) st.init(rng);
    head_.init(rng);
    for (auto& st : stages_) st.set_train(false);
  }

  int feature_dim() const { return dim_; }
  int num_classes() const { return classes_; }
  std::string name() const { return "seeded-conv-embed-" + std::to_string(stages_.size()) + "x" + std::to_string(dim_); }

  std::string weight_hash() {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto& p : parameters()) h = fnv1a64(p.param->value.data(), p.param->value.numel() * sizeof(float), h);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  // images: each [3,H,W] in [0,1] -> n x d feature matrix.
  Eigen::MatrixXd embed(const std::vector<Tensor<float>>& images) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), dim_);
    for (std::size_t i = 0; i < images.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = embed_one(images[i]);
    return out;
  }

  // images -> n x K class probability matrix (rows sum to 1).
  Eigen::MatrixXd classify(const std::vector<Tensor<float>>& images) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), classes_);
    for (std::size_t i = 0; i < images.size(); ++i) {
      const Eigen::RowVectorXd f = embed_one(images[i]);
      Tensor<float> x({1, dim_});
      for (int j = 0; j < dim_; ++j) x.at(0, j) = static_cast<float>(f[j]);
      Tensor<float> logits = head_.forward(x);
      double mx = logits[0];
      for (int j = 1; j < classes_; ++j) mx = std::max(mx, static_cast<double>(logits[j]));
      double z = 0;
      for (int j = 0; j < classes_; ++j) z += std::exp(logits[j] - mx);
      for (int j = 0; j < classes_; ++j) out(static_cast<Eigen::Index>(i), j) = std::exp(logits[j] - mx) / z;
    }
    return out;
  }

 private:
  std::vector<nn::ParamRef<float>> parameters() {
    std::vector<nn::ParamRef<float>> params;
    std::vector<nn::BufferRef<float>> buffers;
    for (std::size_t i = 0; i < stages_.size(); ++i) stages_[i].collect(std::to_string(i) + ".", params, buffers);
    head_.collect("head.", params, buffers);
    return params;
  }

  Eigen::RowVectorXd embed_one(const Tensor<float>& image) {
    if (image.ndim() != 3 || image.dim(0) != 3)
      throw ShapeError("embedding backend: expected [3,H,W] image, got " + image.shape_str());
    Tensor<float> y = image.reshaped({1, 3, image.dim(1), image.dim(2)});
    for (auto& st : stages_) y = st.forward(y);
    const int c = y.dim(1), plane = y.dim(2) * y.dim(3);
    Eigen::RowVectorXd f(c);
    for (int ch = 0; ch < c; ++ch) {
      double s = 0;
      const float* p = &y.at(0, ch, 0, 0);
      for (int j = 0; j < plane; ++j) s += p[j];
      f[ch] = s / plane;
    }
    return f;
  }

  int classes_ = 0;
  int dim_ = 0;
  std::vector<nn::ConvUnit<float>> stages_;
  nn::Linear<float> head_;
};

}  // namespace vton::metrics

#endif  // VTON_METRICS_EMBEDDING_HPP
