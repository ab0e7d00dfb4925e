#ifndef VTON_PARSING_PARSE_NET_HPP
#define VTON_PARSING_PARSE_NET_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "vton/data/types.hpp"
#include "vton/nn/blocks.hpp"
#include "vton/nn/layers.hpp"
#include "vton/nn/losses.hpp"
#include "vton/tensor.hpp"

namespace vton::parsing {

struct ParseNetConfig {
  int pose_channels = 18;   // keypoint heatmaps (18) or dense-pose planes (27)
  int base_channels = 64;   // widths: base, 2b, 4b, 8b (capped at 8b for extra depth)
  int depth = 4;            // encoder/decoder block pairs; HD profiles add one
  int num_classes = data::kNumParseClasses;

  int in_channels() const { return 3 + pose_channels + num_classes; }

  void validate(int h, int w) const {
    if (depth < 1) throw ConfigError("parse net: depth must be positive");
    const int f = 1 << depth;
    if (h % f || w % f)
      throw ConfigError("parse net: input " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by 2^depth = " + std::to_string(f));
  }
};

// Segmentation U-Net: double-conv encoder blocks with 2x2 max pooling,
// transposed-conv upsampling, skip concatenation, and a 1x1 logit head.
template <typename T>
class ParseNet : public nn::Module<T> {
 public:
  ParseNet() = default;
  explicit ParseNet(ParseNetConfig cfg) : cfg_(cfg) {
    int prev = cfg_.in_channels();
    for (int i = 0; i < cfg_.depth; ++i) {
      const int ch = channels(i);
      enc_.emplace_back(prev, ch);
      pools_.emplace_back();
      prev = ch;
    }
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      const int ch = channels(i);
      ups_.emplace_back(prev, ch, 2, 2);
      dec_.emplace_back(2 * ch, ch);
      prev = ch;
    }
    head_ = nn::Conv2d<T>(prev, cfg_.num_classes, 1, 1);
  }

  const ParseNetConfig& config() const { return cfg_; }

  void init(Rng& rng) override {
    for (auto& b : enc_) b.init(rng);
    for (auto& u : ups_) u.init(rng);
    for (auto& b : dec_) b.init(rng);
    head_.init(rng);
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& params,
               std::vector<nn::BufferRef<T>>& buffers) override {
    for (std::size_t i = 0; i < enc_.size(); ++i) enc_[i].collect(prefix + "enc" + std::to_string(i) + ".", params, buffers);
    for (std::size_t i = 0; i < ups_.size(); ++i) ups_[i].collect(prefix + "up" + std::to_string(i) + ".", params, buffers);
    for (std::size_t i = 0; i < dec_.size(); ++i) dec_[i].collect(prefix + "dec" + std::to_string(i) + ".", params, buffers);
    head_.collect(prefix + "head.", params, buffers);
  }

  void set_train(bool train) override {
    for (auto& b : enc_) b.set_train(train);
    for (auto& b : dec_) b.set_train(train);
  }

  // x: [N, 3+pose+classes, H, W] -> logits [N, classes, H, W]
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.dim(1) != cfg_.in_channels())
      throw ShapeError("parse net: expected " + std::to_string(cfg_.in_channels()) + " input channels, got " +
                       std::to_string(x.dim(1)));
    cfg_.validate(x.dim(2), x.dim(3));
    skips_.clear();
    Tensor<T> y = x;
    for (int i = 0; i < cfg_.depth; ++i) {
      y = enc_[i].forward(y);
      skips_.push_back(y);
      y = pools_[i].forward(y);
    }
    for (int i = 0; i < cfg_.depth; ++i) {
      y = ups_[i].forward(y);
      y = concat_channels<T>({&skips_[cfg_.depth - 1 - i], &y});
      y = dec_[i].forward(y);
    }
    return head_.forward(y);
  }

  Tensor<T> backward(const Tensor<T>& dlogits, bool acc = true) {
    Tensor<T> d = head_.backward(dlogits, acc);
    std::vector<Tensor<T>> dskips(cfg_.depth);
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      d = dec_[i].backward(d, acc);
      const int level = cfg_.depth - 1 - i;
      const int skip_ch = skips_[level].dim(1);
      auto parts = split_channels(d, {skip_ch, d.dim(1) - skip_ch});
      dskips[level] = parts[0];
      d = ups_[i].backward(parts[1], acc);
    }
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      d = pools_[i].backward(d);
      d += dskips[i];
      d = enc_[i].backward(d, acc);
    }
    return d;
  }

 private:
  int channels(int i) const { return cfg_.base_channels * (1 << std::min(i, 3)); }

  ParseNetConfig cfg_;
  std::vector<nn::DoubleConv<T>> enc_;
  std::vector<nn::MaxPool2d<T>> pools_;
  std::vector<nn::ConvTranspose2d<T>> ups_;
  std::vector<nn::DoubleConv<T>> dec_;
  nn::Conv2d<T> head_;
  std::vector<Tensor<T>> skips_;
};

// Mean pixel-wise cross-entropy of softmaxed logits against hard labels.
template <typename T>
nn::LossGrad<T> parse_loss(const Tensor<T>& logits, const Tensor<int>& labels) {
  return nn::cross_entropy(logits, labels);
}

template <typename T>
Tensor<int> argmax_parse(const Tensor<T>& logits) {
  const int n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  Tensor<int> out({n, h, w});
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int best = 0;
        T bv = logits.at(i, 0, y, x);
        for (int ch = 1; ch < c; ++ch)
          if (logits.at(i, ch, y, x) > bv) {
            bv = logits.at(i, ch, y, x);
            best = ch;
          }
        out.at(i, y, x) = best;
      }
  return out;
}

template <typename T>
Tensor<T> one_hot_labels(const Tensor<int>& labels, int num_classes = data::kNumParseClasses) {
  const int n = labels.dim(0), h = labels.dim(1), w = labels.dim(2);
  Tensor<T> out({n, num_classes, h, w});
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int v = labels.at(i, y, x);
        if (v < 0 || v >= num_classes)
          throw DataError("parse label " + std::to_string(v) + " out of range [0," + std::to_string(num_classes) + ")");
        out.at(i, v, y, x) = T(1);
      }
  return out;
}

// Per-pixel argmax one-hot; ties break toward the lowest class index.
template <typename T>
Tensor<T> one_hot_parse(const Tensor<T>& logits) {
  return one_hot_labels<T>(argmax_parse(logits), logits.dim(1));
}

inline double pixel_accuracy(const Tensor<int>& predicted, const Tensor<int>& truth) {
  if (!predicted.same_shape(truth)) throw ShapeError("pixel_accuracy: shape mismatch");
  if (predicted.numel() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.numel(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.numel());
}

}  // namespace vton::parsing

#endif  // VTON_PARSING_PARSE_NET_HPP
