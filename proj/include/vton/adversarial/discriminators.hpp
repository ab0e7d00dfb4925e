#ifndef VTON_ADVERSARIAL_DISCRIMINATORS_HPP
#define VTON_ADVERSARIAL_DISCRIMINATORS_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "vton/data/types.hpp"
#include "vton/nn/layers.hpp"
#include "vton/tensor.hpp"

namespace vton::adversarial {

enum class AdvMode { psad, patch, binary, none };

inline std::string to_string(AdvMode m) {
  switch (m) {
    case AdvMode::psad: return "psad";
    case AdvMode::patch: return "patch";
    case AdvMode::binary: return "binary";
    case AdvMode::none: return "none";
  }
  throw ConfigError("unknown adversarial mode");
}

inline AdvMode adv_mode_from_string(const std::string& s) {
  if (s == "psad") return AdvMode::psad;
  if (s == "patch") return AdvMode::patch;
  if (s == "binary") return AdvMode::binary;
  if (s == "none") return AdvMode::none;
  throw ConfigError("unknown adversarial mode '" + s + "' (expected psad|patch|binary|none)");
}

struct PsadConfig {
  int in_channels = 3;
  int base_channels = 64;  // widths: base, 2b, 4b, 8b (capped)
  int depth = 6;           // downsampling (= upsampling) blocks; desk profiles shrink this
  int out_channels = data::kNumParseClasses + 1;  // semantic classes + one fake class

  void validate(int h, int w) const {
    if (depth < 2) throw ConfigError("pixel discriminator: depth must be at least 2");
    const int f = 1 << depth;
    if (h % f || w % f)
      throw ConfigError("pixel discriminator: input " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by 2^depth = " + std::to_string(f));
  }
};

// Pixel-level semantic discriminator: a U-Net whose stride-2 conv encoder
// mirrors into a transposed-conv decoder with skip concatenation, ending in
// a 1x1 conv to per-pixel class logits (semantic classes + fake) at the
// input resolution. The binary ablation is this net with 2 output channels.
template <typename T>
class PsadNet : public nn::Module<T> {
 public:
  PsadNet() = default;
  explicit PsadNet(PsadConfig cfg) : cfg_(cfg) {
    int prev = cfg_.in_channels;
    for (int i = 0; i < cfg_.depth; ++i) {
      const int ch = channels(i);
      downs_.emplace_back(prev, ch, 4, 2, nn::Norm::instance, nn::Act::leaky_relu);
      prev = ch;
    }
    for (int j = 0; j < cfg_.depth; ++j) {
      const bool has_skip = j < cfg_.depth - 1;
      const int target = has_skip ? channels(cfg_.depth - 2 - j) : cfg_.base_channels;
      ups_.emplace_back(prev, target, 2, 2);
      fuse_.emplace_back(has_skip ? 2 * target : target, target, 3, 1, nn::Norm::instance, nn::Act::leaky_relu);
      prev = target;
    }
    head_ = nn::Conv2d<T>(prev, cfg_.out_channels, 1, 1);
  }

  const PsadConfig& config() const { return cfg_; }

  void init(Rng& rng) override {
    for (auto& d : downs_) d.init(rng);
    for (auto& u : ups_) u.init(rng);
    for (auto& f : fuse_) f.init(rng);
    head_.init(rng);
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& params,
               std::vector<nn::BufferRef<T>>& buffers) override {
    for (std::size_t i = 0; i < downs_.size(); ++i) downs_[i].collect(prefix + "down" + std::to_string(i) + ".", params, buffers);
    for (std::size_t i = 0; i < ups_.size(); ++i) ups_[i].collect(prefix + "up" + std::to_string(i) + ".", params, buffers);
    for (std::size_t i = 0; i < fuse_.size(); ++i) fuse_[i].collect(prefix + "fuse" + std::to_string(i) + ".", params, buffers);
    head_.collect(prefix + "head.", params, buffers);
  }

  void set_train(bool train) override {
    for (auto& d : downs_) d.set_train(train);
    for (auto& f : fuse_) f.set_train(train);
  }

  // x: [N,3,H,W] -> per-pixel logits [N,out,H,W]
  Tensor<T> forward(const Tensor<T>& x) {
    cfg_.validate(x.dim(2), x.dim(3));
    features_.clear();
    Tensor<T> y = x;
    for (auto& d : downs_) {
      y = d.forward(y);
      features_.push_back(y);
    }
    for (int j = 0; j < cfg_.depth; ++j) {
      y = ups_[j].forward(y);
      if (j < cfg_.depth - 1) y = concat_channels(features_[cfg_.depth - 2 - j], y);
      y = fuse_[j].forward(y);
    }
    return head_.forward(y);
  }

  Tensor<T> backward(const Tensor<T>& dlogits, bool acc = true) {
    Tensor<T> d = head_.backward(dlogits, acc);
    std::vector<Tensor<T>> dskips(cfg_.depth - 1);
    for (int j = cfg_.depth - 1; j >= 0; --j) {
      d = fuse_[j].backward(d, acc);
      if (j < cfg_.depth - 1) {
        const int level = cfg_.depth - 2 - j;
        const int skip_ch = features_[level].dim(1);
        auto parts = split_channels(d, {skip_ch, d.dim(1) - skip_ch});
        dskips[level] = parts[0];
        d = ups_[j].backward(parts[1], acc);
      } else {
        d = ups_[j].backward(d, acc);
      }
    }
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      if (i < cfg_.depth - 1) d += dskips[i];
      d = downs_[i].backward(d, acc);
    }
    return d;
  }

 private:
  int channels(int i) const { return cfg_.base_channels * (1 << std::min(i, 3)); }

  PsadConfig cfg_;
  std::vector<nn::ConvUnit<T>> downs_;
  std::vector<nn::ConvTranspose2d<T>> ups_;
  std::vector<nn::ConvUnit<T>> fuse_;
  nn::Conv2d<T> head_;
  std::vector<Tensor<T>> features_;
};

struct PatchConfig {
  int in_channels = 3;
  int base_channels = 64;
};

// Patch discriminator: three stride-2 k=4 convs, one stride-1 k=4 conv
// (batch norm on all but the first, LeakyReLU 0.2 throughout), then a k=4
// stride-1 conv to a one-channel patch score map.
template <typename T>
class PatchGan : public nn::Module<T> {
 public:
  PatchGan() = default;
  explicit PatchGan(PatchConfig cfg) : cfg_(cfg) {
    const int b = cfg_.base_channels;
    units_.emplace_back(cfg_.in_channels, b, 4, 2, nn::Norm::none, nn::Act::leaky_relu);
    units_.emplace_back(b, 2 * b, 4, 2, nn::Norm::batch, nn::Act::leaky_relu);
    units_.emplace_back(2 * b, 4 * b, 4, 2, nn::Norm::batch, nn::Act::leaky_relu);
    units_.emplace_back(4 * b, 8 * b, 4, 1, nn::Norm::batch, nn::Act::leaky_relu);
    head_ = nn::Conv2d<T>(8 * b, 1, 4, 1);
  }

  const PatchConfig& config() const { return cfg_; }

  void init(Rng& rng) override {
    for (auto& u : units_) u.init(rng);
    head_.init(rng);
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& params,
               std::vector<nn::BufferRef<T>>& buffers) override {
    for (std::size_t i = 0; i < units_.size(); ++i) units_[i].collect(prefix + std::to_string(i) + ".", params, buffers);
    head_.collect(prefix + "head.", params, buffers);
  }

  void set_train(bool train) override {
    for (auto& u : units_) u.set_train(train);
  }

  // x: [N,3,H,W] -> patch scores [N,1,H/8,W/8]
  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& u : units_) y = u.forward(y);
    return head_.forward(y);
  }

  Tensor<T> backward(const Tensor<T>& dscores, bool acc = true) {
    Tensor<T> d = head_.backward(dscores, acc);
    for (auto it = units_.rbegin(); it != units_.rend(); ++it) d = it->backward(d, acc);
    return d;
  }

 private:
  PatchConfig cfg_;
  std::vector<nn::ConvUnit<T>> units_;
  nn::Conv2d<T> head_;
};

}  // namespace vton::adversarial

#endif  // VTON_ADVERSARIAL_DISCRIMINATORS_HPP
