#ifndef VTON_SYNTHESIS_TRYON_NET_HPP
#define VTON_SYNTHESIS_TRYON_NET_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vton/data/types.hpp"
#include "vton/geometry/tps.hpp"
#include "vton/nn/blocks.hpp"
#include "vton/nn/layers.hpp"
#include "vton/tensor.hpp"

namespace vton::synthesis {

struct TryOnConfig {
  int pose_channels = 18;
  int base_channels = 64;  // widths: base, 2b, 4b, 8b (capped at 8b)
  int depth = 4;           // encoder/decoder block pairs per branch; HD adds one
  int parse_classes = data::kNumParseClasses;

  int person_channels() const { return pose_channels + 3 + parse_classes; }

  void validate(int h, int w) const {
    if (depth < 1) throw ConfigError("try-on net: depth must be positive");
    const int f = 1 << depth;
    if (h % f || w % f)
      throw ConfigError("try-on net: input " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by 2^depth = " + std::to_string(f));
  }
};

// One U-Net encoder branch: double-conv blocks with 2x2 max pooling.
// Exposes per-level skip tensors plus the pooled bottom feature map.
template <typename T>
class TryOnEncoder : public nn::Module<T> {
 public:
  TryOnEncoder() = default;
  TryOnEncoder(int in_ch, const TryOnConfig& cfg) : depth_(cfg.depth), base_(cfg.base_channels) {
    int prev = in_ch;
    for (int i = 0; i < depth_; ++i) {
      const int ch = base_ * (1 << std::min(i, 3));
      blocks_.emplace_back(prev, ch);
      pools_.emplace_back();
      prev = ch;
    }
  }

  void init(Rng& rng) override {
    for (auto& b : blocks_) b.init(rng);
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& params,
               std::vector<nn::BufferRef<T>>& buffers) override {
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + std::to_string(i) + ".", params, buffers);
  }

  void set_train(bool train) override {
    for (auto& b : blocks_) b.set_train(train);
  }

  // Returns the bottom features; skips() holds the per-level block outputs.
  Tensor<T> forward(const Tensor<T>& x) {
    skips_.clear();
    Tensor<T> y = x;
    for (int i = 0; i < depth_; ++i) {
      y = blocks_[i].forward(y);
      skips_.push_back(y);
      y = pools_[i].forward(y);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dbottom, const std::vector<Tensor<T>>& dskips, bool acc = true) {
    Tensor<T> d = dbottom;
    for (int i = depth_ - 1; i >= 0; --i) {
      d = pools_[i].backward(d);
      d += dskips[i];
      d = blocks_[i].backward(d, acc);
    }
    return d;
  }

  const std::vector<Tensor<T>>& skips() const { return skips_; }

 private:
  int depth_ = 0;
  int base_ = 0;
  std::vector<nn::DoubleConv<T>> blocks_;
  std::vector<nn::MaxPool2d<T>> pools_;
  std::vector<Tensor<T>> skips_;
};

// Two-branch synthesis U-Net. The garment branch encodes the in-shop garment;
// the person branch encodes pose + masked person + parse one-hot. Every
// garment-side feature map (skips and bottom) is warped by the thin-plate
// transform before the decoder fuses it, so the skip connections carry
// geometrically aligned garment detail instead of an identity mapping.
template <typename T>
class TryOnNet : public nn::Module<T> {
 public:
  TryOnNet() = default;
  explicit TryOnNet(TryOnConfig cfg) : cfg_(cfg) {
    garment_ = TryOnEncoder<T>(3, cfg_);
    person_ = TryOnEncoder<T>(cfg_.person_channels(), cfg_);
    int prev = 2 * channels(cfg_.depth - 1);  // fused bottom
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      const int ch = channels(i);
      ups_.emplace_back(prev, ch, 2, 2);
      dec_.emplace_back(3 * ch, ch);
      prev = ch;
    }
    head_ = nn::Conv2d<T>(prev, 3, 1, 1);
  }

  const TryOnConfig& config() const { return cfg_; }

  void init(Rng& rng) override {
    garment_.init(rng);
    person_.init(rng);
    for (auto& u : ups_) u.init(rng);
    for (auto& b : dec_) b.init(rng);
    head_.init(rng);
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& params,
               std::vector<nn::BufferRef<T>>& buffers) override {
    garment_.collect(prefix + "garment.", params, buffers);
    person_.collect(prefix + "person.", params, buffers);
    for (std::size_t i = 0; i < ups_.size(); ++i) ups_[i].collect(prefix + "up" + std::to_string(i) + ".", params, buffers);
    for (std::size_t i = 0; i < dec_.size(); ++i) dec_[i].collect(prefix + "dec" + std::to_string(i) + ".", params, buffers);
    head_.collect(prefix + "head.", params, buffers);
  }

  void set_train(bool train) override {
    garment_.set_train(train);
    person_.set_train(train);
    for (auto& b : dec_) b.set_train(train);
  }

  // garment: [N,3,H,W]; person: [N,pose+3+classes,H,W]; theta: [N,2,5,5]
  // -> RGB image in [0,1], [N,3,H,W].
  Tensor<T> forward(const Tensor<T>& garment, const Tensor<T>& person, const Tensor<T>& theta) {
    const int h = garment.dim(2), w = garment.dim(3);
    cfg_.validate(h, w);
    if (person.dim(1) != cfg_.person_channels())
      throw ShapeError("try-on net: expected " + std::to_string(cfg_.person_channels()) +
                       " person channels, got " + std::to_string(person.dim(1)));
    if (person.dim(2) != h || person.dim(3) != w) throw ShapeError("try-on net: branch spatial sizes differ");
    if (theta.dim(0) != garment.dim(0)) throw ShapeError("try-on net: theta batch size differs from garment");

    Tensor<T> g_bottom = garment_.forward(garment);
    Tensor<T> p_bottom = person_.forward(person);

    grids_.clear();
    warped_skips_.clear();
    for (int i = 0; i < cfg_.depth; ++i) {
      grids_.push_back(geometry::tps_grid(theta, h >> i, w >> i));
      warped_skips_.push_back(geometry::apply_tps(garment_.skips()[i], grids_.back()));
    }
    grids_.push_back(geometry::tps_grid(theta, h >> cfg_.depth, w >> cfg_.depth));
    warped_bottom_ = geometry::apply_tps(g_bottom, grids_.back());
    g_bottom_ = g_bottom;

    Tensor<T> y = concat_channels(p_bottom, warped_bottom_);
    for (int i = 0; i < cfg_.depth; ++i) {
      const int level = cfg_.depth - 1 - i;
      y = ups_[i].forward(y);
      y = concat_channels<T>({&person_.skips()[level], &warped_skips_[level], &y});
      y = dec_[i].forward(y);
    }
    pre_act_ = head_.forward(y);
    Tensor<T> out(pre_act_.shape());
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] = (std::tanh(pre_act_[k]) + T(1)) / T(2);
    out_ = out;
    return out;
  }

  // dout: gradient w.r.t. the [0,1] output image. Optionally accumulates the
  // gradient w.r.t. theta (summed over every warped level).
  void backward(const Tensor<T>& dout, bool acc = true, Tensor<T>* dtheta = nullptr) {
    Tensor<T> dpre(pre_act_.shape());
    for (std::size_t k = 0; k < dpre.numel(); ++k) {
      const T t = T(2) * out_[k] - T(1);  // tanh(pre)
      dpre[k] = dout[k] * (T(1) - t * t) / T(2);
    }
    Tensor<T> d = head_.backward(dpre, acc);

    if (dtheta) {
      *dtheta = Tensor<T>({out_.dim(0), 2, geometry::kTpsLattice, geometry::kTpsLattice});
    }
    std::vector<Tensor<T>> dp_skips(cfg_.depth), dg_skips(cfg_.depth);
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      const int level = cfg_.depth - 1 - i;
      d = dec_[i].backward(d, acc);
      const int ch = channels(level);
      auto parts = split_channels(d, {ch, ch, d.dim(1) - 2 * ch});
      dp_skips[level] = parts[0];
      warp_backward(parts[1], garment_.skips()[level], grids_[level], &dg_skips[level], dtheta);
      d = ups_[i].backward(parts[2], acc);
    }
    auto parts = split_channels(d, {d.dim(1) / 2, d.dim(1) / 2});
    Tensor<T> dg_bottom;
    warp_backward(parts[1], g_bottom_, grids_[cfg_.depth], &dg_bottom, dtheta);
    person_.backward(parts[0], dp_skips, acc);
    garment_.backward(dg_bottom, dg_skips, acc);
  }

  // Instrumentation for structural probes: the garment branch's per-level
  // feature maps before and after thin-plate warping (latest forward).
  const std::vector<Tensor<T>>& garment_skips() const { return garment_.skips(); }
  const std::vector<Tensor<T>>& warped_garment_skips() const { return warped_skips_; }

 private:
  int channels(int i) const { return cfg_.base_channels * (1 << std::min(i, 3)); }

  void warp_backward(const Tensor<T>& dy, const Tensor<T>& img, const Tensor<T>& grid, Tensor<T>* dimg,
                     Tensor<T>* dtheta) {
    if (dtheta) {
      Tensor<T> dgrid;
      geometry::apply_tps_backward(dy, img, grid, dimg, &dgrid);
      *dtheta += geometry::tps_grid_backward(dgrid);
    } else {
      geometry::apply_tps_backward(dy, img, grid, dimg, static_cast<Tensor<T>*>(nullptr));
    }
  }

  TryOnConfig cfg_;
  TryOnEncoder<T> garment_;
  TryOnEncoder<T> person_;
  std::vector<nn::ConvTranspose2d<T>> ups_;
  std::vector<nn::DoubleConv<T>> dec_;
  nn::Conv2d<T> head_;
  std::vector<Tensor<T>> grids_;
  std::vector<Tensor<T>> warped_skips_;
  Tensor<T> warped_bottom_, g_bottom_, pre_act_, out_;
};

}  // namespace vton::synthesis

#endif  // VTON_SYNTHESIS_TRYON_NET_HPP
