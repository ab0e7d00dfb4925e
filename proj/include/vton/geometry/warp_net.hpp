#ifndef VTON_GEOMETRY_WARP_NET_HPP
#define VTON_GEOMETRY_WARP_NET_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "vton/geometry/tps.hpp"
#include "vton/nn/layers.hpp"
#include "vton/tensor.hpp"

namespace vton::geometry {

struct WarpNetConfig {
  int pose_channels = 18;   // 18 keypoint heatmaps or 27 dense-pose planes
  int base_channels = 64;   // width schedule: base, 2b, 4b, 8b (capped)
  int downs = 4;            // stride-2 k=4 convs per extractor
  bool extra_downsample = false;  // one more stride-2 conv for HD inputs
  int regressor_base = 64;
  int input_h = 256;
  int input_w = 192;

  int person_channels() const { return 3 + pose_channels; }
  int coarse_h() const { return input_h >> (downs + (extra_downsample ? 1 : 0)); }
  int coarse_w() const { return input_w >> (downs + (extra_downsample ? 1 : 0)); }

  void validate() const {
    const int total_downs = downs + (extra_downsample ? 1 : 0) + 2;  // +2 from the regressor
    if (input_h % (1 << total_downs) || input_w % (1 << total_downs))
      throw ConfigError("warp net: input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                        " not divisible by the downsampling chain");
    if (coarse_h() < 1 || coarse_w() < 1) throw ConfigError("warp net: too many downsampling layers for the input");
  }
};

// Stride-2 feature pyramid: `downs` k=4 halving convs, then two k=3 convs,
// all batch-normalized with ReLU.
template <typename T>
class WarpFeatureExtractor : public nn::Module<T> {
 public:
  WarpFeatureExtractor() = default;
  WarpFeatureExtractor(int in_ch, const WarpNetConfig& cfg) {
    int prev = in_ch;
    for (int i = 0; i < cfg.downs; ++i) {
      const int ch = cfg.base_channels * (1 << std::min(i, 3));
      units_.emplace_back(prev, ch, 4, 2, nn::Norm::batch, nn::Act::relu);
      prev = ch;
    }
    if (cfg.extra_downsample) units_.emplace_back(prev, prev, 4, 2, nn::Norm::batch, nn::Act::relu);
    units_.emplace_back(prev, prev, 3, 1, nn::Norm::batch, nn::Act::relu);
    units_.emplace_back(prev, prev, 3, 1, nn::Norm::batch, nn::Act::relu);
    out_channels_ = prev;
  }

  int out_channels() const { return out_channels_; }

  void init(Rng& rng) override {
    for (auto& u : units_) u.init(rng);
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& params,
               std::vector<nn::BufferRef<T>>& buffers) override {
    for (std::size_t i = 0; i < units_.size(); ++i) units_[i].collect(prefix + std::to_string(i) + ".", params, buffers);
  }

  void set_train(bool train) override {
    for (auto& u : units_) u.set_train(train);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& u : units_) y = u.forward(y);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool acc = true) {
    Tensor<T> d = dy;
    for (auto it = units_.rbegin(); it != units_.rend(); ++it) d = it->backward(d, acc);
    return d;
  }

 private:
  std::vector<nn::ConvUnit<T>> units_;
  int out_channels_ = 0;
};

// Dense correlation between two feature maps: output channel k is the
// similarity of source cell k (of `a`) against every cell of `b`. Features
// are L2-normalized per location by default.
template <typename T>
class Correlation {
 public:
  Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& b, bool normalize = true) {
    if (!a.same_shape(b)) throw ShapeError("correlation: feature shapes differ");
    normalize_ = normalize;
    a_ = a;
    b_ = b;
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    const int s = h * w;
    ahat_ = normalize ? normalized(a, anorm_) : a;
    bhat_ = normalize ? normalized(b, bnorm_) : b;
    Tensor<T> corr({n, s, h, w});
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const Mat> am(&ahat_.at(i, 0, 0, 0), c, s);
      Eigen::Map<const Mat> bm(&bhat_.at(i, 0, 0, 0), c, s);
      Eigen::Map<Mat> cm(&corr.at(i, 0, 0, 0), s, s);
      cm.noalias() = am.transpose() * bm;
    }
    return corr;
  }

  void backward(const Tensor<T>& dcorr, Tensor<T>* da, Tensor<T>* db) {
    const int n = a_.dim(0), c = a_.dim(1), h = a_.dim(2), w = a_.dim(3);
    const int s = h * w;
    Tensor<T> dahat(a_.shape());
    Tensor<T> dbhat(b_.shape());
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const Mat> dcm(&dcorr.at(i, 0, 0, 0), s, s);
      Eigen::Map<const Mat> am(&ahat_.at(i, 0, 0, 0), c, s);
      Eigen::Map<const Mat> bm(&bhat_.at(i, 0, 0, 0), c, s);
      Eigen::Map<Mat> dam(&dahat.at(i, 0, 0, 0), c, s);
      Eigen::Map<Mat> dbm(&dbhat.at(i, 0, 0, 0), c, s);
      dam.noalias() = bm * dcm.transpose();
      dbm.noalias() = am * dcm;
    }
    if (da) *da = normalize_ ? normalized_backward(dahat, a_, ahat_, anorm_) : dahat;
    if (db) *db = normalize_ ? normalized_backward(dbhat, b_, bhat_, bnorm_) : dbhat;
  }

 private:
  static Tensor<T> normalized(const Tensor<T>& x, Tensor<T>& norms) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int s = h * w;
    Tensor<T> y(x.shape());
    norms = Tensor<T>({n, h, w});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < s; ++j) {
        double q = 0;
        for (int ch = 0; ch < c; ++ch) {
          const T v = x.at(i, ch, j / w, j % w);
          q += static_cast<double>(v) * v;
        }
        const T nv = static_cast<T>(std::sqrt(q + 1e-12));
        norms.at(i, j / w, j % w) = nv;
        for (int ch = 0; ch < c; ++ch) y.at(i, ch, j / w, j % w) = x.at(i, ch, j / w, j % w) / nv;
      }
    return y;
  }

  static Tensor<T> normalized_backward(const Tensor<T>& dyhat, const Tensor<T>& x, const Tensor<T>& xhat,
                                       const Tensor<T>& norms) {
    (void)x;
    const int n = dyhat.dim(0), c = dyhat.dim(1), h = dyhat.dim(2), w = dyhat.dim(3);
    Tensor<T> dx(dyhat.shape());
    for (int i = 0; i < n; ++i)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          double proj = 0;
          for (int ch = 0; ch < c; ++ch)
            proj += static_cast<double>(dyhat.at(i, ch, y, xx)) * xhat.at(i, ch, y, xx);
          const T nv = norms.at(i, y, xx);
          for (int ch = 0; ch < c; ++ch)
            dx.at(i, ch, y, xx) =
                static_cast<T>((dyhat.at(i, ch, y, xx) - xhat.at(i, ch, y, xx) * static_cast<T>(proj)) / nv);
        }
    return dx;
  }

  bool normalize_ = true;
  Tensor<T> a_, b_, ahat_, bhat_, anorm_, bnorm_;
};

// Garment and person feature extractors, dense correlation, and a conv+FC
// regressor emitting the 50 anchor offsets. A zero-initialized head makes
// the initial prediction the identity warp.
template <typename T>
class WarpNet : public nn::Module<T> {
 public:
  WarpNet() = default;
  explicit WarpNet(WarpNetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    garment_extractor_ = WarpFeatureExtractor<T>(3, cfg_);
    person_extractor_ = WarpFeatureExtractor<T>(cfg_.person_channels(), cfg_);
    const int s = cfg_.coarse_h() * cfg_.coarse_w();
    const int rb = cfg_.regressor_base;
    reg_units_.emplace_back(s, rb, 4, 2, nn::Norm::batch, nn::Act::relu);
    reg_units_.emplace_back(rb, 2 * rb, 4, 2, nn::Norm::batch, nn::Act::relu);
    reg_units_.emplace_back(2 * rb, 2 * rb, 3, 1, nn::Norm::batch, nn::Act::relu);
    reg_units_.emplace_back(2 * rb, 2 * rb, 3, 1, nn::Norm::batch, nn::Act::relu);
    fc_ = nn::Linear<T>(2 * rb * (cfg_.coarse_h() / 4) * (cfg_.coarse_w() / 4), 2 * kTpsAnchors);
  }

  const WarpNetConfig& config() const { return cfg_; }

  void init(Rng& rng) override {
    garment_extractor_.init(rng);
    person_extractor_.init(rng);
    for (auto& u : reg_units_) u.init(rng);
    fc_.init(rng);
    // Zero head: theta starts at the identity warp.
    fc_.weight().value.zero();
    fc_.bias().value.zero();
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef<T>>& params,
               std::vector<nn::BufferRef<T>>& buffers) override {
    garment_extractor_.collect(prefix + "garment.", params, buffers);
    person_extractor_.collect(prefix + "person.", params, buffers);
    for (std::size_t i = 0; i < reg_units_.size(); ++i)
      reg_units_[i].collect(prefix + "regressor." + std::to_string(i) + ".", params, buffers);
    fc_.collect(prefix + "head.", params, buffers);
  }

  void set_train(bool train) override {
    garment_extractor_.set_train(train);
    person_extractor_.set_train(train);
    for (auto& u : reg_units_) u.set_train(train);
  }

  // garment: [N,3,H,W]; person: [N,3+pose,H,W] -> theta [N,2,5,5]
  Tensor<T> forward(const Tensor<T>& garment, const Tensor<T>& person) {
    if (garment.dim(2) != cfg_.input_h || garment.dim(3) != cfg_.input_w)
      throw ShapeError("warp net: configured for " + std::to_string(cfg_.input_h) + "x" +
                       std::to_string(cfg_.input_w) + ", got " + garment.shape_str());
    if (garment.dim(2) != person.dim(2) || garment.dim(3) != person.dim(3))
      throw ShapeError("warp net: garment and person spatial sizes differ");
    Tensor<T> ga = garment_extractor_.forward(garment);
    Tensor<T> pe = person_extractor_.forward(person);
    Tensor<T> corr = correlation_.forward(ga, pe, normalize_features_);
    Tensor<T> y = corr;
    for (auto& u : reg_units_) y = u.forward(y);
    const int n = y.dim(0);
    flat_shape_ = y.shape();
    Tensor<T> theta = fc_.forward(y.reshaped({n, static_cast<int>(y.numel()) / n}));
    return theta.reshaped({n, 2, kTpsLattice, kTpsLattice});
  }

  void backward(const Tensor<T>& dtheta, bool acc = true) {
    const int n = dtheta.dim(0);
    Tensor<T> d = fc_.backward(dtheta.reshaped({n, 2 * kTpsAnchors}), acc);
    d = d.reshaped(flat_shape_);
    for (auto it = reg_units_.rbegin(); it != reg_units_.rend(); ++it) d = it->backward(d, acc);
    Tensor<T> dga, dpe;
    correlation_.backward(d, &dga, &dpe);
    garment_extractor_.backward(dga, acc);
    person_extractor_.backward(dpe, acc);
  }

  void set_normalize_features(bool v) { normalize_features_ = v; }

 private:
  WarpNetConfig cfg_;
  WarpFeatureExtractor<T> garment_extractor_;
  WarpFeatureExtractor<T> person_extractor_;
  Correlation<T> correlation_;
  std::vector<nn::ConvUnit<T>> reg_units_;
  nn::Linear<T> fc_;
  std::vector<int> flat_shape_;
  bool normalize_features_ = true;
};

}  // namespace vton::geometry

#endif  // VTON_GEOMETRY_WARP_NET_HPP
