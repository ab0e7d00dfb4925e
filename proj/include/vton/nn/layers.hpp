#ifndef VTON_NN_LAYERS_HPP
#define VTON_NN_LAYERS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vton/tensor.hpp"

namespace vton::nn {

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  void resize(std::vector<int> shape) {
    value = Tensor<T>(shape);
    grad = Tensor<T>(std::move(shape));
  }
};

template <typename T>
struct ParamRef {
  std::string name;
  Param<T>* param;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value;
};

// Base for everything that owns weights. Forward/backward signatures differ
// per layer, so only parameter plumbing is virtual.
template <typename T>
class Module {
 public:
  virtual ~Module() = default;
  virtual void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                       std::vector<BufferRef<T>>& buffers) = 0;
  virtual void set_train(bool) {}
  virtual void init(Rng&) {}

  std::vector<ParamRef<T>> parameters(const std::string& prefix = "") {
    std::vector<ParamRef<T>> p;
    std::vector<BufferRef<T>> b;
    collect(prefix, p, b);
    return p;
  }

  std::vector<BufferRef<T>> named_buffers(const std::string& prefix = "") {
    std::vector<ParamRef<T>> p;
    std::vector<BufferRef<T>> b;
    collect(prefix, p, b);
    return b;
  }

  void zero_grad() {
    for (auto& pr : parameters()) pr.param->grad.zero();
  }
};

namespace detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

}  // namespace detail

struct ConvSpec {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 3;
  int stride = 1;
  // Asymmetric padding (left/right, top/bottom) so k=4 stride-1 layers can
  // preserve spatial size.
  int pad_l = 0, pad_r = 0, pad_t = 0, pad_b = 0;

  static ConvSpec make(int in_ch, int out_ch, int kernel, int stride) {
    ConvSpec s;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    if (kernel % 2 == 1) {
      s.pad_l = s.pad_r = s.pad_t = s.pad_b = kernel / 2;
    } else if (stride == 2) {
      s.pad_l = s.pad_r = s.pad_t = s.pad_b = kernel / 2 - 1;
    } else {
      // Even kernel at stride 1: pad asymmetrically to keep the size.
      s.pad_l = s.pad_t = kernel / 2 - 1;
      s.pad_r = s.pad_b = kernel / 2;
    }
    return s;
  }
};

template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d() = default;
  explicit Conv2d(ConvSpec spec) : spec_(spec) {
    w_.resize({spec_.out_ch, spec_.in_ch, spec_.kernel, spec_.kernel});
    b_.resize({spec_.out_ch});
  }
  Conv2d(int in_ch, int out_ch, int kernel, int stride) : Conv2d(ConvSpec::make(in_ch, out_ch, kernel, stride)) {}

  void init(Rng& rng) override {
    const double fan_in = static_cast<double>(spec_.in_ch) * spec_.kernel * spec_.kernel;
    w_.value.fill_normal(rng, T(0), static_cast<T>(std::sqrt(2.0 / fan_in)));
    b_.value.zero();
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) override {
    (void)buffers;
    params.push_back({prefix + "weight", &w_});
    params.push_back({prefix + "bias", &b_});
  }

  const ConvSpec& spec() const { return spec_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  std::pair<int, int> out_size(int h, int w) const {
    const int oh = (h + spec_.pad_t + spec_.pad_b - spec_.kernel) / spec_.stride + 1;
    const int ow = (w + spec_.pad_l + spec_.pad_r - spec_.kernel) / spec_.stride + 1;
    return {oh, ow};
  }

  Tensor<T> forward(const Tensor<T>& x) {
    check_input(x);
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    auto [oh, ow] = out_size(h, w);
    if (oh <= 0 || ow <= 0)
      throw ShapeError("Conv2d: output collapses to zero for input " + x.shape_str());
    x_ = x;
    Tensor<T> y({n, spec_.out_ch, oh, ow});
    const int ck = spec_.in_ch * spec_.kernel * spec_.kernel;
    detail::MatCM<T> col(ck, oh * ow);
    Eigen::Map<const detail::MatRM<T>> wm(w_.value.data(), spec_.out_ch, ck);
    for (int i = 0; i < n; ++i) {
      im2col(x, i, oh, ow, col);
      Eigen::Map<detail::MatRM<T>> ym(&y.at(i, 0, 0, 0), spec_.out_ch, oh * ow);
      ym.noalias() = wm * col;
      for (int c = 0; c < spec_.out_ch; ++c) ym.row(c).array() += b_.value[c];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate_param_grads = true) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    auto [oh, ow] = out_size(h, w);
    Tensor<T> dx(x_.shape());
    const int ck = spec_.in_ch * spec_.kernel * spec_.kernel;
    detail::MatCM<T> col(ck, oh * ow);
    detail::MatCM<T> dcol(ck, oh * ow);
    Eigen::Map<const detail::MatRM<T>> wm(w_.value.data(), spec_.out_ch, ck);
    Eigen::Map<detail::MatRM<T>> dwm(w_.grad.data(), spec_.out_ch, ck);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const detail::MatRM<T>> dym(&dy.at(i, 0, 0, 0), spec_.out_ch, oh * ow);
      if (accumulate_param_grads) {
        im2col(x_, i, oh, ow, col);
        dwm.noalias() += dym * col.transpose();
        for (int c = 0; c < spec_.out_ch; ++c) b_.grad[c] += static_cast<T>(dym.row(c).sum());
      }
      dcol.noalias() = wm.transpose() * dym;
      col2im(dcol, i, oh, ow, dx);
    }
    return dx;
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.ndim() != 4 || x.dim(1) != spec_.in_ch)
      throw ShapeError("Conv2d: expected NCHW with C=" + std::to_string(spec_.in_ch) + ", got " + x.shape_str());
  }

  void im2col(const Tensor<T>& x, int sample, int oh, int ow, detail::MatCM<T>& col) const {
    const int h = x.dim(2), w = x.dim(3), k = spec_.kernel;
    const T* xp = &x.at(sample, 0, 0, 0);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int j = oy * ow + ox;
        T* cp = col.data() + static_cast<std::size_t>(j) * col.rows();
        const int iy0 = oy * spec_.stride - spec_.pad_t;
        const int ix0 = ox * spec_.stride - spec_.pad_l;
        int r = 0;
        for (int c = 0; c < spec_.in_ch; ++c) {
          const T* xc = xp + static_cast<std::size_t>(c) * h * w;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= h) {
              for (int kx = 0; kx < k; ++kx) cp[r++] = T(0);
              continue;
            }
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ix0 + kx;
              cp[r++] = (ix < 0 || ix >= w) ? T(0) : xc[iy * w + ix];
            }
          }
        }
      }
    }
  }

  void col2im(const detail::MatCM<T>& dcol, int sample, int oh, int ow, Tensor<T>& dx) const {
    const int h = dx.dim(2), w = dx.dim(3), k = spec_.kernel;
    T* xp = &dx.at(sample, 0, 0, 0);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int j = oy * ow + ox;
        const T* cp = dcol.data() + static_cast<std::size_t>(j) * dcol.rows();
        const int iy0 = oy * spec_.stride - spec_.pad_t;
        const int ix0 = ox * spec_.stride - spec_.pad_l;
        int r = 0;
        for (int c = 0; c < spec_.in_ch; ++c) {
          T* xc = xp + static_cast<std::size_t>(c) * h * w;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= h) {
              r += k;
              continue;
            }
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ix0 + kx;
              if (ix >= 0 && ix < w) xc[iy * w + ix] += cp[r];
              ++r;
            }
          }
        }
      }
    }
  }

  ConvSpec spec_;
  Param<T> w_;
  Param<T> b_;
  Tensor<T> x_;
};

// Transposed convolution; weight stored as [in_ch, out_ch, k, k].
template <typename T>
class ConvTranspose2d : public Module<T> {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride) {
    w_.resize({in_ch_, out_ch_, k_, k_});
    b_.resize({out_ch_});
  }

  void init(Rng& rng) override {
    const double fan_in = static_cast<double>(in_ch_) * k_ * k_;
    w_.value.fill_normal(rng, T(0), static_cast<T>(std::sqrt(2.0 / fan_in)));
    b_.value.zero();
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) override {
    (void)buffers;
    params.push_back({prefix + "weight", &w_});
    params.push_back({prefix + "bias", &b_});
  }

  std::pair<int, int> out_size(int h, int w) const { return {(h - 1) * stride_ + k_, (w - 1) * stride_ + k_}; }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 4 || x.dim(1) != in_ch_)
      throw ShapeError("ConvTranspose2d: expected NCHW with C=" + std::to_string(in_ch_) + ", got " + x.shape_str());
    x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    auto [oh, ow] = out_size(h, w);
    Tensor<T> y({n, out_ch_, oh, ow});
    const int ck = out_ch_ * k_ * k_;
    detail::MatCM<T> col(ck, h * w);
    Eigen::Map<const detail::MatRM<T>> wm(w_.value.data(), in_ch_, ck);
    for (int i = 0; i < n; ++i) {
      Eigen::Map<const detail::MatRM<T>> xm(&x.at(i, 0, 0, 0), in_ch_, h * w);
      col.noalias() = wm.transpose() * xm;
      scatter_add(col, i, h, w, y);
      for (int c = 0; c < out_ch_; ++c) {
        T* yp = &y.at(i, c, 0, 0);
        for (int j = 0; j < oh * ow; ++j) yp[j] += b_.value[c];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate_param_grads = true) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    Tensor<T> dx(x_.shape());
    const int ck = out_ch_ * k_ * k_;
    detail::MatCM<T> col(ck, h * w);
    Eigen::Map<const detail::MatRM<T>> wm(w_.value.data(), in_ch_, ck);
    Eigen::Map<detail::MatRM<T>> dwm(w_.grad.data(), in_ch_, ck);
    for (int i = 0; i < n; ++i) {
      gather(dy, i, h, w, col);
      Eigen::Map<detail::MatRM<T>> dxm(&dx.at(i, 0, 0, 0), in_ch_, h * w);
      dxm.noalias() = wm * col;
      if (accumulate_param_grads) {
        Eigen::Map<const detail::MatRM<T>> xm(&x_.at(i, 0, 0, 0), in_ch_, h * w);
        dwm.noalias() += xm * col.transpose();
        const T* dyp = &dy.at(i, 0, 0, 0);
        auto [oh, ow] = out_size(h, w);
        for (int c = 0; c < out_ch_; ++c) {
          double s = 0;
          const T* p = dyp + static_cast<std::size_t>(c) * oh * ow;
          for (int j = 0; j < oh * ow; ++j) s += p[j];
          b_.grad[c] += static_cast<T>(s);
        }
      }
    }
    return dx;
  }

 private:
  // col(row = (co,ky,kx), j = input pixel) holds the contribution of input
  // pixel j to output pixel (y*stride+ky, x*stride+kx).
  void scatter_add(const detail::MatCM<T>& col, int sample, int h, int w, Tensor<T>& y) const {
    auto [oh, ow] = out_size(h, w);
    T* yp = &y.at(sample, 0, 0, 0);
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        const int j = iy * w + ix;
        const T* cp = col.data() + static_cast<std::size_t>(j) * col.rows();
        int r = 0;
        for (int c = 0; c < out_ch_; ++c) {
          T* yc = yp + static_cast<std::size_t>(c) * oh * ow;
          for (int ky = 0; ky < k_; ++ky) {
            const int oy = iy * stride_ + ky;
            for (int kx = 0; kx < k_; ++kx) {
              const int ox = ix * stride_ + kx;
              yc[oy * ow + ox] += cp[r++];
            }
          }
        }
      }
    }
  }

  void gather(const Tensor<T>& dy, int sample, int h, int w, detail::MatCM<T>& col) const {
    auto [oh, ow] = out_size(h, w);
    const T* dyp = &dy.at(sample, 0, 0, 0);
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        const int j = iy * w + ix;
        T* cp = col.data() + static_cast<std::size_t>(j) * col.rows();
        int r = 0;
        for (int c = 0; c < out_ch_; ++c) {
          const T* dc = dyp + static_cast<std::size_t>(c) * oh * ow;
          for (int ky = 0; ky < k_; ++ky) {
            const int oy = iy * stride_ + ky;
            for (int kx = 0; kx < k_; ++kx) {
              const int ox = ix * stride_ + kx;
              cp[r++] = dc[oy * ow + ox];
            }
          }
        }
      }
    }
  }

  int in_ch_ = 0, out_ch_ = 0, k_ = 2, stride_ = 2;
  Param<T> w_;
  Param<T> b_;
  Tensor<T> x_;
};

template <typename T>
class Linear : public Module<T> {
 public:
  Linear() = default;
  Linear(int in_features, int out_features) : in_(in_features), out_(out_features) {
    w_.resize({out_, in_});
    b_.resize({out_});
  }

  void init(Rng& rng) override {
    const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in_)));
    w_.value.fill_uniform(rng, -bound, bound);
    b_.value.zero();
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) override {
    (void)buffers;
    params.push_back({prefix + "weight", &w_});
    params.push_back({prefix + "bias", &b_});
  }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 2 || x.dim(1) != in_) throw ShapeError("Linear: expected [N," + std::to_string(in_) + "]");
    x_ = x;
    const int n = x.dim(0);
    Tensor<T> y({n, out_});
    Eigen::Map<const detail::MatRM<T>> xm(x.data(), n, in_);
    Eigen::Map<const detail::MatRM<T>> wm(w_.value.data(), out_, in_);
    Eigen::Map<detail::MatRM<T>> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out_; ++o) y.at(i, o) += b_.value[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate_param_grads = true) {
    const int n = x_.dim(0);
    Tensor<T> dx(x_.shape());
    Eigen::Map<const detail::MatRM<T>> dym(dy.data(), n, out_);
    Eigen::Map<const detail::MatRM<T>> xm(x_.data(), n, in_);
    Eigen::Map<const detail::MatRM<T>> wm(w_.value.data(), out_, in_);
    Eigen::Map<detail::MatRM<T>> dxm(dx.data(), n, in_);
    dxm.noalias() = dym * wm;
    if (accumulate_param_grads) {
      Eigen::Map<detail::MatRM<T>> dwm(w_.grad.data(), out_, in_);
      dwm.noalias() += dym.transpose() * xm;
      for (int o = 0; o < out_; ++o) b_.grad[o] += static_cast<T>(dym.col(o).sum());
    }
    return dx;
  }

 private:
  int in_ = 0, out_ = 0;
  Param<T> w_;
  Param<T> b_;
  Tensor<T> x_;
};

// 2x2 stride-2 max pooling.
template <typename T>
class MaxPool2d : public Module<T> {
 public:
  void collect(const std::string&, std::vector<ParamRef<T>>&, std::vector<BufferRef<T>>&) override {}

  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 || w % 2) throw ShapeError("MaxPool2d: odd spatial size " + x.shape_str());
    in_shape_ = x.shape();
    const int oh = h / 2, ow = w / 2;
    Tensor<T> y({n, c, oh, ow});
    argmax_.assign(y.numel(), 0);
    std::size_t o = 0;
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const T* xp = &x.at(i, ch, 0, 0);
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const int base = (2 * oy) * w + 2 * ox;
            int best = base;
            T bv = xp[base];
            for (int d = 1; d < 4; ++d) {
              const int idx = base + (d / 2) * w + (d % 2);
              if (xp[idx] > bv) {
                bv = xp[idx];
                best = idx;
              }
            }
            y[o] = bv;
            argmax_[o++] = best;
          }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool = true) {
    Tensor<T> dx(in_shape_);
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const int plane = h * w;
    std::size_t o = 0;
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        T* dxp = dx.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
        const std::size_t cnt = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
        for (std::size_t j = 0; j < cnt; ++j, ++o) dxp[argmax_[o]] += dy[o];
      }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
  std::vector<int> argmax_;
};

enum class Act { relu, leaky_relu, tanh, sigmoid };

template <typename T>
class Activation : public Module<T> {
 public:
  Activation() = default;
  explicit Activation(Act kind, T slope = T(0.2)) : kind_(kind), slope_(slope) {}

  void collect(const std::string&, std::vector<ParamRef<T>>&, std::vector<BufferRef<T>>&) override {}

  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    Tensor<T> y(x.shape());
    switch (kind_) {
      case Act::relu:
        for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        break;
      case Act::leaky_relu:
        for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : slope_ * x[i];
        break;
      case Act::tanh:
        for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
        break;
      case Act::sigmoid:
        for (std::size_t i = 0; i < x.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
        break;
    }
    y_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool = true) {
    Tensor<T> dx(dy.shape());
    switch (kind_) {
      case Act::relu:
        for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = x_[i] > T(0) ? dy[i] : T(0);
        break;
      case Act::leaky_relu:
        for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = x_[i] > T(0) ? dy[i] : slope_ * dy[i];
        break;
      case Act::tanh:
        for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * (T(1) - y_[i] * y_[i]);
        break;
      case Act::sigmoid:
        for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * y_[i] * (T(1) - y_[i]);
        break;
    }
    return dx;
  }

 private:
  Act kind_ = Act::relu;
  T slope_ = T(0.2);
  Tensor<T> x_;
  Tensor<T> y_;
};

template <typename T>
class BatchNorm2d : public Module<T> {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels, T momentum = T(0.1), T eps = T(1e-5))
      : c_(channels), momentum_(momentum), eps_(eps) {
    gamma_.resize({c_});
    beta_.resize({c_});
    gamma_.value.fill(T(1));
    running_mean_ = Tensor<T>({c_});
    running_var_ = Tensor<T>::full({c_}, T(1));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) override {
    params.push_back({prefix + "gamma", &gamma_});
    params.push_back({prefix + "beta", &beta_});
    buffers.push_back({prefix + "running_mean", &running_mean_});
    buffers.push_back({prefix + "running_var", &running_var_});
  }

  void set_train(bool train) override { train_ = train; }

  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != c_) throw ShapeError("BatchNorm2d: channel mismatch");
    const std::size_t m = static_cast<std::size_t>(n) * h * w;
    xhat_ = Tensor<T>(x.shape());
    inv_std_ = Tensor<T>({c_});
    Tensor<T> y(x.shape());
    for (int ch = 0; ch < c_; ++ch) {
      double mean, var;
      if (train_) {
        double s = 0, s2 = 0;
        for (int i = 0; i < n; ++i) {
          const T* xp = &x.at(i, ch, 0, 0);
          for (int j = 0; j < h * w; ++j) {
            s += xp[j];
            s2 += static_cast<double>(xp[j]) * xp[j];
          }
        }
        mean = s / static_cast<double>(m);
        var = s2 / static_cast<double>(m) - mean * mean;
        if (var < 0) var = 0;
        const double unbiased = m > 1 ? var * static_cast<double>(m) / (m - 1) : var;
        running_mean_[ch] = static_cast<T>((1 - momentum_) * running_mean_[ch] + momentum_ * mean);
        running_var_[ch] = static_cast<T>((1 - momentum_) * running_var_[ch] + momentum_ * unbiased);
      } else {
        mean = running_mean_[ch];
        var = running_var_[ch];
      }
      const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
      inv_std_[ch] = istd;
      const T g = gamma_.value[ch], b = beta_.value[ch], mu = static_cast<T>(mean);
      for (int i = 0; i < n; ++i) {
        const T* xp = &x.at(i, ch, 0, 0);
        T* hp = &xhat_.at(i, ch, 0, 0);
        T* yp = &y.at(i, ch, 0, 0);
        for (int j = 0; j < h * w; ++j) {
          hp[j] = (xp[j] - mu) * istd;
          yp[j] = g * hp[j] + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate_param_grads = true) {
    const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const std::size_t m = static_cast<std::size_t>(n) * h * w;
    Tensor<T> dx(dy.shape());
    for (int ch = 0; ch < c_; ++ch) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int i = 0; i < n; ++i) {
        const T* dp = &dy.at(i, ch, 0, 0);
        const T* hp = &xhat_.at(i, ch, 0, 0);
        for (int j = 0; j < h * w; ++j) {
          sum_dy += dp[j];
          sum_dy_xhat += static_cast<double>(dp[j]) * hp[j];
        }
      }
      if (accumulate_param_grads) {
        gamma_.grad[ch] += static_cast<T>(sum_dy_xhat);
        beta_.grad[ch] += static_cast<T>(sum_dy);
      }
      const T g_istd = gamma_.value[ch] * inv_std_[ch];
      if (train_) {
        const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(m));
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(m));
        for (int i = 0; i < n; ++i) {
          const T* dp = &dy.at(i, ch, 0, 0);
          const T* hp = &xhat_.at(i, ch, 0, 0);
          T* xp = &dx.at(i, ch, 0, 0);
          for (int j = 0; j < h * w; ++j) xp[j] = g_istd * (dp[j] - mean_dy - hp[j] * mean_dy_xhat);
        }
      } else {
        for (int i = 0; i < n; ++i) {
          const T* dp = &dy.at(i, ch, 0, 0);
          T* xp = &dx.at(i, ch, 0, 0);
          for (int j = 0; j < h * w; ++j) xp[j] = g_istd * dp[j];
        }
      }
    }
    return dx;
  }

 private:
  int c_ = 0;
  T momentum_ = T(0.1), eps_ = T(1e-5);
  bool train_ = true;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_, inv_std_;
};

// Per-sample, per-channel normalization with learnable affine.
template <typename T>
class InstanceNorm2d : public Module<T> {
 public:
  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int channels, T eps = T(1e-5)) : c_(channels), eps_(eps) {
    gamma_.resize({c_});
    beta_.resize({c_});
    gamma_.value.fill(T(1));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) override {
    (void)buffers;
    params.push_back({prefix + "gamma", &gamma_});
    params.push_back({prefix + "beta", &beta_});
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != c_) throw ShapeError("InstanceNorm2d: channel mismatch");
    const int m = h * w;
    xhat_ = Tensor<T>(x.shape());
    inv_std_ = Tensor<T>({n, c_});
    Tensor<T> y(x.shape());
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c_; ++ch) {
        const T* xp = &x.at(i, ch, 0, 0);
        double s = 0, s2 = 0;
        for (int j = 0; j < m; ++j) {
          s += xp[j];
          s2 += static_cast<double>(xp[j]) * xp[j];
        }
        const double mean = s / m;
        double var = s2 / m - mean * mean;
        if (var < 0) var = 0;
        const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
        inv_std_.at(i, ch) = istd;
        const T g = gamma_.value[ch], b = beta_.value[ch], mu = static_cast<T>(mean);
        T* hp = &xhat_.at(i, ch, 0, 0);
        T* yp = &y.at(i, ch, 0, 0);
        for (int j = 0; j < m; ++j) {
          hp[j] = (xp[j] - mu) * istd;
          yp[j] = g * hp[j] + b;
        }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool accumulate_param_grads = true) {
    const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const int m = h * w;
    Tensor<T> dx(dy.shape());
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c_; ++ch) {
        const T* dp = &dy.at(i, ch, 0, 0);
        const T* hp = &xhat_.at(i, ch, 0, 0);
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int j = 0; j < m; ++j) {
          sum_dy += dp[j];
          sum_dy_xhat += static_cast<double>(dp[j]) * hp[j];
        }
        if (accumulate_param_grads) {
          gamma_.grad[ch] += static_cast<T>(sum_dy_xhat);
          beta_.grad[ch] += static_cast<T>(sum_dy);
        }
        const T g_istd = gamma_.value[ch] * inv_std_.at(i, ch);
        const T mean_dy = static_cast<T>(sum_dy / m);
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / m);
        T* xp = &dx.at(i, ch, 0, 0);
        for (int j = 0; j < m; ++j) xp[j] = g_istd * (dp[j] - mean_dy - hp[j] * mean_dy_xhat);
      }
    return dx;
  }

 private:
  int c_ = 0;
  T eps_ = T(1e-5);
  Param<T> gamma_, beta_;
  Tensor<T> xhat_, inv_std_;
};

// Nearest-neighbor 2x upsampling.
template <typename T>
class Upsample2x : public Module<T> {
 public:
  void collect(const std::string&, std::vector<ParamRef<T>>&, std::vector<BufferRef<T>>&) override {}

  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape();
    Tensor<T> y({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const T* xp = &x.at(i, ch, 0, 0);
        T* yp = &y.at(i, ch, 0, 0);
        for (int yy = 0; yy < 2 * h; ++yy)
          for (int xx = 0; xx < 2 * w; ++xx) yp[yy * 2 * w + xx] = xp[(yy / 2) * w + xx / 2];
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool = true) {
    Tensor<T> dx(in_shape_);
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const T* dp = &dy.at(i, ch, 0, 0);
        T* xp = &dx.at(i, ch, 0, 0);
        for (int yy = 0; yy < 2 * h; ++yy)
          for (int xx = 0; xx < 2 * w; ++xx) xp[(yy / 2) * w + xx / 2] += dp[yy * 2 * w + xx];
      }
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

enum class Norm { none, batch, instance };

// conv -> norm -> activation, the unit every net here is assembled from.
template <typename T>
class ConvUnit : public Module<T> {
 public:
  ConvUnit() = default;
  ConvUnit(ConvSpec spec, Norm norm, Act act, T slope = T(0.2)) : conv_(spec), norm_kind_(norm), act_(act, slope) {
    if (norm == Norm::batch) bn_ = std::make_unique<BatchNorm2d<T>>(spec.out_ch);
    if (norm == Norm::instance) in_ = std::make_unique<InstanceNorm2d<T>>(spec.out_ch);
  }
  ConvUnit(int in_ch, int out_ch, int kernel, int stride, Norm norm, Act act, T slope = T(0.2))
      : ConvUnit(ConvSpec::make(in_ch, out_ch, kernel, stride), norm, act, slope) {}

  void init(Rng& rng) override { conv_.init(rng); }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) override {
    conv_.collect(prefix + "conv.", params, buffers);
    if (bn_) bn_->collect(prefix + "bn.", params, buffers);
    if (in_) in_->collect(prefix + "in.", params, buffers);
  }

  void set_train(bool train) override {
    if (bn_) bn_->set_train(train);
  }

  Conv2d<T>& conv() { return conv_; }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = conv_.forward(x);
    if (bn_) y = bn_->forward(y);
    if (in_) y = in_->forward(y);
    return act_.forward(y);
  }

  Tensor<T> backward(const Tensor<T>& dy, bool acc = true) {
    Tensor<T> d = act_.backward(dy, acc);
    if (in_) d = in_->backward(d, acc);
    if (bn_) d = bn_->backward(d, acc);
    return conv_.backward(d, acc);
  }

 private:
  Conv2d<T> conv_;
  Norm norm_kind_ = Norm::none;
  std::unique_ptr<BatchNorm2d<T>> bn_;
  std::unique_ptr<InstanceNorm2d<T>> in_;
  Activation<T> act_;
};

}  // namespace vton::nn

#endif  // VTON_NN_LAYERS_HPP
