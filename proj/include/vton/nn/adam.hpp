#ifndef VTON_NN_ADAM_HPP
#define VTON_NN_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "vton/nn/layers.hpp"
#include "vton/tensor.hpp"

namespace vton::nn {

// Adam with bias correction. Moment buffers are addressable by parameter
// index so checkpoints can persist and restore optimizer state exactly.
template <typename T>
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(std::vector<ParamRef<T>> params, Options opt = {}) : params_(std::move(params)), opt_(opt) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& pr : params_) {
      m_.push_back(Tensor<T>(pr.param->value.shape()));
      v_.push_back(Tensor<T>(pr.param->value.shape()));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      Tensor<T>& w = params_[p].param->value;
      const Tensor<T>& g = params_[p].param->grad;
      Tensor<T>& m = m_[p];
      Tensor<T>& v = v_[p];
      for (std::size_t i = 0; i < w.numel(); ++i) {
        const double gi = g[i];
        m[i] = static_cast<T>(opt_.beta1 * m[i] + (1.0 - opt_.beta1) * gi);
        v[i] = static_cast<T>(opt_.beta2 * v[i] + (1.0 - opt_.beta2) * gi * gi);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= static_cast<T>(opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps));
      }
    }
  }

  void zero_grad() {
    for (auto& pr : params_) pr.param->grad.zero();
  }

  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }
  const Options& options() const { return opt_; }
  void set_lr(double lr) { opt_.lr = lr; }

  std::size_t size() const { return params_.size(); }
  const std::string& param_name(std::size_t i) const { return params_[i].name; }
  Tensor<T>& moment1(std::size_t i) { return m_[i]; }
  Tensor<T>& moment2(std::size_t i) { return v_[i]; }

 private:
  std::vector<ParamRef<T>> params_;
  Options opt_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t t_ = 0;
};

}  // namespace vton::nn

#endif  // VTON_NN_ADAM_HPP
