#ifndef VTON_NN_OPTIM_HPP
#define VTON_NN_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vton/nn/layers.hpp"

namespace vton::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed set of named parameters. Moments are exposed by name so
// checkpoints can capture and restore the full optimizer state.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::vector<ParamRef<T>> params, AdamOptions opt = {}) : params_(std::move(params)), opt_(opt) {
    m1_.reserve(params_.size());
    m2_.reserve(params_.size());
    for (const auto& p : params_) {
      m1_.emplace_back(p.param->value.shape());
      m2_.emplace_back(p.param->value.shape());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.param->grad.zero();
  }

  void step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<T>& v = params_[i].param->value;
      const Tensor<T>& g = params_[i].param->grad;
      Tensor<T>& m = m1_[i];
      Tensor<T>& s = m2_[i];
      for (std::size_t j = 0; j < v.numel(); ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = opt_.beta1 * static_cast<double>(m[j]) + (1.0 - opt_.beta1) * gj;
        const double sj = opt_.beta2 * static_cast<double>(s[j]) + (1.0 - opt_.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        s[j] = static_cast<T>(sj);
        v[j] -= static_cast<T>(opt_.lr * (mj / bc1) / (std::sqrt(sj / bc2) + opt_.eps));
      }
    }
  }

  std::size_t size() const { return params_.size(); }
  const std::string& name(std::size_t i) const { return params_[i].name; }
  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }
  Tensor<T>& moment1(std::size_t i) { return m1_[i]; }
  Tensor<T>& moment2(std::size_t i) { return m2_[i]; }
  const Tensor<T>& moment1(std::size_t i) const { return m1_[i]; }
  const Tensor<T>& moment2(std::size_t i) const { return m2_[i]; }
  const AdamOptions& options() const { return opt_; }

 private:
  std::vector<ParamRef<T>> params_;
  AdamOptions opt_;
  std::vector<Tensor<T>> m1_, m2_;
  std::int64_t step_count_ = 0;
};

}  // namespace vton::nn

#endif  // VTON_NN_OPTIM_HPP
