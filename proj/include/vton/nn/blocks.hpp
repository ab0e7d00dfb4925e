#ifndef VTON_NN_BLOCKS_HPP
#define VTON_NN_BLOCKS_HPP

#include "vton/nn/layers.hpp"

namespace vton::nn {

// Two sequences of conv k=3 -> norm -> activation; the standard U-Net block
// used across the segmentation-shaped networks here.
template <typename T>
class DoubleConv : public Module<T> {
 public:
  DoubleConv() = default;
  DoubleConv(int in_ch, int out_ch, Norm norm = Norm::instance, Act act = Act::relu)
      : a_(in_ch, out_ch, 3, 1, norm, act), b_(out_ch, out_ch, 3, 1, norm, act) {}

  void init(Rng& rng) override {
    a_.init(rng);
    b_.init(rng);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<BufferRef<T>>& buffers) override {
    a_.collect(prefix + "0.", params, buffers);
    b_.collect(prefix + "1.", params, buffers);
  }

  void set_train(bool train) override {
    a_.set_train(train);
    b_.set_train(train);
  }

  Tensor<T> forward(const Tensor<T>& x) { return b_.forward(a_.forward(x)); }

  Tensor<T> backward(const Tensor<T>& dy, bool acc = true) { return a_.backward(b_.backward(dy, acc), acc); }

 private:
  ConvUnit<T> a_, b_;
};

}  // namespace vton::nn

#endif  // VTON_NN_BLOCKS_HPP
