#ifndef VTON_TENSOR_HPP
#define VTON_TENSOR_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <new>
#include <numeric>
#include <string>
#include <vector>

#include "vton/common.hpp"

namespace vton {

namespace detail {

// 64-byte-aligned storage so vectorized kernels peel loops identically no
// matter what the heap looked like beforehand; keeps training bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(kAlign)); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
  template <typename U>
  bool operator!=(const AlignedAllocator<U>&) const {
    return false;
  }
};

}  // namespace detail

// Dense row-major tensor. Convention for image data is CHW for a single
// sample and NCHW for batches; metric code also uses it as a plain matrix.
template <typename T = float>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (int d : shape_) {
      if (d < 0) throw ShapeError("negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, T(0));
  }

  Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int a) { return data_[static_cast<std::size_t>(a)]; }
  const T& at(int a) const { return data_[static_cast<std::size_t>(a)]; }

  T& at(int a, int b) {
    assert(ndim() == 2);
    return data_[static_cast<std::size_t>(a) * shape_[1] + b];
  }
  const T& at(int a, int b) const { return const_cast<Tensor*>(this)->at(a, b); }

  T& at(int a, int b, int c) {
    assert(ndim() == 3);
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  const T& at(int a, int b, int c) const { return const_cast<Tensor*>(this)->at(a, b, c); }

  T& at(int a, int b, int c, int d) {
    assert(ndim() == 4);
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  const T& at(int a, int b, int c, int d) const { return const_cast<Tensor*>(this)->at(a, b, c, d); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  Tensor reshaped(std::vector<int> shape) const {
    Tensor t = *this;
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    if (n != numel()) throw ShapeError("reshape changes element count");
    t.shape_ = std::move(shape);
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor& operator+=(const Tensor& o) {
    require_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator-=(const Tensor& o) {
    require_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (T& v : data_) v *= s;
    return *this;
  }

  void fill_uniform(Rng& rng, T lo, T hi) {
    for (T& v : data_) v = static_cast<T>(rng.uniform(lo, hi));
  }

  void fill_normal(Rng& rng, T mean, T stddev) {
    for (T& v : data_) v = static_cast<T>(rng.normal(mean, stddev));
  }

  T max_abs() const {
    T m = T(0);
    for (T v : data_) m = std::max(m, static_cast<T>(std::abs(v)));
    return m;
  }

  double sum() const {
    double s = 0;
    for (T v : data_) s += static_cast<double>(v);
    return s;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) t[i] = static_cast<U>(data_[i]);
    return t;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  void require_same(const Tensor& o) const {
    if (!same_shape(o)) throw ShapeError("tensor shape mismatch " + shape_str() + " vs " + o.shape_str());
  }

  std::vector<int> shape_;
  std::vector<T, detail::AlignedAllocator<T>> data_;
};

// Mean absolute difference over all elements.
template <typename T>
double mean_l1(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("mean_l1 shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  if (a.numel() == 0) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return s / static_cast<double>(a.numel());
}

// Concatenates along the channel axis: axis 0 for CHW inputs, axis 1 for
// batched NCHW inputs.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const int nd = parts[0]->ndim();
  if (nd != 3 && nd != 4) throw ShapeError("concat_channels: expects CHW or NCHW");
  const int n = nd == 4 ? parts[0]->dim(0) : 1;
  const int h = parts[0]->dim(nd - 2), w = parts[0]->dim(nd - 1);
  int c_total = 0;
  for (const auto* p : parts) {
    if (p->ndim() != nd || p->dim(nd - 2) != h || p->dim(nd - 1) != w || (nd == 4 && p->dim(0) != n))
      throw ShapeError("concat_channels: shape mismatch");
    c_total += p->dim(nd - 3);
  }
  Tensor<T> out(nd == 4 ? std::vector<int>{n, c_total, h, w} : std::vector<int>{c_total, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::size_t off = static_cast<std::size_t>(i) * c_total * plane;
    for (const auto* p : parts) {
      const std::size_t chunk = static_cast<std::size_t>(p->dim(nd - 3)) * plane;
      std::copy(p->data() + static_cast<std::size_t>(i) * chunk, p->data() + static_cast<std::size_t>(i + 1) * chunk,
                out.data() + off);
      off += chunk;
    }
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  return concat_channels<T>({&a, &b});
}

// Stacks equal-shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  std::vector<int> shape = parts[0]->shape();
  for (const auto* p : parts)
    if (p->shape() != shape) throw ShapeError("stack: shape mismatch");
  std::vector<int> out_shape = {static_cast<int>(parts.size())};
  out_shape.insert(out_shape.end(), shape.begin(), shape.end());
  Tensor<T> out(out_shape);
  const std::size_t chunk = parts[0]->numel();
  for (std::size_t i = 0; i < parts.size(); ++i)
    std::copy(parts[i]->data(), parts[i]->data() + chunk, out.data() + i * chunk);
  return out;
}

// Inverse of concat_channels for gradients: splits dout back per part.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<int>& channel_counts) {
  const int nd = x.ndim();
  if (nd != 3 && nd != 4) throw ShapeError("split_channels: expects CHW or NCHW");
  const int n = nd == 4 ? x.dim(0) : 1;
  const int h = x.dim(nd - 2), w = x.dim(nd - 1);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<Tensor<T>> out;
  out.reserve(channel_counts.size());
  int c_total = 0;
  for (int c : channel_counts) {
    out.emplace_back(nd == 4 ? std::vector<int>{n, c, h, w} : std::vector<int>{c, h, w});
    c_total += c;
  }
  if (c_total != x.dim(nd - 3)) throw ShapeError("split_channels: counts do not cover input");
  for (int i = 0; i < n; ++i) {
    std::size_t off = static_cast<std::size_t>(i) * c_total * plane;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const std::size_t chunk = static_cast<std::size_t>(channel_counts[k]) * plane;
      std::copy(x.data() + off, x.data() + off + chunk, out[k].data() + static_cast<std::size_t>(i) * chunk);
      off += chunk;
    }
  }
  return out;
}

}  // namespace vton

#endif  // VTON_TENSOR_HPP
