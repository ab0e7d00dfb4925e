#ifndef VTON_METRICS_SSIM_HPP
#define VTON_METRICS_SSIM_HPP

#include <array>
#include <cmath>
#include <vector>

#include "vton/tensor.hpp"

namespace vton::metrics {

namespace detail {

inline const std::array<double, 11>& ssim_window() {
  static const std::array<double, 11> w = [] {
    std::array<double, 11> g{};
    const double sigma = 1.5;
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5.0;
      g[i] = std::exp(-d * d / (2 * sigma * sigma));
      sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();
  return w;
}

// Valid-mode separable 11x11 Gaussian filter.
inline std::vector<double> ssim_filter(const std::vector<double>& img, int h, int w) {
  const auto& g = ssim_window();
  const int oh = h - 10, ow = w - 10;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < 11; ++k) s += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < 11; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

// Windowed structural similarity over [0,1] images (11x11 Gaussian window,
// sigma 1.5, k1 = 0.01, k2 = 0.03, dynamic range 1), averaged over valid
// windows and channels. Accepts CHW or NCHW.
template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& y) {
  if (!x.same_shape(y)) throw ShapeError("ssim: image shapes differ " + x.shape_str() + " vs " + y.shape_str());
  if (x.ndim() != 3 && x.ndim() != 4) throw ShapeError("ssim: expects CHW or NCHW");
  const int h = x.dim(x.ndim() - 2), w = x.dim(x.ndim() - 1);
  if (h < 11 || w < 11) throw ShapeError("ssim: image smaller than the 11x11 window");
  const int planes = static_cast<int>(x.numel()) / (h * w);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  const std::size_t plane_sz = static_cast<std::size_t>(h) * w;
  std::vector<double> px(plane_sz), py(plane_sz), pxx(plane_sz), pyy(plane_sz), pxy(plane_sz);
  double total = 0;
  std::size_t windows = 0;
  for (int p = 0; p < planes; ++p) {
    const T* xs = x.data() + p * plane_sz;
    const T* ys = y.data() + p * plane_sz;
    for (std::size_t i = 0; i < plane_sz; ++i) {
      const double a = xs[i], b = ys[i];
      px[i] = a;
      py[i] = b;
      pxx[i] = a * a;
      pyy[i] = b * b;
      pxy[i] = a * b;
    }
    const auto mx = detail::ssim_filter(px, h, w);
    const auto my = detail::ssim_filter(py, h, w);
    const auto mxx = detail::ssim_filter(pxx, h, w);
    const auto myy = detail::ssim_filter(pyy, h, w);
    const auto mxy = detail::ssim_filter(pxy, h, w);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double mux = mx[i], muy = my[i];
      const double vx = mxx[i] - mux * mux;
      const double vy = myy[i] - muy * muy;
      const double cxy = mxy[i] - mux * muy;
      total += ((2 * mux * muy + c1) * (2 * cxy + c2)) / ((mux * mux + muy * muy + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace vton::metrics

#endif  // VTON_METRICS_SSIM_HPP
