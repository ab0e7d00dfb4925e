#ifndef VTON_DATA_RASTER_HPP
#define VTON_DATA_RASTER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "vton/tensor.hpp"

namespace vton::data {

struct Vec2 {
  double x = 0;
  double y = 0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

// Write `value` into every pixel whose center lies within `radius` of the
// segment p0-p1 (a capsule / thick line).
inline void fill_capsule(Tensor<int>& labels, Vec2 p0, Vec2 p1, double radius, int value) {
  const int h = labels.dim(0), w = labels.dim(1);
  const double r2 = radius * radius;
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(p0.y, p1.y) - radius)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(p0.y, p1.y) + radius)));
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(p0.x, p1.x) - radius)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(p0.x, p1.x) + radius)));
  const Vec2 d = p1 - p0;
  const double len2 = dot(d, d);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{x + 0.5, y + 0.5};
      double t = len2 > 0 ? dot(p - p0, d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 q = p0 + t * d;
      if (dot(p - q, p - q) <= r2) labels.at(y, x) = value;
    }
}

inline void fill_disk(Tensor<int>& labels, Vec2 center, double radius, int value) {
  fill_capsule(labels, center, center, radius, value);
}

// An affine patch: o + u*e1 + v*e2 for (u,v) in the unit square. Affine
// patches are what thin-plate warps reproduce exactly, so synthetic garments
// are built from them.
struct AffineQuad {
  Vec2 o, e1, e2;

  // Inverse map from pixel coordinates to (u,v); returns false if degenerate.
  bool invert(Vec2 p, double& u, double& v) const {
    const double det = e1.x * e2.y - e1.y * e2.x;
    if (std::abs(det) < 1e-12) return false;
    const Vec2 d = p - o;
    u = (d.x * e2.y - d.y * e2.x) / det;
    v = (e1.x * d.y - e1.y * d.x) / det;
    return true;
  }
};

// Visit every pixel whose center lies inside the quad; fn(x, y, u, v).
template <typename Fn>
void for_each_quad_pixel(int h, int w, const AffineQuad& q, Fn&& fn) {
  const double xs[4] = {q.o.x, q.o.x + q.e1.x, q.o.x + q.e2.x, q.o.x + q.e1.x + q.e2.x};
  const double ys[4] = {q.o.y, q.o.y + q.e1.y, q.o.y + q.e2.y, q.o.y + q.e1.y + q.e2.y};
  const int y0 = std::max(0, static_cast<int>(std::floor(*std::min_element(ys, ys + 4))));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(*std::max_element(ys, ys + 4))));
  const int x0 = std::max(0, static_cast<int>(std::floor(*std::min_element(xs, xs + 4))));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(*std::max_element(xs, xs + 4))));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double u, v;
      if (q.invert({x + 0.5, y + 0.5}, u, v) && u >= 0 && u <= 1 && v >= 0 && v <= 1) fn(x, y, u, v);
    }
}

// Morphological dilation with a (2r+1)x(2r+1) square structuring element
// (a set pixel turns on everything within Chebyshev distance r). Separable:
// a horizontal then a vertical running-window OR.
inline Tensor<std::uint8_t> dilate(const Tensor<std::uint8_t>& mask, int radius) {
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor<std::uint8_t> tmp(mask.shape());
  Tensor<std::uint8_t> out(mask.shape());
  if (radius <= 0) {
    for (std::size_t i = 0; i < mask.numel(); ++i) out[i] = mask[i] ? 1 : 0;
    return out;
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int d = std::max(0, x - radius); d <= std::min(w - 1, x + radius) && !v; ++d) v = mask.at(y, d) ? 1 : 0;
      tmp.at(y, x) = v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int d = std::max(0, y - radius); d <= std::min(h - 1, y + radius) && !v; ++d) v = tmp.at(d, x) ? 1 : 0;
      out.at(y, x) = v;
    }
  return out;
}

}  // namespace vton::data

#endif  // VTON_DATA_RASTER_HPP
