#ifndef VTON_DATA_REPRESENTATIONS_HPP
#define VTON_DATA_REPRESENTATIONS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vton/data/raster.hpp"
#include "vton/data/types.hpp"
#include "vton/tensor.hpp"

namespace vton::data {

// Skeleton edges over the 18-point layout used when painting limb regions.
inline const std::vector<std::pair<int, int>>& skeleton_edges() {
  static const std::vector<std::pair<int, int>> k = {{1, 2},  {2, 3},  {3, 4},   {1, 5},   {5, 6},
                                                     {6, 7},  {1, 8},  {1, 11},  {8, 9},   {9, 10},
                                                     {11, 12}, {12, 13}, {8, 11}, {0, 1}};
  return k;
}

// One binary 11x11 block per present keypoint, clipped at image borders;
// missing keypoints give an all-zero channel.
inline Tensor<float> pose_heatmap(const std::array<Keypoint, kNumKeypoints>& kps, int h, int w) {
  Tensor<float> out({kNumKeypoints, h, w});
  constexpr int half = 5;
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (!keypoint_present(kps[static_cast<std::size_t>(k)])) continue;
    const int cx = static_cast<int>(std::lround(kps[static_cast<std::size_t>(k)].x));
    const int cy = static_cast<int>(std::lround(kps[static_cast<std::size_t>(k)].y));
    const int y0 = std::max(0, cy - half), y1 = std::min(h - 1, cy + half);
    const int x0 = std::max(0, cx - half), x1 = std::min(w - 1, cx + half);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) out.at(k, y, x) = 1.0f;
  }
  return out;
}

// 25 one-hot part planes + 2 UV planes.
inline Tensor<float> densepose_tensor(const Tensor<int>& labels, const Tensor<float>& uv) {
  const int h = labels.dim(0), w = labels.dim(1);
  if (uv.ndim() != 3 || uv.dim(0) != 2 || uv.dim(1) != h || uv.dim(2) != w)
    throw ShapeError("densepose_tensor: uv must be [2,H,W] matching labels");
  Tensor<float> out({kNumDenseposeParts + 2, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int v = labels.at(y, x);
      if (v < 0 || v >= kNumDenseposeParts)
        throw DataError("densepose label " + std::to_string(v) + " outside [0,24]");
      out.at(v, y, x) = 1.0f;
    }
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(kNumDenseposeParts + c, y, x) = uv.at(c, y, x);
  return out;
}

// One-hot channels for a parse map (network-side encoding of h).
inline Tensor<float> parse_onehot(const Tensor<int>& parse, int num_classes = kNumParseClasses) {
  const int h = parse.dim(0), w = parse.dim(1);
  Tensor<float> out({num_classes, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int v = parse.at(y, x);
      if (v < 0 || v >= num_classes) throw DataError("parse label " + std::to_string(v) + " out of range");
      out.at(v, y, x) = 1.0f;
    }
  return out;
}

// Argmax over channel logits/probabilities; ties resolve to the lowest index.
inline Tensor<int> argmax_channels(const Tensor<float>& planes) {
  const int c = planes.dim(0), h = planes.dim(1), w = planes.dim(2);
  Tensor<int> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int best = 0;
      float bv = planes.at(0, y, x);
      for (int ch = 1; ch < c; ++ch)
        if (planes.at(ch, y, x) > bv) {
          bv = planes.at(ch, y, x);
          best = ch;
        }
      out.at(y, x) = best;
    }
  return out;
}

inline constexpr float kAgnosticFill = 0.5f;

// Radius scales linearly with height from the 256-row baseline of 5 px.
inline int scaled_dilation_radius(int base_radius, int height) {
  return std::max(1, static_cast<int>(std::lround(base_radius * static_cast<double>(height) / 256.0)));
}

// Garment-agnostic person: mask the union of the category's garment parse
// region and its limb region, dilated, but never the identity-bearing
// classes; fill the image with mid-gray and the parse with background.
inline AgnosticPerson build_agnostic(const Tensor<float>& model_image, const Tensor<int>& parse,
                                     const std::array<Keypoint, kNumKeypoints>& keypoints, Category category,
                                     int dilation_radius) {
  const int h = parse.dim(0), w = parse.dim(1);
  Tensor<std::uint8_t> region({h, w});
  for (int gc : garment_classes(category))
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (parse.at(y, x) == gc) region.at(y, x) = 1;

  Tensor<int> limb({h, w});
  const auto& scope = limb_keypoints(category);
  const double radius = std::max(1.0, h / 32.0);
  auto in_scope = [&](int k) { return std::find(scope.begin(), scope.end(), k) != scope.end(); };
  for (int k : scope) {
    const auto& kp = keypoints[static_cast<std::size_t>(k)];
    if (keypoint_present(kp)) fill_disk(limb, {kp.x, kp.y}, radius, 1);
  }
  for (auto [a, b] : skeleton_edges()) {
    if (!in_scope(a) || !in_scope(b)) continue;
    const auto& ka = keypoints[static_cast<std::size_t>(a)];
    const auto& kb = keypoints[static_cast<std::size_t>(b)];
    if (keypoint_present(ka) && keypoint_present(kb)) fill_capsule(limb, {ka.x, ka.y}, {kb.x, kb.y}, radius, 1);
  }
  for (std::size_t i = 0; i < region.numel(); ++i)
    if (limb[i]) region[i] = 1;

  Tensor<std::uint8_t> mask = dilate(region, dilation_radius);
  const auto& keep = non_modifiable_classes();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (std::find(keep.begin(), keep.end(), parse.at(y, x)) != keep.end()) mask.at(y, x) = 0;

  AgnosticPerson out;
  out.mask = mask;
  out.masked_image = model_image;
  out.masked_parse = parse;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(y, x)) {
        for (int c = 0; c < 3; ++c) out.masked_image.at(c, y, x) = kAgnosticFill;
        out.masked_parse.at(y, x) = kBackground;
      }
  return out;
}

// Deterministic unpaired protocol: within a category, model i tries on the
// garment of model i+1 (mod size). Bijective; fixed-point-free for size > 1.
inline std::vector<std::pair<std::string, std::string>> unpair(const std::vector<std::string>& ids) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(ids.size());
  const std::size_t n = ids.size();
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(ids[i], ids[(i + 1) % n]);
  return out;
}

// Inverse pixel-frequency class weights over a training split:
// w_k = total_pixels / (num_classes * count_k); absent classes get 0, so a
// uniformly distributed split gives every class weight 1.
inline ClassWeights class_weights(const std::array<std::int64_t, kNumParseClasses>& pixel_counts) {
  ClassWeights cw;
  std::int64_t total = 0;
  for (auto c : pixel_counts) total += c;
  if (total <= 0) throw DataError("class_weights: empty split");
  for (int k = 0; k < kNumParseClasses; ++k) {
    const std::int64_t c = pixel_counts[static_cast<std::size_t>(k)];
    cw.w[static_cast<std::size_t>(k)] =
        c > 0 ? static_cast<double>(total) / (static_cast<double>(kNumParseClasses) * static_cast<double>(c)) : 0.0;
  }
  return cw;
}

inline std::array<std::int64_t, kNumParseClasses> count_parse_pixels(const std::vector<const Tensor<int>*>& parses) {
  std::array<std::int64_t, kNumParseClasses> counts{};
  for (const Tensor<int>* p : parses)
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const int v = (*p)[i];
      if (v < 0 || v >= kNumParseClasses) throw DataError("parse label " + std::to_string(v) + " out of range");
      ++counts[static_cast<std::size_t>(v)];
    }
  return counts;
}

}  // namespace vton::data

#endif  // VTON_DATA_REPRESENTATIONS_HPP
