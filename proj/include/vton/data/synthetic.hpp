#ifndef VTON_DATA_SYNTHETIC_HPP
#define VTON_DATA_SYNTHETIC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vton/data/formats.hpp"
#include "vton/data/raster.hpp"
#include "vton/data/types.hpp"
#include "vton/image.hpp"
#include "vton/tensor.hpp"

namespace vton::data {

struct SyntheticOptions {
  int per_category = 8;
  int height = 64;
  int width = 48;
  std::uint64_t seed = 0;
  double train_fraction = 0.75;
};

namespace synth_detail {

// Template skeleton in normalized [0,1]^2 (x across width, y down height).
inline const std::array<Vec2, kNumKeypoints>& template_skeleton() {
  static const std::array<Vec2, kNumKeypoints> k = {{
      {0.50, 0.115},  // nose
      {0.50, 0.220},  // neck
      {0.36, 0.245},  // right shoulder
      {0.325, 0.385}, // right elbow
      {0.30, 0.52},   // right wrist
      {0.64, 0.245},  // left shoulder
      {0.675, 0.385}, // left elbow
      {0.70, 0.52},   // left wrist
      {0.425, 0.525}, // right hip
      {0.415, 0.715}, // right knee
      {0.41, 0.90},   // right ankle
      {0.575, 0.525}, // left hip
      {0.585, 0.715}, // left knee
      {0.59, 0.90},   // left ankle
      {0.465, 0.095}, // right eye
      {0.535, 0.095}, // left eye
      {0.425, 0.115}, // right ear
      {0.575, 0.115}, // left ear
  }};
  return k;
}

struct GarmentTexture {
  std::array<double, 3> c0, c1, c2, mix;
  double freq_u = 2, freq_v = 3, phase = 0;

  std::array<float, 3> at(double u, double v) const {
    constexpr double two_pi = 6.283185307179586;
    const double s = 0.08 * std::sin(two_pi * (freq_u * u + freq_v * v + phase));
    std::array<float, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const double base = c0[ci] + u * (c1[ci] - c0[ci]) + v * (c2[ci] - c0[ci]);
      rgb[ci] = static_cast<float>(std::clamp(base + s * mix[ci], 0.0, 1.0));
    }
    return rgb;
  }
};

inline GarmentTexture sample_texture(Rng& rng) {
  GarmentTexture t;
  auto color = [&rng] {
    return std::array<double, 3>{rng.uniform(0.15, 0.9), rng.uniform(0.15, 0.9), rng.uniform(0.15, 0.9)};
  };
  t.c0 = color();
  t.c1 = color();
  t.c2 = color();
  t.mix = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
  t.freq_u = static_cast<double>(rng.uniform_int(1, 3));
  t.freq_v = static_cast<double>(rng.uniform_int(1, 3));
  t.phase = rng.uniform(0, 1);
  return t;
}

}  // namespace synth_detail

// Procedurally draws one paired item: an articulated figure with exact parse,
// keypoints and dense pose, plus the same garment flattened into a canonical
// frame. The on-body garment is an affine patch of its flat version, so a
// thin-plate warp can align the two exactly.
inline SampleRecord make_synthetic_record(Category category, int index, const SyntheticOptions& opt, Rng rng) {
  using synth_detail::GarmentTexture;
  const int h = opt.height, w = opt.width;
  SampleRecord rec;
  rec.category = category;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d", category_name(category).c_str(), index);
  rec.item_id = buf;

  // Pose: jittered template, clamped inside the frame.
  const auto& tmpl = synth_detail::template_skeleton();
  const double scale = rng.uniform(0.9, 1.05);
  const double tx = rng.uniform(-0.04, 0.04), ty = rng.uniform(-0.02, 0.02);
  std::array<Vec2, kNumKeypoints> pt{};
  for (int k = 0; k < kNumKeypoints; ++k) {
    const auto ki = static_cast<std::size_t>(k);
    const double jx = rng.uniform(-0.015, 0.015), jy = rng.uniform(-0.015, 0.015);
    double x = (0.5 + tx + scale * (tmpl[ki].x - 0.5) + jx) * w;
    double y = (0.55 + ty + scale * (tmpl[ki].y - 0.55) + jy) * h;
    pt[ki] = {std::clamp(x, 1.0, w - 2.0), std::clamp(y, 1.0, h - 2.0)};
    rec.keypoints[ki] = {static_cast<float>(pt[ki].x), static_cast<float>(pt[ki].y), 1.0f};
  }
  if (index % 3 == 2) rec.keypoints[17].confidence = 0.0f;  // exercise the missing-joint path

  // Parse map, painted back-to-front.
  Tensor<int> parse({h, w});
  const double limb_r = std::max(1.3, 0.045 * h);
  const double head_r = std::max(2.0, 0.075 * h);
  const Vec2 sh_mid = 0.5 * (pt[2] + pt[5]);
  const Vec2 hip_mid = 0.5 * (pt[8] + pt[11]);
  const Vec2 knee_mid = 0.5 * (pt[9] + pt[12]);
  const Vec2 ankle_mid = 0.5 * (pt[10] + pt[13]);

  {  // torso as an affine patch between the widened shoulder and hip lines
    const Vec2 e1 = 1.15 * (pt[5] - pt[2]);
    AffineQuad torso{sh_mid - 0.5 * e1, e1, hip_mid - sh_mid};
    for_each_quad_pixel(h, w, torso, [&](int x, int y, double, double) { parse.at(y, x) = kTorsoSkin; });
  }
  fill_capsule(parse, pt[2], pt[3], limb_r, kRightArm);
  fill_capsule(parse, pt[3], pt[4], limb_r, kRightArm);
  fill_capsule(parse, pt[5], pt[6], limb_r, kLeftArm);
  fill_capsule(parse, pt[6], pt[7], limb_r, kLeftArm);
  fill_capsule(parse, pt[8], pt[9], limb_r, kRightLeg);
  fill_capsule(parse, pt[9], pt[10], limb_r, kRightLeg);
  fill_capsule(parse, pt[11], pt[12], limb_r, kLeftLeg);
  fill_capsule(parse, pt[12], pt[13], limb_r, kLeftLeg);

  // Garment region: one affine patch whose shape depends on the category.
  AffineQuad gq{};
  int gclass = kShirt;
  if (category == Category::upper_body) {
    const Vec2 e1 = 1.25 * (pt[5] - pt[2]);
    gq = {sh_mid - 0.5 * e1, e1, 1.1 * (hip_mid - sh_mid)};
    gclass = kShirt;
  } else if (category == Category::lower_body) {
    if (index % 2 == 0) {
      const Vec2 e1 = 1.6 * (pt[11] - pt[8]);
      gq = {hip_mid - 0.5 * e1, e1, 1.1 * (knee_mid - hip_mid)};
      gclass = kSkirt;
    } else {
      const Vec2 e1 = 1.45 * (pt[11] - pt[8]);
      gq = {hip_mid - 0.5 * e1, e1, 1.0 * (ankle_mid - hip_mid)};
      gclass = kTrousers;
    }
  } else {
    const Vec2 e1 = 1.3 * (pt[5] - pt[2]);
    gq = {sh_mid - 0.5 * e1, e1, 1.15 * (knee_mid - sh_mid)};
    gclass = kDress;
  }
  for_each_quad_pixel(h, w, gq, [&](int x, int y, double, double) { parse.at(y, x) = gclass; });

  // Identity-bearing parts painted last so they stay visible.
  fill_capsule(parse, pt[1], sh_mid, limb_r * 0.9, kNeck);
  const Vec2 head{pt[0].x, pt[0].y};
  fill_disk(parse, {head.x, head.y - 0.55 * head_r}, head_r * 0.95, kHair);
  fill_disk(parse, {head.x, head.y + 0.18 * head_r}, head_r * 0.8, kFace);
  fill_disk(parse, pt[4], limb_r * 1.15, kRightHand);
  fill_disk(parse, pt[7], limb_r * 1.15, kLeftHand);
  fill_capsule(parse, pt[10], {pt[10].x - 0.02 * w, pt[10].y + 0.035 * h}, limb_r * 1.2, kRightShoe);
  fill_capsule(parse, pt[13], {pt[13].x + 0.02 * w, pt[13].y + 0.035 * h}, limb_r * 1.2, kLeftShoe);
  if (index % 4 == 1) fill_disk(parse, {pt[8].x - 0.09 * w, pt[8].y}, limb_r * 1.3, kAccessory);
  rec.parse = parse;

  // Colors.
  const GarmentTexture tex = synth_detail::sample_texture(rng);
  const float skin = static_cast<float>(rng.uniform(0.55, 0.85));
  const std::array<float, 3> skin_rgb = {skin, skin * 0.82f, skin * 0.70f};
  const std::array<float, 3> hair_rgb = {static_cast<float>(rng.uniform(0.05, 0.35)),
                                         static_cast<float>(rng.uniform(0.03, 0.25)),
                                         static_cast<float>(rng.uniform(0.02, 0.2))};
  const std::array<float, 3> bg_rgb = {0.85f, 0.87f, 0.90f};

  rec.model_image = Tensor<float>({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::array<float, 3> rgb = bg_rgb;
      const int cls = parse.at(y, x);
      switch (cls) {
        case kBackground: break;
        case kHair: rgb = hair_rgb; break;
        case kFace: rgb = {skin_rgb[0] * 1.03f, skin_rgb[1] * 1.03f, skin_rgb[2] * 1.03f}; break;
        case kNeck: rgb = {skin_rgb[0] * 0.97f, skin_rgb[1] * 0.97f, skin_rgb[2] * 0.97f}; break;
        case kLeftArm:
        case kRightArm: rgb = skin_rgb; break;
        case kLeftLeg:
        case kRightLeg: rgb = {skin_rgb[0] * 0.92f, skin_rgb[1] * 0.92f, skin_rgb[2] * 0.92f}; break;
        case kTorsoSkin: rgb = {skin_rgb[0] * 0.95f, skin_rgb[1] * 0.95f, skin_rgb[2] * 0.95f}; break;
        case kLeftShoe:
        case kRightShoe: rgb = {0.12f, 0.12f, 0.14f}; break;
        case kLeftHand:
        case kRightHand: rgb = {skin_rgb[0] * 0.98f, skin_rgb[1] * 0.98f, skin_rgb[2] * 0.98f}; break;
        case kAccessory: rgb = {0.85f, 0.68f, 0.15f}; break;
        default: {  // garment classes: texture in the patch's local frame
          double u = 0, v = 0;
          if (gq.invert({x + 0.5, y + 0.5}, u, v)) rgb = tex.at(std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0));
          break;
        }
      }
      for (int c = 0; c < 3; ++c) rec.model_image.at(c, y, x) = rgb[static_cast<std::size_t>(c)];
    }

  // Flat garment: the same texture over a canonical upright patch on black.
  rec.garment_image = Tensor<float>({3, h, w});
  const AffineQuad flat{{0.2 * w, 0.15 * h}, {0.6 * w, 0.0}, {0.0, 0.7 * h}};
  for_each_quad_pixel(h, w, flat, [&](int x, int y, double u, double v) {
    const auto rgb = tex.at(u, v);
    for (int c = 0; c < 3; ++c) rec.garment_image.at(c, y, x) = rgb[static_cast<std::size_t>(c)];
  });

  // Dense pose: part labels derived from the parse, UV as the normalized
  // position inside the body bounding box.
  static const std::array<int, kNumParseClasses> kParseToPart = {0, 24, 23, 1, 15, 16, 7, 8, 1,
                                                                 2, 2, 9, 9, 5, 6, 3, 4, 0};
  rec.densepose_labels = Tensor<int>({h, w});
  rec.densepose_uv = Tensor<float>({2, h, w});
  int bx0 = w, bx1 = 0, by0 = h, by1 = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (parse.at(y, x) != kBackground) {
        bx0 = std::min(bx0, x);
        bx1 = std::max(bx1, x);
        by0 = std::min(by0, y);
        by1 = std::max(by1, y);
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int cls = parse.at(y, x);
      rec.densepose_labels.at(y, x) = kParseToPart[static_cast<std::size_t>(cls)];
      if (cls != kBackground && bx1 > bx0 && by1 > by0) {
        rec.densepose_uv.at(0, y, x) = static_cast<float>(x - bx0) / static_cast<float>(bx1 - bx0);
        rec.densepose_uv.at(1, y, x) = static_cast<float>(y - by0) / static_cast<float>(by1 - by0);
      }
    }

  // Snap images to the 8-bit grid so that a disk round-trip is lossless.
  for (Tensor<float>* img : {&rec.model_image, &rec.garment_image})
    for (std::size_t i = 0; i < img->numel(); ++i)
      (*img)[i] = static_cast<float>(std::lround((*img)[i] * 255.0f)) / 255.0f;
  return rec;
}

// Generates per-category paired items under `root` and writes the manifest.
// Fully deterministic in the seed: same options twice gives identical bytes.
inline Manifest generate_synthetic(const std::string& root, const SyntheticOptions& opt) {
  if (opt.per_category < 1) throw ConfigError("generate_synthetic: per-category count must be >= 1");
  if (opt.height < 32 || opt.width < 24) throw ConfigError("generate_synthetic: resolution too small");
  Rng base(opt.seed);
  Manifest manifest;
  manifest.height = opt.height;
  manifest.width = opt.width;
  const int test_count = std::max(1, opt.per_category - static_cast<int>(std::floor(opt.per_category * opt.train_fraction)));
  const int train_count = std::max(0, opt.per_category - test_count);
  for (std::size_t ci = 0; ci < kCategories.size(); ++ci) {
    const Category cat = kCategories[ci];
    const fs::path cdir = fs::path(root) / category_name(cat);
    for (const char* sub : {"model", "garment", "keypoints", "densepose", "parse"})
      fs::create_directories(cdir / sub);
    for (int i = 0; i < opt.per_category; ++i) {
      Rng rng = base.fork(ci * 1000003ull + static_cast<std::uint64_t>(i));
      SampleRecord rec = make_synthetic_record(cat, i, opt, rng);
      ManifestItem mi{rec.item_id, cat, i < train_count};
      manifest.items.push_back(mi);
      const ItemPaths p = item_paths(root, mi);
      write_ppm(p.model.string(), rec.model_image);
      write_ppm(p.garment.string(), rec.garment_image);
      write_keypoints(p.keypoints.string(), rec.keypoints);
      write_densepose(p.densepose.string(), rec.densepose_labels, rec.densepose_uv);
      write_pgm(p.parse.string(), rec.parse);
    }
  }
  write_manifest((fs::path(root) / "manifest.json").string(), manifest);
  return manifest;
}

}  // namespace vton::data

#endif  // VTON_DATA_SYNTHETIC_HPP
