#ifndef VTON_DATA_LOADER_HPP
#define VTON_DATA_LOADER_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vton/data/formats.hpp"
#include "vton/data/representations.hpp"
#include "vton/data/types.hpp"
#include "vton/image.hpp"

namespace vton::data {

struct RecordError {
  std::string item_id;
  std::string message;
};

struct LoadOptions {
  int height = 0;  // 0 = keep native resolution
  int width = 0;
  std::optional<Category> category_filter;
  std::optional<bool> train_filter;  // true = train split only, false = test only
};

// Loads one item, resizing if requested. Throws DataError on any problem.
inline SampleRecord load_record(const fs::path& root, const ManifestItem& it, int out_h, int out_w) {
  const ItemPaths p = item_paths(root, it);
  SampleRecord rec;
  rec.item_id = it.id;
  rec.category = it.category;
  rec.model_image = read_ppm(p.model.string());
  rec.garment_image = read_ppm(p.garment.string());
  rec.keypoints = read_keypoints(p.keypoints.string());
  read_densepose(p.densepose.string(), rec.densepose_labels, rec.densepose_uv);
  rec.parse = read_pgm(p.parse.string());

  const int h = rec.model_image.dim(1), w = rec.model_image.dim(2);
  auto same = [&](int ah, int aw) { return ah == h && aw == w; };
  if (!same(rec.garment_image.dim(1), rec.garment_image.dim(2)) || !same(rec.parse.dim(0), rec.parse.dim(1)) ||
      !same(rec.densepose_labels.dim(0), rec.densepose_labels.dim(1)))
    throw DataError("item " + it.id + ": spatial sizes disagree across files");
  for (std::size_t i = 0; i < rec.parse.numel(); ++i)
    if (rec.parse[i] < 0 || rec.parse[i] >= kNumParseClasses)
      throw IntegrityError("item " + it.id + ": parse label " + std::to_string(rec.parse[i]) + " out of range");
  for (const auto& kp : rec.keypoints)
    if (keypoint_present(kp) && (kp.x < 0 || kp.x >= static_cast<float>(w) || kp.y < 0 || kp.y >= static_cast<float>(h)))
      throw DataError("item " + it.id + ": keypoint outside image bounds");

  if (out_h > 0 && out_w > 0 && (out_h != h || out_w != w)) {
    const float sx = static_cast<float>(out_w) / static_cast<float>(w);
    const float sy = static_cast<float>(out_h) / static_cast<float>(h);
    rec.model_image = resize_bilinear(rec.model_image, out_h, out_w);
    rec.garment_image = resize_bilinear(rec.garment_image, out_h, out_w);
    rec.parse = resize_nearest(rec.parse, out_h, out_w);
    rec.densepose_labels = resize_nearest(rec.densepose_labels, out_h, out_w);
    rec.densepose_uv = resize_bilinear(rec.densepose_uv, out_h, out_w);
    for (auto& kp : rec.keypoints) {
      kp.x = std::min(kp.x * sx, static_cast<float>(out_w) - 1.0f);
      kp.y = std::min(kp.y * sy, static_cast<float>(out_h) - 1.0f);
    }
  }
  return rec;
}

// A dataset bound to a root directory. Records are loaded on demand;
// malformed items are collected per item rather than aborting the run.
class Dataset {
 public:
  Dataset(std::string root, LoadOptions opt = {}) : root_(std::move(root)), opt_(opt) {
    const fs::path mp = fs::path(root_) / "manifest.json";
    if (!fs::exists(mp)) throw DataError("no manifest.json under " + root_);
    manifest_ = read_manifest(mp.string());
    for (const auto& it : manifest_.items) {
      if (opt_.category_filter && it.category != *opt_.category_filter) continue;
      if (opt_.train_filter && it.train != *opt_.train_filter) continue;
      items_.push_back(it);
    }
  }

  std::size_t size() const { return items_.size(); }
  const ManifestItem& item(std::size_t i) const { return items_[i]; }
  const Manifest& manifest() const { return manifest_; }
  const std::string& root() const { return root_; }
  int height() const { return opt_.height > 0 ? opt_.height : manifest_.height; }
  int width() const { return opt_.width > 0 ? opt_.width : manifest_.width; }

  SampleRecord load(std::size_t i) const { return load_record(root_, items_[i], opt_.height, opt_.width); }

  // Loads everything that parses cleanly; problems are accumulated with ids.
  std::vector<SampleRecord> load_all(std::vector<RecordError>* errors = nullptr) const {
    std::vector<SampleRecord> out;
    out.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
      try {
        out.push_back(load(i));
      } catch (const DataError& e) {
        // Missing or unreadable files degrade to per-record errors;
        // IntegrityError (corrupt labels) still propagates.
        if (!errors) throw;
        errors->push_back({items_[i].id, e.what()});
      }
    }
    return out;
  }

  SplitSpec split() const {
    SplitSpec s;
    for (const auto& it : manifest_.items) {
      const auto ci = static_cast<std::size_t>(it.category);
      if (it.train) {
        s.train_ids.push_back(it.id);
        ++s.train_per_category[ci];
      } else {
        s.test_ids.push_back(it.id);
        ++s.test_per_category[ci];
      }
    }
    return s;
  }

  // Test-split ids per category, in manifest order (the unpairing input).
  std::array<std::vector<std::string>, 3> test_ids_by_category() const {
    std::array<std::vector<std::string>, 3> out;
    for (const auto& it : manifest_.items)
      if (!it.train) out[static_cast<std::size_t>(it.category)].push_back(it.id);
    return out;
  }

 private:
  std::string root_;
  LoadOptions opt_;
  Manifest manifest_;
  std::vector<ManifestItem> items_;
};

// Class-frequency weights accumulated over the train split of a dataset.
inline ClassWeights train_class_weights(const Dataset& ds) {
  std::array<std::int64_t, kNumParseClasses> counts{};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.item(i).train) continue;
    SampleRecord rec = ds.load(i);
    for (std::size_t j = 0; j < rec.parse.numel(); ++j) ++counts[static_cast<std::size_t>(rec.parse[j])];
  }
  return class_weights(counts);
}

}  // namespace vton::data

#endif  // VTON_DATA_LOADER_HPP
