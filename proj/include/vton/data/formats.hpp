#ifndef VTON_DATA_FORMATS_HPP
#define VTON_DATA_FORMATS_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vton/data/types.hpp"
#include "vton/image.hpp"
#include "vton/tensor.hpp"

namespace vton::data {

namespace fs = std::filesystem;

// --- keypoints: JSON text, 18 [x, y, confidence] triples -------------------

inline void write_keypoints(const std::string& path, const std::array<Keypoint, kNumKeypoints>& kps) {
  nlohmann::json j;
  j["keypoints"] = nlohmann::json::array();
  for (const auto& k : kps) j["keypoints"].push_back({k.x, k.y, k.confidence});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write keypoints " + path);
  out << j.dump(1) << "\n";
}

inline std::array<Keypoint, kNumKeypoints> read_keypoints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open keypoints " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed keypoints " + path + ": " + e.what());
  }
  if (!j.contains("keypoints") || !j["keypoints"].is_array() || j["keypoints"].size() != kNumKeypoints)
    throw DataError("keypoints " + path + " must hold exactly 18 triples");
  std::array<Keypoint, kNumKeypoints> kps{};
  for (int i = 0; i < kNumKeypoints; ++i) {
    const auto& t = j["keypoints"][static_cast<std::size_t>(i)];
    if (!t.is_array() || t.size() != 3) throw DataError("keypoint " + std::to_string(i) + " in " + path + " malformed");
    kps[static_cast<std::size_t>(i)] = {t[0].get<float>(), t[1].get<float>(), t[2].get<float>()};
  }
  return kps;
}

// --- dense pose: binary, magic "IUV1", i32 h/w, u8 labels, f32 U, f32 V ----

inline void write_densepose(const std::string& path, const Tensor<int>& labels, const Tensor<float>& uv) {
  const int h = labels.dim(0), w = labels.dim(1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dense pose " + path);
  out.write("IUV1", 4);
  const std::int32_t hw[2] = {h, w};
  out.write(reinterpret_cast<const char*>(hw), sizeof(hw));
  std::vector<std::uint8_t> lab(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < lab.size(); ++i) {
    const int v = labels[i];
    if (v < 0 || v >= kNumDenseposeParts) throw DataError("dense-pose label out of range writing " + path);
    lab[i] = static_cast<std::uint8_t>(v);
  }
  out.write(reinterpret_cast<const char*>(lab.data()), static_cast<std::streamsize>(lab.size()));
  out.write(reinterpret_cast<const char*>(uv.data()), static_cast<std::streamsize>(uv.numel() * sizeof(float)));
  if (!out) throw DataError("failed writing dense pose " + path);
}

inline void read_densepose(const std::string& path, Tensor<int>& labels, Tensor<float>& uv) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dense pose " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "IUV1", 4) != 0) throw DataError("bad dense-pose magic in " + path);
  std::int32_t hw[2] = {};
  in.read(reinterpret_cast<char*>(hw), sizeof(hw));
  const int h = hw[0], w = hw[1];
  if (h <= 0 || w <= 0 || h > 1 << 14 || w > 1 << 14) throw DataError("implausible dense-pose size in " + path);
  labels = Tensor<int>({h, w});
  uv = Tensor<float>({2, h, w});
  std::vector<std::uint8_t> lab(static_cast<std::size_t>(h) * w);
  in.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(lab.size()));
  in.read(reinterpret_cast<char*>(uv.data()), static_cast<std::streamsize>(uv.numel() * sizeof(float)));
  if (!in) throw DataError("truncated dense pose " + path);
  for (std::size_t i = 0; i < lab.size(); ++i) {
    if (lab[i] >= kNumDenseposeParts) throw DataError("dense-pose label out of range in " + path);
    labels[i] = lab[i];
  }
}

// --- manifest: JSON pinning ids, categories, and the train/test split ------

struct ManifestItem {
  std::string id;
  Category category = Category::upper_body;
  bool train = true;
};

struct Manifest {
  int height = 0;
  int width = 0;
  std::vector<ManifestItem> items;
};

inline void write_manifest(const std::string& path, const Manifest& m) {
  nlohmann::json j;
  j["resolution"] = {m.height, m.width};
  j["items"] = nlohmann::json::array();
  for (const auto& it : m.items)
    j["items"].push_back(
        {{"id", it.id}, {"category", category_name(it.category)}, {"split", it.train ? "train" : "test"}});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path);
  out << j.dump(1) << "\n";
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path + ": " + e.what());
  }
  Manifest m;
  try {
    m.height = j.at("resolution").at(0).get<int>();
    m.width = j.at("resolution").at(1).get<int>();
    for (const auto& it : j.at("items")) {
      ManifestItem mi;
      mi.id = it.at("id").get<std::string>();
      mi.category = category_from_name(it.at("category").get<std::string>());
      const std::string split = it.at("split").get<std::string>();
      if (split != "train" && split != "test") throw DataError("manifest split must be train|test, got " + split);
      mi.train = split == "train";
      m.items.push_back(mi);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path + " missing fields: " + e.what());
  }
  return m;
}

// Paths of one item's files inside the dataset root.
struct ItemPaths {
  fs::path model, garment, keypoints, densepose, parse;
};

inline ItemPaths item_paths(const fs::path& root, const ManifestItem& it) {
  const fs::path cat = root / category_name(it.category);
  return {cat / "model" / (it.id + ".ppm"), cat / "garment" / (it.id + ".ppm"),
          cat / "keypoints" / (it.id + ".json"), cat / "densepose" / (it.id + ".iuv"),
          cat / "parse" / (it.id + ".pgm")};
}

}  // namespace vton::data

#endif  // VTON_DATA_FORMATS_HPP
