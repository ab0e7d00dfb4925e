#ifndef VTON_DATA_TYPES_HPP
#define VTON_DATA_TYPES_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vton/common.hpp"
#include "vton/tensor.hpp"

namespace vton::data {

enum class Category { upper_body, lower_body, dresses };

inline const std::array<Category, 3> kCategories = {Category::upper_body, Category::lower_body, Category::dresses};

inline std::string category_name(Category c) {
  switch (c) {
    case Category::upper_body: return "upper_body";
    case Category::lower_body: return "lower_body";
    case Category::dresses: return "dresses";
  }
  throw ConfigError("unknown category");
}

inline Category category_from_name(const std::string& s) {
  if (s == "upper_body") return Category::upper_body;
  if (s == "lower_body") return Category::lower_body;
  if (s == "dresses") return Category::dresses;
  throw ConfigError("unknown category name: " + s);
}

// Semantic parse classes. The palette is fixed for the whole pipeline; parse
// maps on disk store these indices directly.
enum ParseClass : int {
  kBackground = 0,
  kHair = 1,
  kFace = 2,
  kNeck = 3,
  kLeftArm = 4,
  kRightArm = 5,
  kLeftLeg = 6,
  kRightLeg = 7,
  kTorsoSkin = 8,
  kDress = 9,
  kShirt = 10,
  kSkirt = 11,
  kTrousers = 12,
  kLeftShoe = 13,
  kRightShoe = 14,
  kLeftHand = 15,
  kRightHand = 16,
  kAccessory = 17,
};

inline constexpr int kNumParseClasses = 18;
inline constexpr int kNumKeypoints = 18;
inline constexpr int kNumDenseposeParts = 25;

// Classes that must never be painted over by a try-on: identity and
// non-garment accessories (face, hair, hands, feet, carried items).
inline const std::vector<int>& non_modifiable_classes() {
  static const std::vector<int> k = {kHair, kFace, kLeftShoe, kRightShoe, kLeftHand, kRightHand, kAccessory};
  return k;
}

// Parse classes that a garment of the given category replaces.
inline const std::vector<int>& garment_classes(Category c) {
  static const std::vector<int> upper = {kShirt};
  static const std::vector<int> lower = {kSkirt, kTrousers};
  static const std::vector<int> dress = {kDress};
  switch (c) {
    case Category::upper_body: return upper;
    case Category::lower_body: return lower;
    case Category::dresses: return dress;
  }
  throw ConfigError("unknown category");
}

// Keypoint indices (18-point body layout): 0 nose, 1 neck, 2/3/4 right
// shoulder/elbow/wrist, 5/6/7 left shoulder/elbow/wrist, 8/9/10 right
// hip/knee/ankle, 11/12/13 left hip/knee/ankle, 14/15 eyes, 16/17 ears.
inline const std::vector<int>& limb_keypoints(Category c) {
  static const std::vector<int> upper = {1, 2, 3, 4, 5, 6, 7, 8, 11};
  static const std::vector<int> lower = {8, 9, 10, 11, 12, 13};
  static const std::vector<int> dress = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  switch (c) {
    case Category::upper_body: return upper;
    case Category::lower_body: return lower;
    case Category::dresses: return dress;
  }
  throw ConfigError("unknown category");
}

struct Keypoint {
  float x = 0;
  float y = 0;
  float confidence = 0;
};

inline constexpr float kKeypointConfidenceThreshold = 0.1f;

inline bool keypoint_present(const Keypoint& k) { return k.confidence >= kKeypointConfidenceThreshold; }

struct SampleRecord {
  std::string item_id;
  Category category = Category::upper_body;
  Tensor<float> model_image;     // [3,H,W] in [0,1]
  Tensor<float> garment_image;   // [3,H,W] in [0,1]
  std::array<Keypoint, kNumKeypoints> keypoints{};
  Tensor<int> densepose_labels;  // [H,W] in [0,24]
  Tensor<float> densepose_uv;    // [2,H,W] in [0,1]
  Tensor<int> parse;             // [H,W] in [0,17]

  int height() const { return model_image.dim(1); }
  int width() const { return model_image.dim(2); }
};

struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::array<int, 3> train_per_category{};
  std::array<int, 3> test_per_category{};
};

struct ClassWeights {
  std::array<double, kNumParseClasses> w{};

  std::vector<double> as_vector() const { return std::vector<double>(w.begin(), w.end()); }
};

struct AgnosticPerson {
  Tensor<float> masked_image;  // [3,H,W], mask filled with 0.5
  Tensor<int> masked_parse;    // [H,W], mask set to background
  Tensor<uint8_t> mask;        // [H,W] binary
};

// Display colors for parse visualization sheets.
inline const std::vector<std::array<float, 3>>& parse_palette_colors() {
  static const std::vector<std::array<float, 3>> k = {
      {0.00f, 0.00f, 0.00f}, {0.50f, 0.25f, 0.00f}, {1.00f, 0.80f, 0.60f}, {0.95f, 0.70f, 0.55f},
      {0.00f, 0.40f, 0.80f}, {0.00f, 0.60f, 1.00f}, {0.20f, 0.60f, 0.20f}, {0.40f, 0.80f, 0.40f},
      {0.90f, 0.75f, 0.60f}, {0.80f, 0.10f, 0.50f}, {0.90f, 0.20f, 0.20f}, {0.60f, 0.20f, 0.80f},
      {0.25f, 0.25f, 0.70f}, {0.15f, 0.15f, 0.15f}, {0.35f, 0.35f, 0.35f}, {1.00f, 0.85f, 0.70f},
      {0.95f, 0.80f, 0.65f}, {1.00f, 0.85f, 0.00f}};
  return k;
}

}  // namespace vton::data

#endif  // VTON_DATA_TYPES_HPP
