#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "vton/data/loader.hpp"
#include "vton/data/representations.hpp"
#include "vton/data/synthetic.hpp"

using namespace vton;
using namespace vton::data;

namespace {

// Brute-force Chebyshev dilation: independent of the separable implementation.
Tensor<std::uint8_t> dilate_bruteforce(const Tensor<std::uint8_t>& m, int r) {
  const int h = m.dim(0), w = m.dim(1);
  Tensor<std::uint8_t> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r) && !v; ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r) && !v; ++xx)
          if (m.at(yy, xx)) v = 1;
      out.at(y, x) = v;
    }
  return out;
}

std::array<Keypoint, kNumKeypoints> no_keypoints() {
  std::array<Keypoint, kNumKeypoints> kps{};
  for (auto& k : kps) k = {0, 0, 0};
  return kps;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(PoseHeatmap, CenterBlockSums121) {
  auto kps = no_keypoints();
  kps[3] = {24, 32, 1.0f};  // center of 64x48
  Tensor<float> hm = pose_heatmap(kps, 64, 48);
  double s3 = 0, total = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 48; ++x) s3 += hm.at(3, y, x);
  total = hm.sum();
  EXPECT_DOUBLE_EQ(s3, 121.0);
  EXPECT_DOUBLE_EQ(total, 121.0);
}

TEST(PoseHeatmap, CornerClipsTo36) {
  auto kps = no_keypoints();
  kps[0] = {0, 0, 0.9f};
  Tensor<float> hm = pose_heatmap(kps, 64, 48);
  double s = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 48; ++x) s += hm.at(0, y, x);
  EXPECT_DOUBLE_EQ(s, 36.0);
}

TEST(PoseHeatmap, AllMissingGivesZeros) {
  Tensor<float> hm = pose_heatmap(no_keypoints(), 32, 24);
  EXPECT_EQ(hm.sum(), 0.0);
}

TEST(PoseHeatmap, BlockMatchesEnumeratedWindow) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto kps = no_keypoints();
    const int h = 40, w = 30;
    const float x = static_cast<float>(rng.uniform(0, w - 1));
    const float y = static_cast<float>(rng.uniform(0, h - 1));
    kps[5] = {x, y, 1.0f};
    Tensor<float> hm = pose_heatmap(kps, h, w);
    const int cx = static_cast<int>(std::lround(x)), cy = static_cast<int>(std::lround(y));
    double s = 0;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const bool inside = std::abs(yy - cy) <= 5 && std::abs(xx - cx) <= 5;
        EXPECT_EQ(hm.at(5, yy, xx), inside ? 1.0f : 0.0f);
        s += hm.at(5, yy, xx);
      }
    EXPECT_GE(s, 36.0);
    EXPECT_LE(s, 121.0);
  }
}

TEST(Densepose, BackgroundAndPartition) {
  Tensor<int> labels({6, 5});
  Tensor<float> uv({2, 6, 5});
  Tensor<float> t = densepose_tensor(labels, uv);
  EXPECT_EQ(t.dim(0), 27);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x) EXPECT_EQ(t.at(0, y, x), 1.0f);

  labels.at(2, 3) = 7;
  t = densepose_tensor(labels, uv);
  double plane7 = 0;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x) plane7 += t.at(7, y, x);
  EXPECT_DOUBLE_EQ(plane7, 1.0);

  Rng rng(31);
  for (std::size_t i = 0; i < labels.numel(); ++i) labels[i] = static_cast<int>(rng.uniform_int(0, 24));
  t = densepose_tensor(labels, uv);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x) {
      double s = 0;
      for (int p = 0; p < 25; ++p) s += t.at(p, y, x);
      EXPECT_DOUBLE_EQ(s, 1.0);
    }

  labels.at(0, 0) = 25;
  EXPECT_THROW(densepose_tensor(labels, uv), DataError);
}

TEST(Dilate, MatchesBruteForce) {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<std::uint8_t> m({25, 19});
    for (std::size_t i = 0; i < m.numel(); ++i) m[i] = rng.uniform() < 0.05 ? 1 : 0;
    const int r = static_cast<int>(rng.uniform_int(0, 6));
    Tensor<std::uint8_t> fast = dilate(m, r);
    Tensor<std::uint8_t> slow = dilate_bruteforce(m, r);
    for (std::size_t i = 0; i < m.numel(); ++i) ASSERT_EQ(fast[i], slow[i]) << "trial " << trial << " r=" << r;
  }
}

TEST(BuildAgnostic, EmptyScopeLeavesImageUntouched) {
  const int h = 32, w = 24;
  Tensor<int> parse({h, w});  // all background: no garment pixels
  Tensor<float> img({3, h, w});
  Rng rng(51);
  img.fill_uniform(rng, 0, 1);
  AgnosticPerson ap = build_agnostic(img, parse, no_keypoints(), Category::upper_body, 5);
  EXPECT_EQ(ap.mask.sum(), 0.0);
  EXPECT_EQ(mean_l1(ap.masked_image, img), 0.0);
  for (std::size_t i = 0; i < parse.numel(); ++i) EXPECT_EQ(ap.masked_parse[i], parse[i]);
}

TEST(BuildAgnostic, SinglePixelGarmentDilatesToBlock) {
  const int h = 40, w = 32;
  Tensor<int> parse({h, w});
  parse.at(20, 15) = kShirt;
  Tensor<float> img = Tensor<float>::full({3, h, w}, 0.3f);
  AgnosticPerson ap = build_agnostic(img, parse, no_keypoints(), Category::upper_body, 5);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool expect = std::abs(y - 20) <= 5 && std::abs(x - 15) <= 5;
      EXPECT_EQ(ap.mask.at(y, x), expect ? 1 : 0);
    }
  EXPECT_EQ(ap.mask.sum(), 121.0);
  EXPECT_EQ(ap.masked_parse.at(20, 15), kBackground);
  EXPECT_FLOAT_EQ(ap.masked_image.at(0, 20, 15), 0.5f);
  EXPECT_FLOAT_EQ(ap.masked_image.at(0, 0, 0), 0.3f);
}

TEST(BuildAgnostic, SetAlgebraOracle) {
  // expected = dilate(garment ∪ limbs) \ non-modifiable, via brute force.
  Rng rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    const int h = 48, w = 36;
    Tensor<int> parse({h, w});
    for (int b = 0; b < 6; ++b) {
      const int cls = static_cast<int>(rng.uniform_int(0, kNumParseClasses - 1));
      fill_disk(parse, {rng.uniform(2, w - 3), rng.uniform(2, h - 3)}, rng.uniform(1, 4), cls);
    }
    auto kps = no_keypoints();
    for (int k = 0; k < kNumKeypoints; ++k)
      kps[static_cast<std::size_t>(k)] = {static_cast<float>(rng.uniform(1, w - 2)),
                                          static_cast<float>(rng.uniform(1, h - 2)),
                                          rng.uniform() < 0.7 ? 1.0f : 0.0f};
    const Category cat = kCategories[static_cast<std::size_t>(trial % 3)];
    const int r = static_cast<int>(rng.uniform_int(1, 5));
    Tensor<float> img({3, h, w});
    img.fill_uniform(rng, 0, 1);

    AgnosticPerson ap = build_agnostic(img, parse, kps, cat, r);

    // Recompute the region with shared capsule drawing but independent set ops.
    Tensor<std::uint8_t> region({h, w});
    for (int gc : garment_classes(cat))
      for (std::size_t i = 0; i < parse.numel(); ++i)
        if (parse[i] == gc) region[i] = 1;
    Tensor<int> limb({h, w});
    const auto& scope = limb_keypoints(cat);
    const double lr = std::max(1.0, h / 32.0);
    for (int k : scope)
      if (keypoint_present(kps[static_cast<std::size_t>(k)]))
        fill_disk(limb, {kps[static_cast<std::size_t>(k)].x, kps[static_cast<std::size_t>(k)].y}, lr, 1);
    for (auto [a, b] : skeleton_edges()) {
      const bool a_in = std::find(scope.begin(), scope.end(), a) != scope.end();
      const bool b_in = std::find(scope.begin(), scope.end(), b) != scope.end();
      if (a_in && b_in && keypoint_present(kps[static_cast<std::size_t>(a)]) &&
          keypoint_present(kps[static_cast<std::size_t>(b)]))
        fill_capsule(limb, {kps[static_cast<std::size_t>(a)].x, kps[static_cast<std::size_t>(a)].y},
                     {kps[static_cast<std::size_t>(b)].x, kps[static_cast<std::size_t>(b)].y}, lr, 1);
    }
    for (std::size_t i = 0; i < region.numel(); ++i)
      if (limb[i]) region[i] = 1;
    Tensor<std::uint8_t> expected = dilate_bruteforce(region, r);
    const auto& keep = non_modifiable_classes();
    for (std::size_t i = 0; i < expected.numel(); ++i)
      if (std::find(keep.begin(), keep.end(), parse[i]) != keep.end()) expected[i] = 0;

    for (std::size_t i = 0; i < expected.numel(); ++i) ASSERT_EQ(ap.mask[i], expected[i]) << "trial " << trial;
  }
}

TEST(BuildAgnostic, FaceNeverMaskedAndMonotoneRadius) {
  Rng rng(71);
  const int h = 40, w = 32;
  Tensor<int> parse({h, w});
  fill_disk(parse, {16, 8}, 5, kFace);
  fill_disk(parse, {16, 22}, 7, kShirt);  // overlapping-ish garment
  Tensor<float> img({3, h, w});
  img.fill_uniform(rng, 0, 1);
  auto kps = no_keypoints();
  kps[1] = {16, 12, 1.0f};
  kps[2] = {10, 13, 1.0f};
  kps[5] = {22, 13, 1.0f};
  AgnosticPerson prev = build_agnostic(img, parse, kps, Category::upper_body, 0);
  for (int r = 1; r <= 8; ++r) {
    AgnosticPerson ap = build_agnostic(img, parse, kps, Category::upper_body, r);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (parse.at(y, x) == kFace) EXPECT_EQ(ap.mask.at(y, x), 0);
        if (prev.mask.at(y, x)) EXPECT_EQ(ap.mask.at(y, x), 1);  // monotone in r
      }
    prev = ap;
  }
}

TEST(Unpair, ShiftByOne) {
  auto p1 = unpair({"a"});
  ASSERT_EQ(p1.size(), 1u);
  EXPECT_EQ(p1[0].first, "a");
  EXPECT_EQ(p1[0].second, "a");

  auto p3 = unpair({"a", "b", "c"});
  ASSERT_EQ(p3.size(), 3u);
  EXPECT_EQ(p3[0], (std::pair<std::string, std::string>{"a", "b"}));
  EXPECT_EQ(p3[1], (std::pair<std::string, std::string>{"b", "c"}));
  EXPECT_EQ(p3[2], (std::pair<std::string, std::string>{"c", "a"}));
}

TEST(Unpair, BijectiveAndFixedPointFree) {
  Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 50));
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    auto pairs = unpair(ids);
    ASSERT_EQ(pairs.size(), ids.size());
    std::set<std::string> garments;
    for (const auto& [m, g] : pairs) {
      EXPECT_NE(m, g);
      garments.insert(g);
    }
    EXPECT_EQ(garments.size(), ids.size());  // bijection onto the same set
  }
}

TEST(ClassWeights, UniformAndRatios) {
  std::array<std::int64_t, kNumParseClasses> counts{};
  counts[0] = 500;
  counts[1] = 500;
  ClassWeights cw = class_weights(counts);
  EXPECT_DOUBLE_EQ(cw.w[0], cw.w[1]);
  EXPECT_DOUBLE_EQ(cw.w[0], 1000.0 / (18.0 * 500.0));
  for (int k = 2; k < kNumParseClasses; ++k) EXPECT_EQ(cw.w[static_cast<std::size_t>(k)], 0.0);

  counts = {};
  counts[0] = 750;
  counts[1] = 250;
  cw = class_weights(counts);
  EXPECT_DOUBLE_EQ(cw.w[1] / cw.w[0], 3.0);

  counts = {};
  counts[4] = 123;
  cw = class_weights(counts);
  EXPECT_GT(cw.w[4], 0.0);
  EXPECT_TRUE(std::isfinite(cw.w[4]));

  // Uniform over all 18 classes -> every weight exactly 1.
  for (auto& c : counts) c = 77;
  cw = class_weights(counts);
  for (double v : cw.w) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(ClassWeights, WeightedCountIdentity) {
  Rng rng(91);
  for (int trial = 0; trial < 10; ++trial) {
    std::array<std::int64_t, kNumParseClasses> counts{};
    std::int64_t total = 0;
    int present = 0;
    for (auto& c : counts)
      if (rng.uniform() < 0.6) {
        c = rng.uniform_int(1, 10000);
        total += c;
        ++present;
      }
    if (total == 0) continue;
    ClassWeights cw = class_weights(counts);
    double weighted = 0;
    for (int k = 0; k < kNumParseClasses; ++k) weighted += static_cast<double>(counts[static_cast<std::size_t>(k)]) * cw.w[static_cast<std::size_t>(k)];
    EXPECT_NEAR(weighted, static_cast<double>(total) * present / 18.0, 1e-6 * static_cast<double>(total));
  }
}

TEST(Synthetic, DeterministicAcrossRuns) {
  namespace fs = std::filesystem;
  const fs::path root1 = fs::path(testing::TempDir()) / "synth_a";
  const fs::path root2 = fs::path(testing::TempDir()) / "synth_b";
  fs::remove_all(root1);
  fs::remove_all(root2);
  SyntheticOptions opt;
  opt.per_category = 2;
  opt.height = 48;
  opt.width = 36;
  opt.seed = 7;
  generate_synthetic(root1.string(), opt);
  generate_synthetic(root2.string(), opt);
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root1)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root1);
    ASSERT_TRUE(fs::exists(root2 / rel)) << rel;
    EXPECT_EQ(read_file(e.path()), read_file(root2 / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 6 * 5 + 1);  // 2 items x 3 categories x 5 files + manifest
}

TEST(Synthetic, RoundTripIsLossless) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(testing::TempDir()) / "synth_rt";
  const fs::path copy = fs::path(testing::TempDir()) / "synth_rt_copy";
  fs::remove_all(root);
  fs::remove_all(copy);
  SyntheticOptions opt;
  opt.per_category = 2;
  opt.height = 48;
  opt.width = 36;
  opt.seed = 3;
  Manifest m = generate_synthetic(root.string(), opt);
  Dataset ds(root.string());
  ASSERT_EQ(ds.size(), 6u);
  // Re-serialize every loaded record; bytes must match what the generator wrote.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    SampleRecord rec = ds.load(i);
    const ManifestItem& it = ds.item(i);
    const fs::path cdir = copy / category_name(it.category);
    for (const char* sub : {"model", "garment", "keypoints", "densepose", "parse"})
      fs::create_directories(cdir / sub);
    const ItemPaths dst = item_paths(copy, it);
    const ItemPaths src = item_paths(root, it);
    write_ppm(dst.model.string(), rec.model_image);
    write_ppm(dst.garment.string(), rec.garment_image);
    write_keypoints(dst.keypoints.string(), rec.keypoints);
    write_densepose(dst.densepose.string(), rec.densepose_labels, rec.densepose_uv);
    write_pgm(dst.parse.string(), rec.parse);
    EXPECT_EQ(read_file(src.model), read_file(dst.model));
    EXPECT_EQ(read_file(src.garment), read_file(dst.garment));
    EXPECT_EQ(read_file(src.keypoints), read_file(dst.keypoints));
    EXPECT_EQ(read_file(src.densepose), read_file(dst.densepose));
    EXPECT_EQ(read_file(src.parse), read_file(dst.parse));
  }
  (void)m;
}

TEST(Synthetic, RecordsSatisfyInvariants) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(testing::TempDir()) / "synth_inv";
  fs::remove_all(root);
  SyntheticOptions opt;
  opt.per_category = 4;
  opt.height = 64;
  opt.width = 48;
  opt.seed = 11;
  generate_synthetic(root.string(), opt);
  Dataset ds(root.string());
  ASSERT_EQ(ds.size(), 12u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    SampleRecord rec = ds.load(i);
    // Keypoints in bounds when present.
    for (const auto& kp : rec.keypoints)
      if (keypoint_present(kp)) {
        EXPECT_GE(kp.x, 0.0f);
        EXPECT_LT(kp.x, 48.0f);
        EXPECT_GE(kp.y, 0.0f);
        EXPECT_LT(kp.y, 64.0f);
      }
    // Non-background parse pixels must be drawn (differ from the background color).
    int garment_px = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 48; ++x) {
        const int cls = rec.parse.at(y, x);
        if (cls != kBackground) {
          const bool differs = std::abs(rec.model_image.at(0, y, x) - 0.85f) > 0.01f ||
                               std::abs(rec.model_image.at(1, y, x) - 0.87f) > 0.01f ||
                               std::abs(rec.model_image.at(2, y, x) - 0.90f) > 0.01f;
          EXPECT_TRUE(differs) << "undrawn parse pixel at " << y << "," << x;
        }
        for (int gc : garment_classes(rec.category))
          if (cls == gc) ++garment_px;
      }
    EXPECT_GT(garment_px, 50) << "category garment region implausibly small";
    // Flat garment has substantial coverage.
    double flat = 0;
    for (std::size_t j = 0; j < rec.garment_image.numel(); ++j) flat += rec.garment_image[j] > 0 ? 1 : 0;
    EXPECT_GT(flat, 200);
  }
  // Split respects per-category proportions and both splits are nonempty.
  SplitSpec split = ds.split();
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(split.train_per_category[static_cast<std::size_t>(c)], 3);
    EXPECT_EQ(split.test_per_category[static_cast<std::size_t>(c)], 1);
  }
}

TEST(Loader, MissingFileIsRecordLevelError) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(testing::TempDir()) / "synth_err";
  fs::remove_all(root);
  SyntheticOptions opt;
  opt.per_category = 2;
  opt.height = 48;
  opt.width = 36;
  opt.seed = 5;
  generate_synthetic(root.string(), opt);
  Dataset ds(root.string());
  const ManifestItem& victim = ds.item(1);
  fs::remove(item_paths(root, victim).keypoints);
  std::vector<RecordError> errors;
  std::vector<SampleRecord> recs = Dataset(root.string()).load_all(&errors);
  EXPECT_EQ(recs.size(), 5u);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0].item_id, victim.id);
}

TEST(Loader, CorruptParseLabelIsHardError) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(testing::TempDir()) / "synth_hard";
  fs::remove_all(root);
  SyntheticOptions opt;
  opt.per_category = 1;
  opt.height = 48;
  opt.width = 36;
  opt.seed = 9;
  generate_synthetic(root.string(), opt);
  Dataset ds(root.string());
  // Overwrite one parse map with an out-of-range label.
  Tensor<int> bad({48, 36});
  bad.fill(200);
  write_pgm(item_paths(root, ds.item(0)).parse.string(), bad);
  std::vector<RecordError> errors;
  EXPECT_THROW(Dataset(root.string()).load_all(&errors), IntegrityError);
}

TEST(Loader, CategoryFilterAndResize) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(testing::TempDir()) / "synth_filter";
  fs::remove_all(root);
  SyntheticOptions opt;
  opt.per_category = 2;
  opt.height = 64;
  opt.width = 48;
  opt.seed = 13;
  generate_synthetic(root.string(), opt);
  LoadOptions lo;
  lo.category_filter = Category::dresses;
  lo.height = 32;
  lo.width = 24;
  Dataset ds(root.string(), lo);
  ASSERT_EQ(ds.size(), 2u);
  SampleRecord rec = ds.load(0);
  EXPECT_EQ(rec.category, Category::dresses);
  EXPECT_EQ(rec.model_image.dim(1), 32);
  EXPECT_EQ(rec.parse.dim(0), 32);
  EXPECT_EQ(rec.densepose_uv.dim(1), 32);
  for (const auto& kp : rec.keypoints)
    if (keypoint_present(kp)) {
      EXPECT_LT(kp.x, 24.0f);
      EXPECT_LT(kp.y, 32.0f);
    }
}

TEST(ParseOnehot, RoundTripThroughArgmax) {
  Rng rng(23);
  Tensor<int> parse({10, 8});
  for (std::size_t i = 0; i < parse.numel(); ++i) parse[i] = static_cast<int>(rng.uniform_int(0, 17));
  Tensor<float> oh = parse_onehot(parse);
  EXPECT_EQ(oh.dim(0), kNumParseClasses);
  Tensor<int> back = argmax_channels(oh);
  for (std::size_t i = 0; i < parse.numel(); ++i) EXPECT_EQ(back[i], parse[i]);
  // Ties resolve to the lowest index.
  Tensor<float> flat({4, 2, 2});
  flat.fill(0.25f);
  Tensor<int> am = argmax_channels(flat);
  for (std::size_t i = 0; i < am.numel(); ++i) EXPECT_EQ(am[i], 0);
}
