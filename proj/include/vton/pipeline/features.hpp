#ifndef VTON_PIPELINE_FEATURES_HPP
#define VTON_PIPELINE_FEATURES_HPP

#include <string>
#include <vector>

#include "vton/data/loader.hpp"
#include "vton/data/representations.hpp"

namespace vton::pipeline {

// Everything the three training stages need from one record, precomputed
// once. All image planes are CHW floats at the training resolution.
struct PreparedSample {
  std::string id;
  data::Category category = data::Category::upper_body;
  Tensor<float> model_image;           // [3,H,W] ground-truth person
  Tensor<float> garment;               // [3,H,W] in-shop garment
  Tensor<float> pose;                  // [18,H,W] keypoint heatmaps
  Tensor<float> agnostic_image;        // [3,H,W] garment-agnostic person
  Tensor<float> agnostic_parse_onehot; // [18,H,W]
  Tensor<float> parse_onehot;          // [18,H,W] ground-truth layout
  Tensor<float> garment_on_person;     // [3,H,W] model image masked to the garment region
  Tensor<int> parse_labels;            // [H,W]

  int height() const { return model_image.dim(1); }
  int width() const { return model_image.dim(2); }
};

inline PreparedSample prepare_sample(const data::SampleRecord& rec) {
  const int h = rec.height(), w = rec.width();
  PreparedSample s;
  s.id = rec.item_id;
  s.category = rec.category;
  s.model_image = rec.model_image;
  s.garment = rec.garment_image;
  s.pose = data::pose_heatmap(rec.keypoints, h, w);

  const int radius = data::scaled_dilation_radius(5, h);
  data::AgnosticPerson ag = data::build_agnostic(rec.model_image, rec.parse, rec.keypoints, rec.category, radius);
  s.agnostic_image = std::move(ag.masked_image);
  s.agnostic_parse_onehot = data::parse_onehot(ag.masked_parse);
  s.parse_onehot = data::parse_onehot(rec.parse);
  s.parse_labels = rec.parse;

  s.garment_on_person = Tensor<float>({3, h, w});
  const auto& classes = data::garment_classes(rec.category);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int label = rec.parse.at(y, x);
      bool on = false;
      for (int gc : classes) on = on || label == gc;
      if (on)
        for (int c = 0; c < 3; ++c) s.garment_on_person.at(c, y, x) = rec.model_image.at(c, y, x);
    }
  return s;
}

// Channel layouts shared by training and inference; the parse planes come
// from ground truth during training and from the parser's prediction at
// inference time.
inline Tensor<float> warp_person_rep(const Tensor<float>& agnostic_image, const Tensor<float>& pose) {
  return concat_channels<float>({&agnostic_image, &pose});
}

inline Tensor<float> parse_input_rep(const Tensor<float>& agnostic_image, const Tensor<float>& pose,
                                     const Tensor<float>& agnostic_parse_onehot) {
  return concat_channels<float>({&agnostic_image, &pose, &agnostic_parse_onehot});
}

inline Tensor<float> tryon_person_rep(const Tensor<float>& pose, const Tensor<float>& agnostic_image,
                                      const Tensor<float>& parse_onehot) {
  return concat_channels<float>({&pose, &agnostic_image, &parse_onehot});
}

// One training minibatch, stacked NCHW.
struct Batch {
  Tensor<float> garment;            // [N,3,H,W]
  Tensor<float> warp_person;        // [N,21,H,W]
  Tensor<float> parse_input;        // [N,39,H,W]
  Tensor<float> tryon_person;       // [N,39,H,W]
  Tensor<float> target;             // [N,3,H,W] model image
  Tensor<float> garment_on_person;  // [N,3,H,W]
  Tensor<int> labels;               // [N,H,W] parse classes
};

inline Batch make_batch(const std::vector<const PreparedSample*>& samples) {
  if (samples.empty()) throw DataError("make_batch: empty sample list");
  std::vector<Tensor<float>> wp, pi, tp;
  std::vector<const Tensor<float>*> g, t, gop, wpp, pip, tpp;
  wp.reserve(samples.size());
  pi.reserve(samples.size());
  tp.reserve(samples.size());
  for (const auto* s : samples) {
    wp.push_back(warp_person_rep(s->agnostic_image, s->pose));
    pi.push_back(parse_input_rep(s->agnostic_image, s->pose, s->agnostic_parse_onehot));
    tp.push_back(tryon_person_rep(s->pose, s->agnostic_image, s->parse_onehot));
    g.push_back(&s->garment);
    t.push_back(&s->model_image);
    gop.push_back(&s->garment_on_person);
  }
  for (const auto& x : wp) wpp.push_back(&x);
  for (const auto& x : pi) pip.push_back(&x);
  for (const auto& x : tp) tpp.push_back(&x);

  Batch b;
  b.garment = stack(g);
  b.warp_person = stack(wpp);
  b.parse_input = stack(pip);
  b.tryon_person = stack(tpp);
  b.target = stack(t);
  b.garment_on_person = stack(gop);

  const int n = static_cast<int>(samples.size());
  const int h = samples[0]->height(), w = samples[0]->width();
  b.labels = Tensor<int>({n, h, w});
  for (int i = 0; i < n; ++i)
    std::copy(samples[i]->parse_labels.data(), samples[i]->parse_labels.data() + static_cast<std::size_t>(h) * w,
              b.labels.data() + static_cast<std::size_t>(i) * h * w);
  return b;
}

// Loads and prepares the train split, optionally capped for desk-scale runs.
inline std::vector<PreparedSample> prepare_train_split(const data::Dataset& ds, int max_pairs) {
  std::vector<PreparedSample> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.item(i).train) continue;
    out.push_back(prepare_sample(ds.load(i)));
    if (max_pairs > 0 && static_cast<int>(out.size()) >= max_pairs) break;
  }
  if (out.empty()) throw DataError("prepare_train_split: no training records");
  return out;
}

}  // namespace vton::pipeline

#endif  // VTON_PIPELINE_FEATURES_HPP
