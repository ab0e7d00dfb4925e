#ifndef VTON_PIPELINE_INFERENCE_HPP
#define VTON_PIPELINE_INFERENCE_HPP

#include <string>
#include <vector>

#include "vton/pipeline/train.hpp"

namespace vton::pipeline {

// Call-graph probe for inference runs. Hashes identify which parse map fed
// the generator: the prediction must, the dataset's ground truth must not.
struct InferenceTrace {
  std::vector<std::string> steps;
  std::uint64_t input_parse_hash = 0;      // parse the agnostic build consumed
  std::uint64_t predicted_parse_hash = 0;  // parser output
  std::uint64_t generator_parse_hash = 0;  // parse planes handed to the generator
  Tensor<int> predicted_parse;             // [H,W]
  Tensor<float> theta;                     // [1,2,5,5]

  bool generator_used_prediction() const {
    return generator_parse_hash == predicted_parse_hash && !steps.empty();
  }
};

namespace detail {

inline std::uint64_t hash_tensor(const Tensor<int>& t) {
  return fnv1a64(t.data(), t.numel() * sizeof(int));
}
inline std::uint64_t hash_tensor(const Tensor<float>& t) {
  return fnv1a64(t.data(), t.numel() * sizeof(float));
}

inline Tensor<float> to_batch(const Tensor<float>& chw) {
  Tensor<float> out({1, chw.dim(0), chw.dim(1), chw.dim(2)});
  std::copy(chw.data(), chw.data() + chw.numel(), out.data());
  return out;
}

inline Tensor<float> from_batch(const Tensor<float>& nchw) {
  Tensor<float> out({nchw.dim(1), nchw.dim(2), nchw.dim(3)});
  std::copy(nchw.data(), nchw.data() + nchw.numel(), out.data());
  return out;
}

}  // namespace detail

// One full try-on: agnostic build → theta → predicted layout → synthesis.
// The generator's parse conditioning always comes from the parser's own
// prediction, never from `person.parse`.
inline Tensor<float> tryon_once(Pipeline& p, const data::SampleRecord& person, const Tensor<float>& garment,
                                data::Category category, InferenceTrace* trace = nullptr) {
  p.require("warp");
  p.require("parse");
  p.require("tryon");
  const int h = person.height(), w = person.width();
  if (garment.ndim() != 3 || garment.dim(1) != h || garment.dim(2) != w)
    throw ShapeError("tryon_once: garment resolution does not match the person record");

  const int radius = data::scaled_dilation_radius(5, h);
  data::AgnosticPerson ag = data::build_agnostic(person.model_image, person.parse, person.keypoints, category, radius);
  Tensor<float> pose = data::pose_heatmap(person.keypoints, h, w);
  if (trace) trace->steps.push_back("agnostic");

  Tensor<float> garment_b = detail::to_batch(garment);
  Tensor<float> warp_person = detail::to_batch(warp_person_rep(ag.masked_image, pose));
  Tensor<float> theta = p.warp.forward(garment_b, warp_person);
  if (trace) {
    trace->steps.push_back("warp");
    trace->theta = theta;
  }

  Tensor<float> parse_in =
      detail::to_batch(parse_input_rep(ag.masked_image, pose, data::parse_onehot(ag.masked_parse)));
  Tensor<float> logits = p.parse.forward(parse_in);
  Tensor<int> predicted = parsing::argmax_parse(logits);  // [1,H,W]
  Tensor<int> predicted_hw({h, w});
  std::copy(predicted.data(), predicted.data() + predicted.numel(), predicted_hw.data());
  Tensor<float> predicted_onehot = data::parse_onehot(predicted_hw);
  if (trace) {
    trace->steps.push_back("parse");
    trace->predicted_parse = predicted_hw;
    trace->predicted_parse_hash = detail::hash_tensor(predicted_onehot);
    trace->input_parse_hash = detail::hash_tensor(data::parse_onehot(person.parse));
  }

  Tensor<float> rep_chw = tryon_person_rep(pose, ag.masked_image, predicted_onehot);
  Tensor<float> person_rep = detail::to_batch(rep_chw);
  Tensor<float> out = p.tryon.forward(garment_b, person_rep, theta);
  if (trace) {
    trace->steps.push_back("generate");
    // Hash the parse planes sliced back out of the tensor the generator
    // consumed, so the probe observes the actual data path.
    auto parts = split_channels(rep_chw, {p.cfg.tryon.pose_channels, 3, p.cfg.tryon.parse_classes});
    trace->generator_parse_hash = detail::hash_tensor(parts[2]);
  }
  return detail::from_batch(out);
}

// Sequential two-garment try-on: upper first, then the lower garment on the
// pass-1 output. Pass 2 rebuilds the agnostic person from pass 1's
// *predicted* layout; the original annotation never re-enters.
inline Tensor<float> multi_garment(Pipeline& p, const data::SampleRecord& person, const Tensor<float>& upper,
                                   const Tensor<float>& lower, InferenceTrace* trace_pass1 = nullptr,
                                   InferenceTrace* trace_pass2 = nullptr) {
  InferenceTrace local1;
  InferenceTrace* t1 = trace_pass1 ? trace_pass1 : &local1;
  Tensor<float> first = tryon_once(p, person, upper, data::Category::upper_body, t1);

  data::SampleRecord intermediate;
  intermediate.item_id = person.item_id + "+upper";
  intermediate.category = data::Category::lower_body;
  intermediate.model_image = first;
  intermediate.garment_image = lower;
  intermediate.keypoints = person.keypoints;
  intermediate.densepose_labels = person.densepose_labels;
  intermediate.densepose_uv = person.densepose_uv;
  intermediate.parse = t1->predicted_parse;

  Tensor<float> second = tryon_once(p, intermediate, lower, data::Category::lower_body, trace_pass2);
  if (trace_pass2) trace_pass2->steps.insert(trace_pass2->steps.begin(), "pass2_parse_from_pass1_prediction");
  return second;
}

}  // namespace vton::pipeline

#endif  // VTON_PIPELINE_INFERENCE_HPP
