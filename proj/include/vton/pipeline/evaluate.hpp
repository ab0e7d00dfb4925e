#ifndef VTON_PIPELINE_EVALUATE_HPP
#define VTON_PIPELINE_EVALUATE_HPP

#include <map>
#include <string>
#include <vector>

#include "vton/metrics/report.hpp"
#include "vton/pipeline/inference.hpp"

namespace vton::pipeline {

// Runs the trained bundle over the test split. Paired mode tries each
// garment on its own wearer (ground truth exists, SSIM applies); unpaired
// mode rotates garments within each category and reports distribution
// metrics only.
inline metrics::MetricReport evaluate(Pipeline& p, const data::Dataset& ds, const std::string& mode,
                                      metrics::EmbeddingBackend& backend,
                                      metrics::KidOptions kid_opt = {}) {
  if (mode != "paired" && mode != "unpaired") throw ConfigError("evaluate: mode must be paired or unpaired");
  std::map<std::string, data::SampleRecord> test_records;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!ds.item(i).train) test_records.emplace(ds.item(i).id, ds.load(i));
  if (test_records.empty()) throw DataError("evaluate: empty test split");

  std::vector<metrics::EvalSample> samples;
  if (mode == "paired") {
    for (auto& [id, rec] : test_records) {
      metrics::EvalSample s;
      s.category = rec.category;
      s.generated = tryon_once(p, rec, rec.garment_image, rec.category);
      s.reference = rec.model_image;
      s.paired_truth = rec.model_image;
      samples.push_back(std::move(s));
    }
  } else {
    for (const auto& ids : ds.test_ids_by_category())
      for (const auto& [wearer, donor] : data::unpair(ids)) {
        data::SampleRecord& rec = test_records.at(wearer);
        metrics::EvalSample s;
        s.category = rec.category;
        s.generated = tryon_once(p, rec, test_records.at(donor).garment_image, rec.category);
        s.reference = rec.model_image;
        samples.push_back(std::move(s));
      }
  }
  return metrics::build_report(samples, backend, mode, kid_opt);
}

}  // namespace vton::pipeline

#endif  // VTON_PIPELINE_EVALUATE_HPP
