#ifndef VTON_METRICS_REPORT_HPP
#define VTON_METRICS_REPORT_HPP

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vton/data/types.hpp"
#include "vton/metrics/distribution.hpp"
#include "vton/metrics/embedding.hpp"
#include "vton/metrics/ssim.hpp"

namespace vton::metrics {

struct CategoryMetrics {
  std::string name;
  int count = 0;
  std::optional<double> ssim;  // paired mode only
  double fid = 0;
  double kid = 0;
  double is_score = 0;
};

struct MetricReport {
  std::string backend;
  std::string backend_hash;
  std::string mode;  // "paired" or "unpaired"
  std::vector<CategoryMetrics> rows;

  std::string text() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %6s %9s %12s %12s %9s\n", "category", "count", "SSIM", "FID", "KID",
                  "IS");
    out += line;
    for (const auto& r : rows) {
      char ssim_buf[16];
      if (r.ssim)
        std::snprintf(ssim_buf, sizeof(ssim_buf), "%9.4f", *r.ssim);
      else
        std::snprintf(ssim_buf, sizeof(ssim_buf), "%9s", "-");
      std::snprintf(line, sizeof(line), "%-12s %6d %s %12.4f %12.5f %9.4f\n", r.name.c_str(), r.count, ssim_buf,
                    r.fid, r.kid, r.is_score);
      out += line;
    }
    out += "backend: " + backend + " (" + backend_hash + "), mode: " + mode + "\n";
    return out;
  }

  nlohmann::json json() const {
    nlohmann::json j;
    j["backend"] = backend;
    j["backend_hash"] = backend_hash;
    j["mode"] = mode;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row;
      row["category"] = r.name;
      row["count"] = r.count;
      if (r.ssim) row["ssim"] = *r.ssim;
      row["fid"] = r.fid;
      row["kid"] = r.kid;
      row["is"] = r.is_score;
      j["rows"].push_back(row);
    }
    return j;
  }
};

struct EvalSample {
  data::Category category = data::Category::upper_body;
  Tensor<float> generated;                  // [3,H,W]
  Tensor<float> reference;                  // real image the distributions compare against
  std::optional<Tensor<float>> paired_truth;  // ground truth for SSIM (paired mode)
};

// Assembles the per-category rows plus the overall row over the union.
inline MetricReport build_report(std::vector<EvalSample>& samples, EmbeddingBackend& backend, const std::string& mode,
                                 KidOptions kid_opt = {}) {
  if (samples.empty()) throw DataError("metric report: empty evaluation set");
  MetricReport report;
  report.backend = backend.name();
  report.backend_hash = backend.weight_hash();
  report.mode = mode;

  auto row_for = [&](const std::string& name, const std::vector<const EvalSample*>& subset) {
    CategoryMetrics row;
    row.name = name;
    row.count = static_cast<int>(subset.size());
    if (subset.empty()) {
      report.rows.push_back(row);
      return;
    }
    std::vector<Tensor<float>> generated, reference;
    generated.reserve(subset.size());
    reference.reserve(subset.size());
    bool all_paired = true;
    double ssim_sum = 0;
    for (const auto* s : subset) {
      generated.push_back(s->generated);
      reference.push_back(s->reference);
      if (s->paired_truth)
        ssim_sum += ssim(s->generated, *s->paired_truth);
      else
        all_paired = false;
    }
    if (all_paired) row.ssim = ssim_sum / static_cast<double>(subset.size());
    const Eigen::MatrixXd fg = backend.embed(generated);
    const Eigen::MatrixXd fr = backend.embed(reference);
    row.fid = fid(fg, fr);
    row.kid = kid(fg, fr, kid_opt);
    row.is_score = inception_score(backend.classify(generated));
    report.rows.push_back(row);
  };

  for (auto cat : data::kCategories) {
    std::vector<const EvalSample*> subset;
    for (const auto& s : samples)
      if (s.category == cat) subset.push_back(&s);
    row_for(data::category_name(cat), subset);
  }
  std::vector<const EvalSample*> all;
  for (const auto& s : samples) all.push_back(&s);
  row_for("all", all);
  return report;
}

}  // namespace vton::metrics

#endif  // VTON_METRICS_REPORT_HPP
