#ifndef VTON_PIPELINE_ABLATE_HPP
#define VTON_PIPELINE_ABLATE_HPP

#include <sstream>
#include <string>
#include <vector>

#include "vton/pipeline/evaluate.hpp"

namespace vton::pipeline {

struct AblationEntry {
  std::string mode;
  TrainResult train;
  metrics::MetricReport report;
};

struct AblationResult {
  Checkpoint warp_checkpoint;   // shared by every arm
  Checkpoint parse_checkpoint;  // shared by every arm
  std::vector<AblationEntry> entries;
  bool stage_isolation_verified = false;

  std::string table() const {
    std::ostringstream os;
    os << "discriminator      ssim      fid       kid       is\n";
    for (const auto& e : entries) {
      const auto& all = e.report.rows.back();
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-12s %9s %9.4f %9.4f %8.3f\n", e.mode.c_str(),
                    all.ssim ? (std::to_string(*all.ssim).substr(0, 6)).c_str() : "-", all.fid, all.kid,
                    all.is_score);
      os << buf;
    }
    return os.str();
  }
};

namespace detail {

inline bool blocks_equal(const Checkpoint& a, const Checkpoint& b) {
  if (a.blocks.size() != b.blocks.size()) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    if (a.blocks[i].first != b.blocks[i].first) return false;
    const Tensor<float>&x = a.blocks[i].second, &y = b.blocks[i].second;
    if (x.shape() != y.shape()) return false;
    if (std::memcmp(x.data(), y.data(), x.numel() * sizeof(float)) != 0) return false;
  }
  return true;
}

}  // namespace detail

inline void set_semantic_weights(Pipeline& p, const std::vector<PreparedSample>& samples) {
  std::vector<const Tensor<int>*> parses;
  parses.reserve(samples.size());
  for (const auto& s : samples) parses.push_back(&s.parse_labels);
  const data::ClassWeights cw = data::class_weights(data::count_parse_pixels(parses));
  p.semantic_weights.assign(cw.w.begin(), cw.w.end());
}

// Controlled comparison of the adversarial objectives: one shared warp/parse
// fit, then an identically initialised try-on arm per discriminator mode,
// each evaluated on the paired test protocol.
inline AblationResult ablate(const PipelineConfig& cfg, const data::Dataset& ds,
                             metrics::EmbeddingBackend& backend, StageOptions opt = {},
                             std::vector<adversarial::AdvMode> modes = {
                                 adversarial::AdvMode::none, adversarial::AdvMode::binary,
                                 adversarial::AdvMode::patch, adversarial::AdvMode::psad}) {
  std::vector<PreparedSample> samples = prepare_train_split(ds, cfg.train.max_pairs);

  Pipeline shared(cfg);
  set_semantic_weights(shared, samples);
  StageOptions stage_opt = opt;
  stage_opt.resume = nullptr;

  AblationResult out;
  out.warp_checkpoint = train_warp_stage(shared, samples, stage_opt).checkpoint;
  out.parse_checkpoint = train_parse_stage(shared, samples, stage_opt).checkpoint;

  out.stage_isolation_verified = true;
  for (adversarial::AdvMode mode : modes) {
    Pipeline arm(cfg);
    arm.semantic_weights = shared.semantic_weights;
    load_stage(arm, "warp", out.warp_checkpoint);
    load_stage(arm, "parse", out.parse_checkpoint);

    AblationEntry entry;
    entry.mode = adversarial::to_string(mode);
    StageOptions arm_opt = stage_opt;
    arm_opt.adv_mode = mode;
    entry.train = train_tryon_stage(arm, samples, arm_opt);
    entry.report = evaluate(arm, ds, "paired", backend);

    // The earlier stages must come out of every arm byte-identical.
    const Checkpoint warp_after = make_checkpoint("warp", 0, cfg.train.seed, cfg, arm.warp);
    const Checkpoint parse_after = make_checkpoint("parse", 0, cfg.train.seed, cfg, arm.parse);
    const Checkpoint warp_ref = make_checkpoint("warp", 0, cfg.train.seed, cfg, shared.warp);
    const Checkpoint parse_ref = make_checkpoint("parse", 0, cfg.train.seed, cfg, shared.parse);
    if (!detail::blocks_equal(warp_after, warp_ref) || !detail::blocks_equal(parse_after, parse_ref))
      out.stage_isolation_verified = false;

    out.entries.push_back(std::move(entry));
  }
  if (!out.stage_isolation_verified)
    throw IntegrityError("ablate: a try-on arm mutated the shared warp/parse weights");
  return out;
}

}  // namespace vton::pipeline

#endif  // VTON_PIPELINE_ABLATE_HPP
