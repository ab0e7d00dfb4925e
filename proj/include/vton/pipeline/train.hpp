#ifndef VTON_PIPELINE_TRAIN_HPP
#define VTON_PIPELINE_TRAIN_HPP

#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "vton/adversarial/losses.hpp"
#include "vton/geometry/tps.hpp"
#include "vton/nn/optim.hpp"
#include "vton/pipeline/checkpoint.hpp"
#include "vton/pipeline/features.hpp"
#include "vton/synthesis/perceptual.hpp"

namespace vton::pipeline {

// The three jointly-used networks plus the frozen perceptual feature net.
// Stages train strictly in order; later stages read the earlier ones frozen.
struct Pipeline {
  PipelineConfig cfg;
  geometry::WarpNet<float> warp;
  parsing::ParseNet<float> parse;
  synthesis::TryOnNet<float> tryon;
  synthesis::PerceptualExtractor<float> perceptual;
  std::vector<double> semantic_weights;  // per-class CE weights from the train split
  std::set<std::string> trained;

  explicit Pipeline(PipelineConfig c)
      : cfg((c.validate(), c)), warp(c.warp), parse(c.parse), tryon(c.tryon) {
    Rng rng(cfg.train.seed);
    Rng rw = rng.fork(1), rp = rng.fork(2), rt = rng.fork(3);
    warp.init(rw);
    parse.init(rp);
    tryon.init(rt);
    semantic_weights.assign(static_cast<std::size_t>(cfg.parse.num_classes), 1.0);
  }

  bool stage_trained(const std::string& stage) const { return trained.count(stage) > 0; }

  void require(const std::string& stage) const {
    if (!stage_trained(stage))
      throw DataError("pipeline: stage '" + stage + "' has not been trained or loaded");
  }
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_history;           // primary per-iteration loss
  std::map<std::string, double> final_components;
  double initial_avg = 0;  // mean primary loss over the first 20 iterations
  double final_avg = 0;    // mean primary loss over the last 20 iterations
};

namespace detail {

inline void window_averages(TrainResult& r) {
  const std::size_t n = r.loss_history.size();
  const std::size_t k = std::min<std::size_t>(20, n);
  if (k == 0) return;
  double a = 0, b = 0;
  for (std::size_t i = 0; i < k; ++i) {
    a += r.loss_history[i];
    b += r.loss_history[n - 1 - i];
  }
  r.initial_avg = a / static_cast<double>(k);
  r.final_avg = b / static_cast<double>(k);
}

// Batch index selection depends only on (seed, stage, iteration), so a resumed
// run draws exactly the batches the uninterrupted run would have drawn.
inline std::vector<int> batch_indices(std::uint64_t seed, const char* stage, std::int64_t iter, int pool, int batch) {
  std::uint64_t h = fnv1a64(stage, std::strlen(stage), seed ^ 0x9e3779b97f4a7c15ull);
  h = fnv1a64(&iter, sizeof(iter), h);
  Rng rng(h);
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = static_cast<int>(rng.uniform_int(0, pool - 1));
  return idx;
}

inline std::vector<const PreparedSample*> pick(const std::vector<PreparedSample>& samples,
                                               const std::vector<int>& idx) {
  std::vector<const PreparedSample*> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(&samples[static_cast<std::size_t>(i)]);
  return out;
}

inline void check_finite(const std::string& stage, std::int64_t iter,
                         const std::map<std::string, double>& components) {
  for (const auto& [name, v] : components)
    if (!std::isfinite(v)) {
      std::string diag = "training diverged: stage=" + stage + " iter=" + std::to_string(iter);
      for (const auto& [n2, v2] : components) diag += " " + n2 + "=" + std::to_string(v2);
      throw NumericError(diag);
    }
}

inline void log_components(std::ostream* log, const std::string& stage, std::int64_t iter,
                           const std::map<std::string, double>& components) {
  if (!log) return;
  *log << stage << " iter " << iter;
  for (const auto& [name, v] : components) *log << "  " << name << "=" << v;
  *log << '\n';
}

}  // namespace detail

struct StageOptions {
  std::ostream* log = nullptr;
  const Checkpoint* resume = nullptr;  // continue iteration counter + Adam state
  adversarial::AdvMode adv_mode = adversarial::AdvMode::psad;
  int override_iters = -1;  // tests shorten stages; -1 = schedule value
};

// Stage 1: fit the TPS regressor so the warped garment matches the garment
// region of the worn image, with the bending regularizer on theta.
inline TrainResult train_warp_stage(Pipeline& p, const std::vector<PreparedSample>& samples,
                                    StageOptions opt = {}) {
  if (samples.empty()) throw DataError("train_warp_stage: no samples");
  const TrainSchedule& ts = p.cfg.train;
  const int iters = opt.override_iters > 0 ? opt.override_iters : ts.warp_iters;
  p.warp.set_train(true);
  nn::Adam<float> adam(p.warp.parameters(), {ts.lr, ts.beta1, ts.beta2, 1e-8});
  std::int64_t start = 0;
  if (opt.resume) {
    load_into_module(*opt.resume, p.warp, &adam);
    start = opt.resume->iteration;
  }

  TrainResult r;
  std::map<std::string, double> comp;
  for (std::int64_t it = start; it < iters; ++it) {
    Batch b = make_batch(detail::pick(samples, detail::batch_indices(ts.seed, "warp", it, static_cast<int>(samples.size()), ts.batch)));
    Tensor<float> theta = p.warp.forward(b.garment, b.warp_person);
    Tensor<float> grid = geometry::tps_grid(theta, b.garment.dim(2), b.garment.dim(3));
    Tensor<float> warped = geometry::apply_tps(b.garment, grid);
    geometry::WarpLoss<float> loss = geometry::warp_loss(warped, b.garment_on_person, theta, ts.lambda_const);

    comp = {{"total", loss.total}, {"l1", loss.l1}, {"constraint", loss.constraint}};
    detail::check_finite("warp", it, comp);
    r.loss_history.push_back(loss.l1);

    Tensor<float> dimg, dgrid;
    geometry::apply_tps_backward(loss.d_warped, b.garment, grid, &dimg, &dgrid);
    Tensor<float> dtheta = geometry::tps_grid_backward(dgrid);
    dtheta += loss.d_theta;
    adam.zero_grad();
    p.warp.backward(dtheta);
    adam.step();

    if (ts.log_interval > 0 && (it % ts.log_interval == 0 || it + 1 == iters))
      detail::log_components(opt.log, "warp", it, comp);
  }
  detail::window_averages(r);
  r.final_components = comp;
  p.warp.set_train(false);
  p.trained.insert("warp");
  r.checkpoint = make_checkpoint("warp", iters, ts.seed, p.cfg, p.warp, &adam);
  return r;
}

// Stage 2: fit the parser to recover the full layout from the clothing-
// agnostic inputs.
inline TrainResult train_parse_stage(Pipeline& p, const std::vector<PreparedSample>& samples,
                                     StageOptions opt = {}) {
  if (samples.empty()) throw DataError("train_parse_stage: no samples");
  const TrainSchedule& ts = p.cfg.train;
  const int iters = opt.override_iters > 0 ? opt.override_iters : ts.parse_iters;
  p.parse.set_train(true);
  const double lr = ts.lr_parse > 0 ? ts.lr_parse : ts.lr;
  nn::Adam<float> adam(p.parse.parameters(), {lr, ts.beta1, ts.beta2, 1e-8});
  std::int64_t start = 0;
  if (opt.resume) {
    load_into_module(*opt.resume, p.parse, &adam);
    start = opt.resume->iteration;
  }

  TrainResult r;
  std::map<std::string, double> comp;
  for (std::int64_t it = start; it < iters; ++it) {
    Batch b = make_batch(detail::pick(samples, detail::batch_indices(ts.seed, "parse", it, static_cast<int>(samples.size()), ts.batch)));
    Tensor<float> logits = p.parse.forward(b.parse_input);
    nn::LossGrad<float> loss = parsing::parse_loss(logits, b.labels);

    comp = {{"ce", loss.loss}};
    detail::check_finite("parse", it, comp);
    r.loss_history.push_back(loss.loss);

    adam.zero_grad();
    p.parse.backward(loss.grad);
    adam.step();
    if (ts.log_interval > 0 && (it % ts.log_interval == 0 || it + 1 == iters))
      detail::log_components(opt.log, "parse", it, comp);
  }
  detail::window_averages(r);
  r.final_components = comp;
  p.parse.set_train(false);
  p.trained.insert("parse");
  r.checkpoint = make_checkpoint("parse", iters, ts.seed, p.cfg, p.parse, &adam);
  return r;
}

namespace detail {

// Discriminator plumbing behind one interface so the stage-3 loop is mode
// agnostic. Forward returns logits/scores; losses mirror the mode's
// objective; backward_input propagates without touching frozen weights.
template <typename T>
struct DiscBundle {
  adversarial::AdvMode mode = adversarial::AdvMode::none;
  std::unique_ptr<adversarial::PsadNet<T>> psad;
  std::unique_ptr<adversarial::PatchGan<T>> patch;
  std::unique_ptr<nn::Adam<T>> adam;

  static DiscBundle make(const PipelineConfig& cfg, adversarial::AdvMode mode, Rng rng) {
    DiscBundle d;
    d.mode = mode;
    const double lr = cfg.train.lr_tryon > 0 ? cfg.train.lr_tryon : cfg.train.lr;
    using adversarial::AdvMode;
    if (mode == AdvMode::psad || mode == AdvMode::binary) {
      adversarial::PsadConfig pc = cfg.psad;
      if (mode == AdvMode::binary) pc.out_channels = 2;
      d.psad = std::make_unique<adversarial::PsadNet<T>>(pc);
      d.psad->init(rng);
      d.adam = std::make_unique<nn::Adam<T>>(d.psad->parameters(), nn::AdamOptions{lr, cfg.train.beta1, cfg.train.beta2, 1e-8});
    } else if (mode == AdvMode::patch) {
      d.patch = std::make_unique<adversarial::PatchGan<T>>(cfg.patch);
      d.patch->init(rng);
      d.adam = std::make_unique<nn::Adam<T>>(d.patch->parameters(), nn::AdamOptions{lr, cfg.train.beta1, cfg.train.beta2, 1e-8});
    }
    return d;
  }

  Tensor<T> forward(const Tensor<T>& x) { return psad ? psad->forward(x) : patch->forward(x); }
  Tensor<T> backward(const Tensor<T>& dy, bool acc) {
    return psad ? psad->backward(dy, acc) : patch->backward(dy, acc);
  }

  nn::Module<T>* module() {
    if (psad) return psad.get();
    if (patch) return patch.get();
    return nullptr;
  }

  adversarial::GenLoss<T> g_loss(const Tensor<T>& fake_logits, const Tensor<int>& labels,
                                 const std::vector<double>& w) const {
    using adversarial::AdvMode;
    switch (mode) {
      case AdvMode::psad: return adversarial::psad_g_loss(fake_logits, labels, w);
      case AdvMode::binary: return adversarial::binary_g_loss(fake_logits);
      case AdvMode::patch: return adversarial::patch_g_loss(fake_logits);
      default: throw ConfigError("no generator loss without a discriminator");
    }
  }

  adversarial::DiscLoss<T> d_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits,
                                  const Tensor<int>& labels, const std::vector<double>& w) const {
    using adversarial::AdvMode;
    switch (mode) {
      case AdvMode::psad: return adversarial::psad_d_loss(real_logits, fake_logits, labels, w);
      case AdvMode::binary: return adversarial::binary_d_loss(real_logits, fake_logits);
      case AdvMode::patch: return adversarial::patch_d_loss(real_logits, fake_logits);
      default: throw ConfigError("no discriminator loss without a discriminator");
    }
  }
};

}  // namespace detail

// Stage 3: adversarial fit of the synthesis U-Net under the selected
// discriminator; the warp stage supplies frozen theta predictions. With
// AdvMode::none no discriminator exists and no update of one ever runs.
inline TrainResult train_tryon_stage(Pipeline& p, const std::vector<PreparedSample>& samples,
                                     StageOptions opt = {}) {
  if (samples.empty()) throw DataError("train_tryon_stage: no samples");
  p.require("warp");
  p.require("parse");
  const TrainSchedule& ts = p.cfg.train;
  const int iters = opt.override_iters > 0 ? opt.override_iters : ts.tryon_iters;
  const adversarial::AdvMode mode = opt.adv_mode;

  p.warp.set_train(false);
  p.tryon.set_train(true);
  const double lr = ts.lr_tryon > 0 ? ts.lr_tryon : ts.lr;
  nn::Adam<float> adam_g(p.tryon.parameters(), {lr, ts.beta1, ts.beta2, 1e-8});
  Rng seed_rng(ts.seed ^ 0xD15C0ull);
  detail::DiscBundle<float> disc = detail::DiscBundle<float>::make(p.cfg, mode, seed_rng.fork(1));
  std::int64_t start = 0;
  if (opt.resume) {
    load_into_module(*opt.resume, p.tryon, &adam_g);
    start = opt.resume->iteration;
  }

  TrainResult r;
  std::map<std::string, double> comp;
  for (std::int64_t it = start; it < iters; ++it) {
    Batch b = make_batch(detail::pick(samples, detail::batch_indices(ts.seed, "tryon", it, static_cast<int>(samples.size()), ts.batch)));
    Tensor<float> theta = p.warp.forward(b.garment, b.warp_person);
    Tensor<float> pred = p.tryon.forward(b.garment, b.tryon_person, theta);

    double adv_term = 0;
    Tensor<float> d_adv;
    if (mode != adversarial::AdvMode::none) {
      Tensor<float> fake_logits = disc.forward(pred);
      adversarial::GenLoss<float> gl = disc.g_loss(fake_logits, b.labels, p.semantic_weights);
      adv_term = gl.total;
      d_adv = disc.backward(gl.d_fake, /*acc=*/false);  // frozen pass: input gradient only
    }
    synthesis::TryOnLossParts<float> parts =
        synthesis::tryon_loss(pred, b.target, p.perceptual, adv_term, ts.lambda_adv);

    comp = {{"total", parts.total}, {"l1", parts.l1}, {"perceptual", parts.perceptual}, {"adv", parts.adv}};
    r.loss_history.push_back(parts.l1);

    Tensor<float> d_pred = parts.d_image;
    if (mode != adversarial::AdvMode::none) {
      for (std::size_t i = 0; i < d_pred.numel(); ++i)
        d_pred[i] += static_cast<float>(ts.lambda_adv) * d_adv[i];
    }
    adam_g.zero_grad();
    p.tryon.backward(d_pred, /*acc=*/true, nullptr);
    adam_g.step();

    if (mode != adversarial::AdvMode::none) {
      // Discriminator step: grads for the fake term while its caches are
      // fresh, then a real forward/backward pass.
      Tensor<float> fake_logits = disc.forward(pred);
      Tensor<float> real_logits = disc.forward(b.target);
      adversarial::DiscLoss<float> dl = disc.d_loss(real_logits, fake_logits, b.labels, p.semantic_weights);
      comp["d_total"] = dl.total;
      comp["d_real"] = dl.real_term;
      comp["d_fake"] = dl.fake_term;
      disc.adam->zero_grad();
      disc.backward(dl.d_real, /*acc=*/true);
      disc.forward(pred);
      disc.backward(dl.d_fake, /*acc=*/true);
      disc.adam->step();
    }
    detail::check_finite("tryon", it, comp);
    if (ts.log_interval > 0 && (it % ts.log_interval == 0 || it + 1 == iters))
      detail::log_components(opt.log, "tryon", it, comp);
  }
  detail::window_averages(r);
  r.final_components = comp;
  p.tryon.set_train(false);
  p.trained.insert("tryon");
  r.checkpoint = make_checkpoint("tryon", iters, ts.seed, p.cfg, p.tryon, &adam_g);
  r.checkpoint.stage = "tryon:" + adversarial::to_string(mode);
  return r;
}

inline void load_stage(Pipeline& p, const std::string& stage, const Checkpoint& c) {
  if (stage == "warp")
    load_into_module(c, p.warp);
  else if (stage == "parse")
    load_into_module(c, p.parse);
  else if (stage == "tryon")
    load_into_module(c, p.tryon);
  else
    throw ConfigError("load_stage: unknown stage " + stage);
  p.trained.insert(stage);
}

}  // namespace vton::pipeline

#endif  // VTON_PIPELINE_TRAIN_HPP
