// Command-line front end for the try-on pipeline: synthetic data generation,
// staged training, evaluation, single/multi-garment inference, and the
// discriminator ablation harness.
//
// Exit codes: 0 success, 2 configuration error, 3 data/integrity error,
// 4 numerical failure during training or inference.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vton/vton.hpp"

namespace fs = std::filesystem;
using namespace vton;
using namespace vton::pipeline;

namespace {

struct CommonArgs {
  std::string config_file;
  std::string profile;
  std::string data_root;
  std::string checkpoint_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int iters = -1;
  bool resume = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_data) {
  cmd->add_option("--config", a.config_file, "JSON config file (see README for the schema)");
  cmd->add_option("--profile", a.profile, "Built-in or file-defined profile (base, hd512, hd1024, desk)");
  auto* data = cmd->add_option("--data", a.data_root, "Dataset root directory");
  if (needs_data) data->required();
  cmd->add_option("--checkpoint-dir", a.checkpoint_dir,
                  "Checkpoint directory (default: $VTON_CHECKPOINT_DIR or ./checkpoints)");
  cmd->add_option("--seed", a.seed, "Override the training seed")->each([&a](const std::string&) { a.seed_set = true; });
  cmd->add_option("--iters", a.iters, "Override the stage iteration count");
  cmd->add_flag("--resume", a.resume, "Resume the stage from its existing checkpoint");
  cmd->add_flag("--quiet", a.quiet, "Suppress per-interval loss logging");
}

fs::path checkpoint_dir(const CommonArgs& a) {
  if (!a.checkpoint_dir.empty()) return a.checkpoint_dir;
  if (const char* env = std::getenv("VTON_CHECKPOINT_DIR"); env && *env) return env;
  return "checkpoints";
}

PipelineConfig load_cfg(const CommonArgs& a) {
  PipelineConfig cfg = a.config_file.empty()
                           ? make_config(a.profile.empty() ? "base" : a.profile)
                           : load_config_file(a.config_file, a.profile);
  if (a.seed_set) cfg.train.seed = a.seed;
  return cfg;
}

data::Dataset open_dataset(const CommonArgs& a, const PipelineConfig& cfg) {
  data::LoadOptions lo;
  lo.height = cfg.height;
  lo.width = cfg.width;
  return data::Dataset(a.data_root, lo);
}

StageOptions stage_options(const CommonArgs& a) {
  StageOptions opt;
  opt.log = a.quiet ? nullptr : &std::cout;
  opt.override_iters = a.iters;
  return opt;
}

Checkpoint read_ckpt(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("checkpoint not found: " + p.string() + " (train the earlier stages first)");
  return Checkpoint::load(p.string());
}

// Loads the frozen prerequisite stages for `stage` and, if --resume was
// given, returns this stage's own checkpoint so training continues from it.
std::optional<Checkpoint> prepare_stages(Pipeline& p, const CommonArgs& a, const std::string& stage) {
  const fs::path dir = checkpoint_dir(a);
  if (stage == "parse" || stage == "tryon") load_stage(p, "warp", read_ckpt(dir / "warp.ckpt"));
  if (stage == "tryon") load_stage(p, "parse", read_ckpt(dir / "parse.ckpt"));
  if (a.resume) {
    const fs::path own = dir / (stage + ".ckpt");
    if (fs::exists(own)) return Checkpoint::load(own.string());
  }
  return std::nullopt;
}

void save_ckpt(const Checkpoint& c, const CommonArgs& a, const std::string& stage) {
  const fs::path dir = checkpoint_dir(a);
  fs::create_directories(dir);
  const fs::path out = dir / (stage + ".ckpt");
  c.save(out.string());
  std::cout << "saved " << out.string() << "\n";
}

void load_bundle(Pipeline& p, const CommonArgs& a) {
  const fs::path dir = checkpoint_dir(a);
  load_stage(p, "warp", read_ckpt(dir / "warp.ckpt"));
  load_stage(p, "parse", read_ckpt(dir / "parse.ckpt"));
  load_stage(p, "tryon", read_ckpt(dir / "tryon.ckpt"));
}

data::SampleRecord find_record(const data::Dataset& ds, const std::string& id) {
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.item(i).id == id) return ds.load(i);
  throw DataError("item id not found in dataset: " + id);
}

void report_result(const TrainResult& r, const std::string& stage) {
  std::cout << stage << " done: first-20 avg " << r.initial_avg << ", last-20 avg " << r.final_avg << "\n";
  for (const auto& [k, v] : r.final_components) std::cout << "  final " << k << " = " << v << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-category virtual try-on: TPS warping, human parsing, and adversarial synthesis"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic desk-scale corpus");
  std::string gen_out;
  data::SyntheticOptions so;
  gen->add_option("--out", gen_out, "Output corpus root")->required();
  gen->add_option("--per-category", so.per_category, "Items per category (default 8)");
  gen->add_option("--height", so.height, "Image height (default 64)");
  gen->add_option("--width", so.width, "Image width (default 48)");
  gen->add_option("--seed", so.seed, "Generator seed");
  gen->add_option("--train-fraction", so.train_fraction, "Share of items marked train (default 0.75)");

  // train-* subcommands share CommonArgs instances.
  CommonArgs wa, pa, ta, ea, ya, ma, ab;
  auto* tw = app.add_subcommand("train-warp", "Train the garment warping module");
  add_common(tw, wa, true);
  auto* tp = app.add_subcommand("train-parse", "Train the human parsing module (needs warp checkpoint)");
  add_common(tp, pa, true);
  auto* tt = app.add_subcommand("train-tryon", "Train the synthesis module (needs warp+parse checkpoints)");
  add_common(tt, ta, true);
  std::string disc = "psad";
  tt->add_option("--disc", disc, "Adversarial mode: psad, patch, binary, none")
      ->check(CLI::IsMember({"psad", "patch", "binary", "none"}));

  auto* ev = app.add_subcommand("eval", "Evaluate a trained bundle on the test split");
  add_common(ev, ea, true);
  std::string mode = "paired";
  ev->add_option("--mode", mode, "paired (own garment, SSIM/FID/KID/IS) or unpaired (rearranged, no SSIM)")
      ->check(CLI::IsMember({"paired", "unpaired"}));
  std::string eval_json;
  ev->add_option("--json", eval_json, "Also write the report as JSON to this path");

  auto* ty = app.add_subcommand("tryon", "Run one try-on and write a PPM image");
  add_common(ty, ya, true);
  std::string person_id, garment_id, category = "upper_body", out_image = "tryon.ppm";
  ty->add_option("--person", person_id, "Person item id")->required();
  ty->add_option("--garment", garment_id, "Garment item id (its in-shop garment image is used)")->required();
  ty->add_option("--category", category, "Garment category")
      ->check(CLI::IsMember({"upper_body", "lower_body", "dresses"}));
  ty->add_option("--out", out_image, "Output PPM path (default tryon.ppm)");

  auto* tm = app.add_subcommand("tryon-multi", "Sequential upper-then-lower try-on");
  add_common(tm, ma, true);
  std::string m_person, m_upper, m_lower, m_out = "tryon-multi.ppm";
  tm->add_option("--person", m_person, "Person item id")->required();
  tm->add_option("--upper", m_upper, "Upper-body garment item id")->required();
  tm->add_option("--lower", m_lower, "Lower-body garment item id")->required();
  tm->add_option("--out", m_out, "Output PPM path (default tryon-multi.ppm)");

  auto* abl = app.add_subcommand("ablate", "Train/evaluate all four discriminator modes from shared warp/parse");
  add_common(abl, ab, true);
  std::string ablate_json;
  abl->add_option("--json", ablate_json, "Also write per-mode reports as JSON to this path");

  app.parse(argc, argv);

  if (gen->parsed()) {
    data::generate_synthetic(gen_out, so);
    std::cout << "wrote synthetic corpus (" << 3 * so.per_category << " items) to " << gen_out << "\n";
    return 0;
  }

  if (tw->parsed()) {
    PipelineConfig cfg = load_cfg(wa);
    data::Dataset ds = open_dataset(wa, cfg);
    std::vector<PreparedSample> samples = prepare_train_split(ds, cfg.train.max_pairs);
    Pipeline p(cfg);
    StageOptions opt = stage_options(wa);
    std::optional<Checkpoint> own = prepare_stages(p, wa, "warp");
    if (own) opt.resume = &*own;
    TrainResult r = train_warp_stage(p, samples, opt);
    report_result(r, "warp");
    save_ckpt(r.checkpoint, wa, "warp");
    return 0;
  }

  if (tp->parsed()) {
    PipelineConfig cfg = load_cfg(pa);
    data::Dataset ds = open_dataset(pa, cfg);
    std::vector<PreparedSample> samples = prepare_train_split(ds, cfg.train.max_pairs);
    Pipeline p(cfg);
    StageOptions opt = stage_options(pa);
    std::optional<Checkpoint> own = prepare_stages(p, pa, "parse");
    if (own) opt.resume = &*own;
    TrainResult r = train_parse_stage(p, samples, opt);
    report_result(r, "parse");
    save_ckpt(r.checkpoint, pa, "parse");
    return 0;
  }

  if (tt->parsed()) {
    PipelineConfig cfg = load_cfg(ta);
    cfg.adv_mode = disc;
    data::Dataset ds = open_dataset(ta, cfg);
    std::vector<PreparedSample> samples = prepare_train_split(ds, cfg.train.max_pairs);
    Pipeline p(cfg);
    set_semantic_weights(p, samples);
    StageOptions opt = stage_options(ta);
    opt.adv_mode = adversarial::adv_mode_from_string(disc);
    std::optional<Checkpoint> own = prepare_stages(p, ta, "tryon");
    if (own) opt.resume = &*own;
    TrainResult r = train_tryon_stage(p, samples, opt);
    report_result(r, "tryon[" + disc + "]");
    save_ckpt(r.checkpoint, ta, "tryon");
    return 0;
  }

  if (ev->parsed()) {
    PipelineConfig cfg = load_cfg(ea);
    data::Dataset ds = open_dataset(ea, cfg);
    Pipeline p(cfg);
    load_bundle(p, ea);
    metrics::EmbeddingBackend backend;
    metrics::MetricReport report = evaluate(p, ds, mode, backend);
    std::cout << report.text();
    if (!eval_json.empty()) {
      std::ofstream out(eval_json);
      out << report.json().dump(2) << "\n";
      std::cout << "wrote " << eval_json << "\n";
    }
    return 0;
  }

  if (ty->parsed()) {
    PipelineConfig cfg = load_cfg(ya);
    data::Dataset ds = open_dataset(ya, cfg);
    Pipeline p(cfg);
    load_bundle(p, ya);
    data::SampleRecord person = find_record(ds, person_id);
    data::SampleRecord donor = find_record(ds, garment_id);
    Tensor<float> out = tryon_once(p, person, donor.garment_image, data::category_from_name(category));
    write_ppm(out_image, out);
    std::cout << "wrote " << out_image << "\n";
    return 0;
  }

  if (tm->parsed()) {
    PipelineConfig cfg = load_cfg(ma);
    data::Dataset ds = open_dataset(ma, cfg);
    Pipeline p(cfg);
    load_bundle(p, ma);
    data::SampleRecord person = find_record(ds, m_person);
    data::SampleRecord upper = find_record(ds, m_upper);
    data::SampleRecord lower = find_record(ds, m_lower);
    Tensor<float> out = multi_garment(p, person, upper.garment_image, lower.garment_image);
    write_ppm(m_out, out);
    std::cout << "wrote " << m_out << "\n";
    return 0;
  }

  if (abl->parsed()) {
    PipelineConfig cfg = load_cfg(ab);
    data::Dataset ds = open_dataset(ab, cfg);
    metrics::EmbeddingBackend backend;
    StageOptions opt = stage_options(ab);
    AblationResult res = ablate(cfg, ds, backend, opt);
    std::cout << res.table();
    if (!ablate_json.empty()) {
      json j = json::array();
      for (const AblationEntry& e : res.entries)
        j.push_back({{"mode", e.mode}, {"report", e.report.json()}});
      std::ofstream out(ablate_json);
      out << j.dump(2) << "\n";
      std::cout << "wrote " << ablate_json << "\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = CLI::App().exit(e);
    return code == 0 ? 0 : 2;  // bad flags are configuration errors
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IntegrityError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
