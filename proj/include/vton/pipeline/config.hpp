#ifndef VTON_PIPELINE_CONFIG_HPP
#define VTON_PIPELINE_CONFIG_HPP

#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "vton/adversarial/discriminators.hpp"
#include "vton/geometry/warp_net.hpp"
#include "vton/parsing/parse_net.hpp"
#include "vton/synthesis/tryon_net.hpp"

namespace vton::pipeline {

using json = nlohmann::json;

struct TrainSchedule {
  int warp_iters = 100000;
  int parse_iters = 50000;
  int tryon_iters = 150000;
  int batch = 32;
  double lr = 1e-4;
  double lr_parse = 0;  // 0 = inherit lr
  double lr_tryon = 0;  // 0 = inherit lr
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lambda_const = 0.01;  // second-order warp regularizer weight
  double lambda_adv = 0.1;     // generator-side adversarial weight
  int log_interval = 100;
  int max_pairs = 0;  // cap on train pairs; 0 = use all
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  std::string profile = "base";
  int height = 256;
  int width = 192;
  geometry::WarpNetConfig warp;
  parsing::ParseNetConfig parse;
  synthesis::TryOnConfig tryon;
  adversarial::PsadConfig psad;
  adversarial::PatchConfig patch;
  TrainSchedule train;
  std::string adv_mode = "psad";

  bool is_hd() const { return height > 256; }

  void validate() const {
    if (height < 16 || width < 16) throw ConfigError("config: resolution too small");
    if (train.batch < 1) throw ConfigError("config: batch must be positive");
    if (train.lr <= 0) throw ConfigError("config: learning rate must be positive");
    if (train.warp_iters < 1 || train.parse_iters < 1 || train.tryon_iters < 1)
      throw ConfigError("config: iteration counts must be positive");
    if (train.lambda_const < 0 || train.lambda_adv < 0) throw ConfigError("config: loss weights must be >= 0");
    if (warp.input_h != height || warp.input_w != width)
      throw ConfigError("config: warp input size out of sync with profile resolution");
    if (is_hd() && (!warp.extra_downsample || parse.depth < 5 || tryon.depth < 5))
      throw ConfigError("config: HD profile requires the extra extractor layer and deeper U-Nets");
    warp.validate();
    parse.validate(height, width);
    tryon.validate(height, width);
    psad.validate(height, width);
    adversarial::adv_mode_from_string(adv_mode);
  }
};

namespace detail {

// Child keys override parent keys; nested objects merge recursively.
inline void merge_json(json& base, const json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge_json(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& scope) {
  if (!j.is_object()) throw ConfigError("config: " + scope + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("config: unknown key '" + scope + it.key() + "'");
}

}  // namespace detail

inline json builtin_profiles() {
  json p;
  p["base"] = {
      {"height", 256},
      {"width", 192},
      {"warp", {{"base_channels", 64}, {"downs", 4}, {"extra_downsample", false}, {"regressor_base", 64}}},
      {"parse", {{"base_channels", 64}, {"depth", 4}}},
      {"tryon", {{"base_channels", 64}, {"depth", 4}}},
      {"disc", {{"mode", "psad"}, {"base_channels", 64}, {"depth", 6}}},
      {"train",
       {{"warp_iters", 100000},
        {"parse_iters", 50000},
        {"tryon_iters", 150000},
        {"batch", 32},
        {"lr", 1e-4},
        {"lambda_const", 0.01},
        {"lambda_adv", 0.1},
        {"log_interval", 100},
        {"max_pairs", 0},
        {"seed", 0}}},
  };
  p["hd512"] = {
      {"inherits", "base"},
      {"height", 512},
      {"width", 384},
      {"warp", {{"extra_downsample", true}}},
      {"parse", {{"depth", 5}}},
      {"tryon", {{"depth", 5}}},
      {"train", {{"batch", 16}}},
  };
  p["hd1024"] = {
      {"inherits", "hd512"},
      {"height", 1024},
      {"width", 768},
  };
  p["desk"] = {
      {"inherits", "base"},
      {"height", 64},
      {"width", 48},
      {"warp", {{"base_channels", 16}, {"downs", 2}, {"regressor_base", 16}}},
      {"parse", {{"base_channels", 16}}},
      {"tryon", {{"base_channels", 16}}},
      {"disc", {{"base_channels", 16}, {"depth", 4}}},
      {"train",
       {{"warp_iters", 500},
        {"parse_iters", 500},
        {"tryon_iters", 500},
        {"batch", 4},
        // the toy schedule has 500 steps to overfit 16 pairs, so the parse
        // and synthesis stages run hotter than the full-scale default
        {"lr_parse", 3e-3},
        {"lr_tryon", 5e-3},
        {"log_interval", 20},
        {"max_pairs", 16}}},
  };
  return p;
}

// Resolves a profile by walking its `inherits` chain and merging overrides
// child-over-parent.
inline json resolve_profile(const json& profiles, const std::string& name) {
  std::set<std::string> seen;
  json out = json::object();
  std::vector<std::string> chain;
  std::string cur = name;
  while (true) {
    if (!profiles.contains(cur)) throw ConfigError("config: unknown profile '" + cur + "'");
    if (!seen.insert(cur).second) throw ConfigError("config: profile inheritance cycle at '" + cur + "'");
    chain.push_back(cur);
    const json& node = profiles.at(cur);
    if (!node.contains("inherits")) break;
    cur = node.at("inherits").get<std::string>();
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    json node = profiles.at(*it);
    node.erase("inherits");
    detail::merge_json(out, node);
  }
  return out;
}

inline PipelineConfig config_from_json(const json& j, const std::string& profile_name) {
  detail::check_keys(j, {"profile", "height", "width", "warp", "parse", "tryon", "disc", "train"}, "");
  PipelineConfig c;
  c.profile = profile_name;
  if (j.contains("profile")) c.profile = j.at("profile").get<std::string>();
  if (!profile_name.empty()) c.profile = profile_name;
  detail::take(j, "height", c.height);
  detail::take(j, "width", c.width);
  if (j.contains("warp")) {
    const json& w = j.at("warp");
    detail::check_keys(w, {"base_channels", "downs", "extra_downsample", "regressor_base", "pose_channels"},
                       "warp.");
    detail::take(w, "base_channels", c.warp.base_channels);
    detail::take(w, "downs", c.warp.downs);
    detail::take(w, "extra_downsample", c.warp.extra_downsample);
    detail::take(w, "regressor_base", c.warp.regressor_base);
    detail::take(w, "pose_channels", c.warp.pose_channels);
  }
  if (j.contains("parse")) {
    const json& p = j.at("parse");
    detail::check_keys(p, {"base_channels", "depth", "pose_channels"}, "parse.");
    detail::take(p, "base_channels", c.parse.base_channels);
    detail::take(p, "depth", c.parse.depth);
    detail::take(p, "pose_channels", c.parse.pose_channels);
  }
  if (j.contains("tryon")) {
    const json& t = j.at("tryon");
    detail::check_keys(t, {"base_channels", "depth", "pose_channels"}, "tryon.");
    detail::take(t, "base_channels", c.tryon.base_channels);
    detail::take(t, "depth", c.tryon.depth);
    detail::take(t, "pose_channels", c.tryon.pose_channels);
  }
  if (j.contains("disc")) {
    const json& d = j.at("disc");
    detail::check_keys(d, {"mode", "base_channels", "depth"}, "disc.");
    detail::take(d, "mode", c.adv_mode);
    detail::take(d, "base_channels", c.psad.base_channels);
    detail::take(d, "depth", c.psad.depth);
    if (d.contains("base_channels")) c.patch.base_channels = c.psad.base_channels;
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t,
                       {"warp_iters", "parse_iters", "tryon_iters", "batch", "lr", "lr_parse", "lr_tryon", "beta1",
                        "beta2", "lambda_const", "lambda_adv", "log_interval", "max_pairs", "seed"},
                       "train.");
    detail::take(t, "warp_iters", c.train.warp_iters);
    detail::take(t, "parse_iters", c.train.parse_iters);
    detail::take(t, "tryon_iters", c.train.tryon_iters);
    detail::take(t, "batch", c.train.batch);
    detail::take(t, "lr", c.train.lr);
    detail::take(t, "lr_parse", c.train.lr_parse);
    detail::take(t, "lr_tryon", c.train.lr_tryon);
    detail::take(t, "beta1", c.train.beta1);
    detail::take(t, "beta2", c.train.beta2);
    detail::take(t, "lambda_const", c.train.lambda_const);
    detail::take(t, "lambda_adv", c.train.lambda_adv);
    detail::take(t, "log_interval", c.train.log_interval);
    detail::take(t, "max_pairs", c.train.max_pairs);
    detail::take(t, "seed", c.train.seed);
  }
  c.warp.input_h = c.height;
  c.warp.input_w = c.width;
  c.validate();
  return c;
}

inline PipelineConfig make_config(const std::string& profile) {
  return config_from_json(resolve_profile(builtin_profiles(), profile), profile);
}

// Config files add to (or override) the built-in profiles and may pick one:
//   { "profile": "desk", "profiles": { "mine": { "inherits": "desk", ... } } }
inline PipelineConfig load_config_file(const std::string& path, const std::string& profile_override = "") {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  detail::check_keys(doc, {"profile", "profiles"}, "");
  json profiles = builtin_profiles();
  if (doc.contains("profiles")) {
    if (!doc.at("profiles").is_object()) throw ConfigError("config: 'profiles' must be an object");
    for (auto it = doc.at("profiles").begin(); it != doc.at("profiles").end(); ++it)
      profiles[it.key()] = it.value();
  }
  std::string name = profile_override;
  if (name.empty()) name = doc.value("profile", std::string("base"));
  return config_from_json(resolve_profile(profiles, name), name);
}

inline json config_to_json(const PipelineConfig& c) {
  json j;
  j["profile"] = c.profile;
  j["height"] = c.height;
  j["width"] = c.width;
  j["warp"] = {{"base_channels", c.warp.base_channels},
               {"downs", c.warp.downs},
               {"extra_downsample", c.warp.extra_downsample},
               {"regressor_base", c.warp.regressor_base},
               {"pose_channels", c.warp.pose_channels}};
  j["parse"] = {{"base_channels", c.parse.base_channels},
                {"depth", c.parse.depth},
                {"pose_channels", c.parse.pose_channels}};
  j["tryon"] = {{"base_channels", c.tryon.base_channels},
                {"depth", c.tryon.depth},
                {"pose_channels", c.tryon.pose_channels}};
  j["disc"] = {{"mode", c.adv_mode}, {"base_channels", c.psad.base_channels}, {"depth", c.psad.depth}};
  j["train"] = {{"warp_iters", c.train.warp_iters},
                {"parse_iters", c.train.parse_iters},
                {"tryon_iters", c.train.tryon_iters},
                {"lr_parse", c.train.lr_parse},
                {"lr_tryon", c.train.lr_tryon},
                {"batch", c.train.batch},
                {"lr", c.train.lr},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"lambda_const", c.train.lambda_const},
                {"lambda_adv", c.train.lambda_adv},
                {"log_interval", c.train.log_interval},
                {"max_pairs", c.train.max_pairs},
                {"seed", c.train.seed}};
  return j;
}

}  // namespace vton::pipeline

#endif  // VTON_PIPELINE_CONFIG_HPP
