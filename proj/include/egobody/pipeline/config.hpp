#pragma once

// Pipeline configuration: one flat key/value file with a documented default
// for every key. Unknown keys are rejected; `--key value` overrides apply
// after the file.

#include <functional>
#include <sstream>

#include "egobody/eval/report.hpp"

namespace egobody {

struct PipelineConfig {
  std::filesystem::path data_root = "runs/data";
  std::filesystem::path models_root = "runs/models";
  std::filesystem::path output_root = "runs/output";
  std::uint64_t seed = 7;

  DatasetConfig dataset;

  NetworkSize translate_net{32, 7, 32, 3, 0.5, true};
  TrainConfig translate;

  RegressorConfig regressor;
  PriorConfig prior;
  RecoveryTrainConfig recover;

  NetworkSize texture_net{32, 8, 32, 3, 0.5, true};
  TrainConfig texture;

  int eval_max_frames = 0;
  int eval_timing_samples = 10;

  ArrangementBudget experiment;

  PipelineConfig() {
    experiment.steps = 5000;
    experiment.max_train_frames = 2000;
    experiment.max_test_frames = 200;
  }

  /// Settings that mirror others (seeds, regressor resolution, experiment network).
  void sync() {
    translate.seed = derive_seed(seed, 0x7472ULL);
    recover.seed = derive_seed(seed, 0x7263ULL);
    texture.seed = derive_seed(seed, 0x7478ULL);
    texture.method = Arrangement::kC;
    regressor.resolution = dataset.resolution;
    experiment.size = translate_net;
    experiment.train = translate;
  }

  void validate() const {
    dataset.validate();
    for (const auto& cam : rig_default(dataset.rig_options())) cam.validate();
    if (!(dataset.rig.tp_distance > 0)) throw ConfigError("dataset.rig.tp_distance must be > 0");
    translate.validate();
    texture.validate();
    recover.validate();
    regressor.validate();
    prior.validate();
    if (eval_max_frames < 0) throw ConfigError("eval.max_frames must be >= 0");
    if (eval_timing_samples < 1) throw ConfigError("eval.timing_samples must be >= 1");
    if (experiment.steps < 0 || experiment.max_train_frames < 0 || experiment.max_test_frames < 0 ||
        experiment.max_seconds < 0)
      throw ConfigError("experiment budget values must be >= 0");
    // Generator geometry must divide by 2^depth.
    auto check_gen = [](int w, int h, int depth, const std::string& what) {
      if (depth < 1 || w % (1 << depth) != 0 || h % (1 << depth) != 0)
        throw ConfigError(what + ".depth " + std::to_string(depth) + " does not divide the output geometry " +
                          std::to_string(w) + "x" + std::to_string(h));
    };
    const auto [tw, th] = arranged_size(dataset.resolution, dataset.resolution, translate.method);
    check_gen(tw, th, translate_net.depth, "translate");
    check_gen(dataset.texture_size, dataset.texture_size, texture_net.depth, "texture");
  }

  std::filesystem::path translate_checkpoint() const { return models_root / "translate.ckpt"; }
  std::filesystem::path recover_checkpoint() const { return models_root / "recover.ckpt"; }
  std::filesystem::path texture_checkpoint() const { return models_root / "texture.ckpt"; }
};

namespace config_detail {

using Tokens = std::vector<std::string>;

struct Field {
  std::string key;
  std::string doc;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const Tokens&)> set;
};

inline const std::string& single(const std::string& key, const Tokens& t) {
  if (t.size() != 1) throw ConfigError("'" + key + "' takes exactly one value");
  return t[0];
}

inline double to_number(const std::string& key, const Tokens& t) {
  const std::string& s = single(key, t);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
  return v;
}

inline long long to_integer(const std::string& key, const Tokens& t) {
  const double v = to_number(key, t);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError("'" + key + "' expects an integer, got '" + t[0] + "'");
  return static_cast<long long>(v);
}

/// Shortest text that reads back to the same double.
inline std::string short_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), "short_number: conversion failed");
  return std::string(buf, p);
}

template <class M>
Field int_field(std::string key, std::string doc, M member) {
  return {key, std::move(doc), [member](const PipelineConfig& c) { return std::to_string(member(const_cast<PipelineConfig&>(c))); },
          [member, key](PipelineConfig& c, const Tokens& t) { member(c) = static_cast<int>(to_integer(key, t)); }};
}

template <class M>
Field real_field(std::string key, std::string doc, M member) {
  return {key, std::move(doc), [member](const PipelineConfig& c) { return short_number(member(const_cast<PipelineConfig&>(c))); },
          [member, key](PipelineConfig& c, const Tokens& t) { member(c) = to_number(key, t); }};
}

template <class M>
Field bool_field(std::string key, std::string doc, M member) {
  return {key, std::move(doc), [member](const PipelineConfig& c) { return std::string(member(const_cast<PipelineConfig&>(c)) ? "1" : "0"); },
          [member, key](PipelineConfig& c, const Tokens& t) {
            const long long v = to_integer(key, t);
            if (v != 0 && v != 1) throw ConfigError("'" + key + "' expects 0 or 1");
            member(c) = v == 1;
          }};
}

template <class M>
Field path_field(std::string key, std::string doc, M member) {
  return {key, std::move(doc), [member](const PipelineConfig& c) { return member(const_cast<PipelineConfig&>(c)).string(); },
          [member, key](PipelineConfig& c, const Tokens& t) { member(c) = single(key, t); }};
}

template <class Net>
void network_fields(std::vector<Field>& f, const std::string& p, Net net) {
  f.push_back(int_field(p + ".base", "generator channels at the first level", [net](PipelineConfig& c) -> int& { return net(c).base; }));
  f.push_back(int_field(p + ".depth", "U-Net levels; the output size must divide by 2^depth",
                        [net](PipelineConfig& c) -> int& { return net(c).depth; }));
  f.push_back(int_field(p + ".disc_base", "discriminator channels at the first layer",
                        [net](PipelineConfig& c) -> int& { return net(c).disc_base; }));
  f.push_back(int_field(p + ".disc_layers", "strided discriminator layers (3 gives a 70 px receptive field)",
                        [net](PipelineConfig& c) -> int& { return net(c).disc_layers; }));
  f.push_back(real_field(p + ".dropout", "dropout in the three innermost decoder levels",
                         [net](PipelineConfig& c) -> double& { return net(c).dropout; }));
  f.push_back(bool_field(p + ".use_skip", "U-Net skip connections", [net](PipelineConfig& c) -> bool& { return net(c).use_skip; }));
}

template <class Train>
void gan_train_fields(std::vector<Field>& f, const std::string& p, Train tr) {
  f.push_back(real_field(p + ".lambda_l1", "weight of the L1 term", [tr](PipelineConfig& c) -> double& { return tr(c).lambda_l1; }));
  f.push_back(real_field(p + ".lr_g", "generator Adam learning rate", [tr](PipelineConfig& c) -> double& { return tr(c).lr_g; }));
  f.push_back(real_field(p + ".lr_d", "discriminator Adam learning rate", [tr](PipelineConfig& c) -> double& { return tr(c).lr_d; }));
  f.push_back(int_field(p + ".batch", "pairs per step", [tr](PipelineConfig& c) -> int& { return tr(c).batch; }));
  f.push_back(int_field(p + ".steps", "training steps", [tr](PipelineConfig& c) -> int& { return tr(c).max_steps; }));
  f.push_back(int_field(p + ".checkpoint_interval", "steps between checkpoints",
                        [tr](PipelineConfig& c) -> int& { return tr(c).checkpoint_interval; }));
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> f;
    f.push_back(path_field("data_root", "dataset directory", [](PipelineConfig& c) -> auto& { return c.data_root; }));
    f.push_back(path_field("models_root", "checkpoint directory", [](PipelineConfig& c) -> auto& { return c.models_root; }));
    f.push_back(path_field("output_root", "reports and experiment output", [](PipelineConfig& c) -> auto& { return c.output_root; }));
    f.push_back({"seed", "master seed; every model and the dataset derive from it",
                 [](const PipelineConfig& c) { return std::to_string(c.seed); },
                 [](PipelineConfig& c, const Tokens& t) {
                   const long long v = to_integer("seed", t);
                   if (v < 0) throw ConfigError("'seed' must be >= 0");
                   c.seed = static_cast<std::uint64_t>(v);
                 }});

    f.push_back(int_field("dataset.sequences", "motion sequences", [](PipelineConfig& c) -> int& { return c.dataset.sequences; }));
    f.push_back(int_field("dataset.frames", "frames per sequence", [](PipelineConfig& c) -> int& { return c.dataset.frames; }));
    f.push_back(int_field("dataset.resolution", "side of every rendered view in pixels",
                          [](PipelineConfig& c) -> int& { return c.dataset.resolution; }));
    f.push_back(int_field("dataset.texture_size", "texture side (power of two)",
                          [](PipelineConfig& c) -> int& { return c.dataset.texture_size; }));
    f.push_back(int_field("dataset.keyframe_spacing", "frames between motion keyframes",
                          [](PipelineConfig& c) -> int& { return c.dataset.keyframe_spacing; }));
    f.push_back(real_field("dataset.val_fraction", "share of sequences held out for validation",
                           [](PipelineConfig& c) -> double& { return c.dataset.val_fraction; }));
    f.push_back(real_field("dataset.test_fraction", "share of sequences held out for testing",
                           [](PipelineConfig& c) -> double& { return c.dataset.test_fraction; }));
    f.push_back({"dataset.background", "background grey level 0-255",
                 [](const PipelineConfig& c) { return std::to_string(c.dataset.background[0]); },
                 [](PipelineConfig& c, const Tokens& t) {
                   const long long v = to_integer("dataset.background", t);
                   if (v < 0 || v > 255) throw ConfigError("'dataset.background' must lie in 0..255");
                   const auto g = static_cast<std::uint8_t>(v);
                   c.dataset.background = {g, g, g};
                 }});
    f.push_back({"dataset.styles", "motion styles drawn for sequences (walk box jump dance idle)",
                 [](const PipelineConfig& c) {
                   std::string s;
                   for (auto st : c.dataset.styles) s += (s.empty() ? "" : " ") + motion_style_name(st);
                   return s;
                 },
                 [](PipelineConfig& c, const Tokens& t) {
                   if (t.empty()) throw ConfigError("'dataset.styles' needs at least one style");
                   c.dataset.styles.clear();
                   for (const auto& s : t) {
                     try {
                       c.dataset.styles.push_back(parse_motion_style(s));
                     } catch (const std::exception&) {
                       throw ConfigError("'dataset.styles': unknown style '" + s + "'");
                     }
                   }
                 }});
    f.push_back(int_field("dataset.workers", "rendering threads (output does not depend on it)",
                          [](PipelineConfig& c) -> int& { return c.dataset.workers; }));

    f.push_back(real_field("dataset.rig.ego_fov", "egocentric camera vertical field of view (degrees, pinhole)",
                           [](PipelineConfig& c) -> double& { return c.dataset.rig.ego_fov_deg; }));
    f.push_back(real_field("dataset.rig.tp_fov", "third-person camera vertical field of view (degrees)",
                           [](PipelineConfig& c) -> double& { return c.dataset.rig.tp_fov_deg; }));
    f.push_back(real_field("dataset.rig.tp_distance", "third-person camera distance from the hip (meters)",
                           [](PipelineConfig& c) -> double& { return c.dataset.rig.tp_distance; }));
    f.push_back(real_field("dataset.rig.tp_height", "third-person camera height above the hip (meters)",
                           [](PipelineConfig& c) -> double& { return c.dataset.rig.tp_height; }));
    f.push_back(real_field("dataset.rig.tp_aim_height", "world height the third-person cameras look at (meters)",
                           [](PipelineConfig& c) -> double& { return c.dataset.rig.tp_aim_height; }));
    f.push_back({"dataset.rig.tp_mode", "third-person attachment: yaw (follow hip heading) or rigid",
                 [](const PipelineConfig& c) { return std::string(c.dataset.rig.tp_mode == AttachMode::kYawOnly ? "yaw" : "rigid"); },
                 [](PipelineConfig& c, const Tokens& t) {
                   const std::string& v = single("dataset.rig.tp_mode", t);
                   if (v == "yaw") c.dataset.rig.tp_mode = AttachMode::kYawOnly;
                   else if (v == "rigid") c.dataset.rig.tp_mode = AttachMode::kRigid;
                   else throw ConfigError("'dataset.rig.tp_mode' must be yaw or rigid");
                 }});

    f.push_back({"translate.method", "target arrangement A, B or C",
                 [](const PipelineConfig& c) { return arrangement_name(c.translate.method); },
                 [](PipelineConfig& c, const Tokens& t) {
                   try {
                     c.translate.method = parse_arrangement(single("translate.method", t));
                   } catch (const InvalidArgument& e) {
                     throw ConfigError(std::string("'translate.method': ") + e.what());
                   }
                 }});
    network_fields(f, "translate", [](PipelineConfig& c) -> NetworkSize& { return c.translate_net; });
    gan_train_fields(f, "translate", [](PipelineConfig& c) -> TrainConfig& { return c.translate; });

    f.push_back(int_field("recover.base", "encoder channels at the first level", [](PipelineConfig& c) -> int& { return c.regressor.base; }));
    f.push_back(int_field("recover.depth", "stride-2 encoder levels", [](PipelineConfig& c) -> int& { return c.regressor.depth; }));
    f.push_back(int_field("recover.feature", "image feature size", [](PipelineConfig& c) -> int& { return c.regressor.feature; }));
    f.push_back(int_field("recover.hidden", "refinement MLP width", [](PipelineConfig& c) -> int& { return c.regressor.hidden; }));
    f.push_back(int_field("recover.ief_iters", "iterative error feedback iterations",
                          [](PipelineConfig& c) -> int& { return c.regressor.ief_iters; }));
    f.push_back(int_field("recover.prior_hidden", "pose prior discriminator width",
                          [](PipelineConfig& c) -> int& { return c.prior.hidden; }));
    f.push_back(real_field("recover.lambda", "weight of the reprojection and 3D terms",
                           [](PipelineConfig& c) -> double& { return c.recover.lambda; }));
    f.push_back(bool_field("recover.use_3d", "include the 3D term", [](PipelineConfig& c) -> bool& { return c.recover.use_3d; }));
    f.push_back(real_field("recover.w_joints", "3D term: weight of the joint MSE",
                           [](PipelineConfig& c) -> double& { return c.recover.weights_3d.joints; }));
    f.push_back(real_field("recover.w_params", "3D term: weight of the parameter MSE",
                           [](PipelineConfig& c) -> double& { return c.recover.weights_3d.params; }));
    f.push_back(real_field("recover.lr", "regressor Adam learning rate", [](PipelineConfig& c) -> double& { return c.recover.lr; }));
    f.push_back(real_field("recover.lr_prior", "prior Adam learning rate", [](PipelineConfig& c) -> double& { return c.recover.lr_prior; }));
    f.push_back(int_field("recover.batch", "frames per step", [](PipelineConfig& c) -> int& { return c.recover.batch; }));
    f.push_back(int_field("recover.steps", "training steps", [](PipelineConfig& c) -> int& { return c.recover.max_steps; }));
    f.push_back(int_field("recover.checkpoint_interval", "steps between checkpoints",
                          [](PipelineConfig& c) -> int& { return c.recover.checkpoint_interval; }));

    network_fields(f, "texture", [](PipelineConfig& c) -> NetworkSize& { return c.texture_net; });
    gan_train_fields(f, "texture", [](PipelineConfig& c) -> TrainConfig& { return c.texture; });

    f.push_back(int_field("eval.max_frames", "test frames scored (0 = all)", [](PipelineConfig& c) -> int& { return c.eval_max_frames; }));
    f.push_back(int_field("eval.timing_samples", "timed inferences after 3 warm-up runs",
                          [](PipelineConfig& c) -> int& { return c.eval_timing_samples; }));

    f.push_back(int_field("experiment.steps", "training steps per arrangement",
                          [](PipelineConfig& c) -> int& { return c.experiment.steps; }));
    f.push_back(int_field("experiment.max_train_frames", "train frames used (0 = all)",
                          [](PipelineConfig& c) -> int& { return c.experiment.max_train_frames; }));
    f.push_back(int_field("experiment.max_test_frames", "test frames scored (0 = all)",
                          [](PipelineConfig& c) -> int& { return c.experiment.max_test_frames; }));
    f.push_back(real_field("experiment.max_seconds", "wall-clock limit per arrangement (0 = none)",
                           [](PipelineConfig& c) -> double& { return c.experiment.max_seconds; }));
    return f;
  }();
  return f;
}

inline const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

}  // namespace config_detail

/// The full default configuration, one documented key per entry.
inline std::string config_text(const PipelineConfig& c) {
  std::ostringstream o;
  o << "# egobody pipeline configuration\n"
    << "# Every key is listed with its default. Command-line `--key value` overrides any entry.\n";
  std::string section;
  for (const auto& f : config_detail::fields()) {
    const auto dot = f.key.find('.');
    const std::string s = dot == std::string::npos ? "" : f.key.substr(0, dot);
    if (s != section) {
      o << "\n# --- " << s << "\n";
      section = s;
    }
    o << "# " << f.doc << "\n" << f.key << ": " << f.get(c) << "\n";
  }
  return o.str();
}

inline void apply_setting(PipelineConfig& c, const std::string& key, const std::vector<std::string>& tokens,
                          const std::string& where) {
  const auto* f = config_detail::find_field(key);
  if (!f) throw ConfigError(where + ": unknown configuration key '" + key + "'");
  try {
    f->set(c, tokens);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

/// Defaults, then the file (if any), then overrides in order.
inline PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file,
                                           const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  PipelineConfig c;
  if (file) {
    if (!std::filesystem::exists(*file)) throw ConfigError("config file not found: " + file->string());
    const kv::Document d = kv::Document::load(*file);
    for (const auto& key : d.keys()) {
      const kv::Entry& e = d.entry(key);
      if (e.is_matrix) throw ConfigError(file->string() + ":" + std::to_string(e.line) + ": '" + key + "' must not be a matrix");
      apply_setting(c, key, e.tokens, file->string() + ":" + std::to_string(e.line));
    }
  }
  for (const auto& [k, v] : overrides) {
    std::vector<std::string> tokens;
    std::istringstream in(v);
    for (std::string t; in >> t;) tokens.push_back(t);
    apply_setting(c, k, tokens, "--" + k);
  }
  c.sync();
  c.validate();
  return c;
}

}  // namespace egobody
