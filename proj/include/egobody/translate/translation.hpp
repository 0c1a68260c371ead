#pragma once

// Egocentric -> third-person view translation and the dataset-driven
// training loop shared with texture generation.

#include <chrono>
#include <functional>
#include <optional>

#include "egobody/data/dataset.hpp"
#include "egobody/translate/pix2pix.hpp"

namespace egobody {

using Real = float;
using GanModel = Pix2Pix<Real>;

inline constexpr const char* kTranslationKind = "view_translation";
inline constexpr const char* kTextureKind = "texture_gen";

struct NetworkSize {
  int base = 32;
  int depth = 5;
  int disc_base = 32;
  int disc_layers = 3;
  double dropout = 0.5;
  bool use_skip = true;
};

/// Model for views of `resolution`: the stacked ego input (2R x R) maps to
/// the arranged target of the training method.
inline GanModel make_translation_model(int resolution, const NetworkSize& size, const TrainConfig& train) {
  GeneratorConfig g;
  g.in_w = resolution;
  g.in_h = 2 * resolution;
  const auto [ow, oh] = arranged_size(resolution, resolution, train.method);
  g.out_w = ow;
  g.out_h = oh;
  g.base = size.base;
  g.depth = size.depth;
  g.dropout = size.dropout;
  g.use_skip = size.use_skip;
  DiscriminatorConfig d;
  d.base = size.disc_base;
  d.layers = size.disc_layers;
  return GanModel(g, d, train);
}

/// Input and target images of one training pair.
using PairFn = std::function<std::pair<Image, Image>(const FrameRecord&)>;

inline PairFn translation_pairs(Arrangement method) {
  return [method](const FrameRecord& r) {
    return std::make_pair(r.ego_stacked(), arrange_target(r.tp_front, r.tp_back, method));
  };
}

/// Translated third-person image in the model's arrangement.
inline Image translate(GanModel& g, const Image& ego_stacked, bool dropout = true) { return g.generate(ego_stacked, dropout); }

struct TrainLoopOptions {
  int steps = 0;  ///< additional steps to run
  std::optional<std::filesystem::path> metrics_csv;
  std::optional<std::filesystem::path> checkpoint;
  std::string kind = kTranslationKind;
  std::function<void(const GanMetrics&)> on_step;
};

/// Loads training pairs for the train split. Frames are decoded once.
struct PairCache {
  std::vector<nn::Tensor<Real>> inputs, targets;
};

inline PairCache load_pairs(GanModel& model, const DatasetManifest& m, const std::vector<std::size_t>& frames, const PairFn& pairs) {
  PairCache c;
  for (std::size_t i : frames) {
    const auto [in, tgt] = pairs(load_frame(m, i));
    c.inputs.push_back(model.input_tensor(in));
    c.targets.push_back(model.target_tensor(tgt));
  }
  return c;
}

/// Runs `opt.steps` steps with batches drawn from `cache` by a seeded RNG.
inline std::vector<GanMetrics> train_gan(GanModel& model, const PairCache& cache, const TrainLoopOptions& opt) {
  if (cache.inputs.empty()) throw ConfigError("no training pairs (is the train split empty?)");
  std::optional<MetricsCsv> csv;
  if (opt.metrics_csv) csv.emplace(*opt.metrics_csv);
  const TrainConfig& tc = model.train_config();
  std::vector<GanMetrics> trace;
  for (int s = 0; s < opt.steps; ++s) {
    Rng rng(derive_seed(tc.seed, 0x62617463ULL, static_cast<std::uint64_t>(model.step())));
    std::vector<nn::Tensor<Real>> xs, ys;
    for (int b = 0; b < tc.batch; ++b) {
      const std::size_t k = rng.index(cache.inputs.size());
      xs.push_back(cache.inputs[k]);
      ys.push_back(cache.targets[k]);
    }
    const GanMetrics m = model.train_step(nn::stack_batch(xs), nn::stack_batch(ys));
    trace.push_back(m);
    if (csv) csv->append(m);
    if (opt.on_step) opt.on_step(m);
    if (opt.checkpoint && (m.step % tc.checkpoint_interval == 0)) model.save(*opt.checkpoint, opt.kind);
  }
  if (opt.checkpoint) model.save(*opt.checkpoint, opt.kind);
  return trace;
}

}  // namespace egobody
