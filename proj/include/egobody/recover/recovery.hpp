#pragma once

// Dataset plumbing and the training loop for mesh recovery.

#include "egobody/recover/regressor.hpp"
#include "egobody/translate/translation.hpp"

namespace egobody {

using RecoveryModel = MeshRecovery<Real>;

/// Third-person front views and their supervision.
struct RecoverySet {
  std::vector<nn::Tensor<Real>> images;
  std::vector<RecoveryTarget> targets;
};

inline RecoverySet load_recovery_set(const RecoveryModel& model, const DatasetManifest& m,
                                     const std::vector<std::size_t>& frames) {
  RecoverySet s;
  for (std::size_t i : frames) {
    const FrameRecord r = load_frame(m, i);
    s.images.push_back(model.input_tensor(r.tp_front));
    s.targets.push_back(make_recovery_target(model.basis(), r, r.tp_front.width, r.tp_front.height));
  }
  return s;
}

struct RecoveryLoopOptions {
  int steps = 0;
  std::optional<std::filesystem::path> metrics_csv;
  std::optional<std::filesystem::path> checkpoint;
  std::function<void(const RecoveryMetrics&)> on_step;
};

/// Runs `opt.steps` steps. Real samples for the prior come from the set's
/// ground-truth parameters.
inline std::vector<RecoveryMetrics> train_recovery(RecoveryModel& model, const RecoverySet& set,
                                                   const RecoveryLoopOptions& opt) {
  if (set.images.empty()) throw ConfigError("no recovery training frames (is the train split empty?)");
  std::optional<RecoveryCsv> csv;
  if (opt.metrics_csv) csv.emplace(*opt.metrics_csv);
  const RecoveryTrainConfig& tc = model.train_config();
  std::vector<RecoveryMetrics> trace;
  for (int s = 0; s < opt.steps; ++s) {
    Rng rng(derive_seed(tc.seed, 0x72656362ULL, static_cast<std::uint64_t>(model.step())));
    std::vector<nn::Tensor<Real>> xs;
    std::vector<RecoveryTarget> ts;
    std::vector<ThetaVector<double>> real;
    for (int b = 0; b < tc.batch; ++b) {
      const std::size_t k = rng.index(set.images.size());
      xs.push_back(set.images[k]);
      ts.push_back(set.targets[k]);
      real.push_back(set.targets[rng.index(set.targets.size())].x);
    }
    const RecoveryMetrics m = model.train_step(nn::stack_batch(xs), ts, real);
    trace.push_back(m);
    if (csv) csv->append(m);
    if (opt.on_step) opt.on_step(m);
    if (opt.checkpoint && m.step % tc.checkpoint_interval == 0) model.save(*opt.checkpoint);
  }
  if (opt.checkpoint) model.save(*opt.checkpoint);
  return trace;
}

/// Mean root-aligned per-joint 3D error (meters) of recovered parameters.
inline double mean_joint_error(const JointShapeBasis& basis, const ThetaFull& pred, const RecoveryTarget& gt) {
  const JointMat j = root_aligned_joints<double>(basis, pred.to_vector());
  return (j - gt.joints3d).rowwise().norm().mean();
}

}  // namespace egobody
