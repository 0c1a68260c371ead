#pragma once

// Egocentric pair -> translated views -> body parameters -> mesh and texture.

#include <chrono>

#include "egobody/recover/recovery.hpp"
#include "egobody/texture/texture_gen.hpp"

namespace egobody {

struct PipelineModels {
  GanModel& translation;
  RecoveryModel& recovery;
  GanModel& texture;
  const BodyModelAsset& asset;
};

struct StageSeconds {
  double translation = 0;
  double recovery = 0;
  double texture = 0;
};

struct InferenceResult {
  Image arranged;  ///< translated view in the translation model's arrangement
  Image tp_front, tp_back;
  ThetaFull theta;
  MeshAsset mesh;
  TextureMap texture;
  StageSeconds seconds;
};

/// Dropout stays off so the result depends only on the inputs and weights.
inline InferenceResult run_inference(PipelineModels& m, const Image& ego_front, const Image& ego_back) {
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
  if (!ego_front.same_shape(ego_back)) throw InvalidArgument("ego_front and ego_back differ in size");
  InferenceResult r;
  auto t0 = clock::now();
  r.arranged = translate(m.translation, vstack(ego_front, ego_back), false);
  std::tie(r.tp_front, r.tp_back) = unarrange_target(r.arranged, m.translation.train_config().method);
  auto t1 = clock::now();
  r.theta = m.recovery.recover(r.tp_front);
  r.mesh = forward(m.asset, r.theta.params());
  auto t2 = clock::now();
  r.texture = generate_texture(m.texture, arrange_target(r.tp_front, r.tp_back, Arrangement::kC), false);
  auto t3 = clock::now();
  r.seconds = {secs(t0, t1), secs(t1, t2), secs(t2, t3)};
  return r;
}

}  // namespace egobody
