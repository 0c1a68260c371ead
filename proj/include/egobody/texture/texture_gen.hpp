#pragma once

// Arranged third-person views -> UV texture map for the body atlas.

#include "egobody/translate/translation.hpp"

namespace egobody {

/// Model for views of `resolution` producing a texture_size x texture_size map.
/// The Method C input (R wide, 2R tall) is resized to the texture geometry.
inline GanModel make_texture_model(int resolution, int texture_size, const NetworkSize& size, TrainConfig train) {
  if (texture_size <= 0 || (texture_size & (texture_size - 1)) != 0)
    throw ConfigError("texture_size must be a power of two, got " + std::to_string(texture_size));
  train.method = Arrangement::kC;
  GeneratorConfig g;
  const auto [iw, ih] = arranged_size(resolution, resolution, Arrangement::kC);
  g.in_w = iw;
  g.in_h = ih;
  g.out_w = g.out_h = texture_size;
  g.base = size.base;
  g.depth = size.depth;
  g.dropout = size.dropout;
  g.use_skip = size.use_skip;
  DiscriminatorConfig d;
  d.base = size.disc_base;
  d.layers = size.disc_layers;
  return GanModel(g, d, train);
}

inline PairFn texture_pairs() {
  return [](const FrameRecord& r) {
    return std::make_pair(arrange_target(r.tp_front, r.tp_back, Arrangement::kC), r.texture.image);
  };
}

inline TextureMap generate_texture(GanModel& g, const Image& tp_arranged, bool dropout = true) {
  return TextureMap(g.generate(tp_arranged, dropout));
}

}  // namespace egobody
