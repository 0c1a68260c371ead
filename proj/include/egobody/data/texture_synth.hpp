#pragma once

// Procedural clothing textures laid out on the humanoid UV atlas.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "egobody/body/humanoid.hpp"
#include "egobody/core/random.hpp"
#include "egobody/render/rasterizer.hpp"

namespace egobody {

/// Region of each texel of a size x size atlas texture (row-major, row 0 =
/// top). The face patch on the front of the head is skin.
inline std::vector<SurfaceRegion> texture_region_map(int size) {
  namespace L = humanoid_layout;
  const auto parts = L::parts();
  std::vector<SurfaceRegion> map(static_cast<std::size_t>(size) * size, SurfaceRegion::kSkin);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = 1.0 - (y + 0.5) / size;
      const int col = std::min(static_cast<int>(u * L::kAtlasCols), L::kAtlasCols - 1);
      const int row = std::min(static_cast<int>((1.0 - v) * L::kAtlasRows), L::kAtlasRows - 1);
      const int p = row * L::kAtlasCols + col;
      if (p >= static_cast<int>(parts.size())) continue;
      SurfaceRegion r = parts[p].region;
      if (parts[p].name == "head") {
        const UvCell c = L::cell(p);
        const double lu = (u - c.u0) / (c.u1 - c.u0), lv = (v - c.v0) / (c.v1 - c.v0);
        if (lu > 0.3 && lu < 0.7 && lv > 0.15 && lv < 0.6) r = SurfaceRegion::kSkin;
      }
      map[static_cast<std::size_t>(y) * size + x] = r;
    }
  }
  return map;
}

namespace texture_palette {
inline constexpr std::array<Rgb, 6> kSkin = {{{241, 194, 167}, {224, 172, 138}, {198, 134, 96}, {161, 102, 70}, {120, 75, 50}, {88, 56, 38}}};
inline constexpr std::array<Rgb, 5> kHair = {{{30, 24, 20}, {70, 45, 25}, {130, 90, 50}, {200, 170, 110}, {90, 90, 90}}};
inline constexpr std::array<Rgb, 10> kShirt = {{{200, 40, 40}, {40, 90, 200}, {40, 160, 70}, {230, 200, 40}, {240, 240, 240},
                                               {30, 30, 30}, {140, 60, 170}, {240, 130, 30}, {60, 180, 190}, {230, 120, 160}}};
inline constexpr std::array<Rgb, 8> kPants = {{{30, 40, 90}, {20, 20, 20}, {110, 110, 115}, {150, 120, 80},
                                               {60, 80, 50}, {170, 160, 140}, {90, 30, 30}, {60, 100, 160}}};
inline constexpr std::array<Rgb, 5> kShoe = {{{20, 20, 20}, {240, 240, 240}, {120, 70, 40}, {200, 30, 30}, {50, 60, 140}}};
}  // namespace texture_palette

enum class ShirtPattern { kPlain, kStripes, kBlocks };

struct TextureRecipe {
  Rgb skin, hair, shirt, shirt_alt, pants, shoe;
  ShirtPattern pattern = ShirtPattern::kPlain;
  int period = 8;  ///< pattern period in texels at 256
};

inline TextureRecipe sample_texture_recipe(std::uint64_t seed) {
  namespace P = texture_palette;
  Rng rng(derive_seed(seed, 0x74657874757265ULL));
  TextureRecipe r;
  r.skin = P::kSkin[rng.index(P::kSkin.size())];
  r.hair = P::kHair[rng.index(P::kHair.size())];
  const std::size_t shirt = rng.index(P::kShirt.size());
  r.shirt = P::kShirt[shirt];
  r.shirt_alt = P::kShirt[(shirt + 1 + rng.index(P::kShirt.size() - 1)) % P::kShirt.size()];
  r.pants = P::kPants[rng.index(P::kPants.size())];
  r.shoe = P::kShoe[rng.index(P::kShoe.size())];
  if (rng.bernoulli(0.5)) r.pattern = rng.bernoulli(0.5) ? ShirtPattern::kStripes : ShirtPattern::kBlocks;
  r.period = 6 + static_cast<int>(rng.index(10));
  return r;
}

/// Deterministic texture for a seed; per-texel noise of +-6 levels.
inline TextureMap make_procedural_texture(std::uint64_t seed, int size = 256) {
  const TextureRecipe recipe = sample_texture_recipe(seed);
  const auto regions = texture_region_map(size);
  Rng noise(derive_seed(seed, 0x6e6f697365ULL));
  const int period = std::max(2, recipe.period * size / 256);
  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgb c{};
      switch (regions[static_cast<std::size_t>(y) * size + x]) {
        case SurfaceRegion::kSkin: c = recipe.skin; break;
        case SurfaceRegion::kHair: c = recipe.hair; break;
        case SurfaceRegion::kPants: c = recipe.pants; break;
        case SurfaceRegion::kShoe: c = recipe.shoe; break;
        case SurfaceRegion::kShirt: {
          bool alt = false;
          if (recipe.pattern == ShirtPattern::kStripes) alt = (y / period) % 2 == 1;
          if (recipe.pattern == ShirtPattern::kBlocks) alt = ((x / period) + (y / period)) % 2 == 1;
          c = alt ? recipe.shirt_alt : recipe.shirt;
          break;
        }
      }
      const int n = static_cast<int>(noise.index(13)) - 6;
      for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::clamp(c[k] + n, 0, 255));
      img.set(x, y, c);
    }
  }
  return TextureMap(std::move(img));
}

/// Mean color over texels of one region.
inline std::array<double, 3> region_mean_color(const TextureMap& tex, SurfaceRegion region) {
  const auto regions = texture_region_map(tex.size());
  std::array<double, 3> sum{};
  std::size_t n = 0;
  for (int y = 0; y < tex.size(); ++y)
    for (int x = 0; x < tex.size(); ++x) {
      if (regions[static_cast<std::size_t>(y) * tex.size() + x] != region) continue;
      const Rgb c = tex.image.rgb(x, y);
      for (int k = 0; k < 3; ++k) sum[k] += c[k];
      ++n;
    }
  if (n)
    for (auto& s : sum) s /= static_cast<double>(n);
  return sum;
}

}  // namespace egobody
