#pragma once

// Layouts that combine the front/back third-person views into one target
// image, and the stacked egocentric input.
//
//   A: front above back, 2H x W
//   B: front left of back, H x 2W
//   C: B rotated 90 degrees clockwise, 2W x H (front on top)

#include <string>
#include <utility>

#include "egobody/core/error.hpp"
#include "egobody/core/image.hpp"

namespace egobody {

enum class Arrangement { kA, kB, kC };

inline Arrangement parse_arrangement(const std::string& s) {
  if (s == "A" || s == "a") return Arrangement::kA;
  if (s == "B" || s == "b") return Arrangement::kB;
  if (s == "C" || s == "c") return Arrangement::kC;
  throw InvalidArgument("unknown arrangement '" + s + "' (expected A, B or C)");
}

inline std::string arrangement_name(Arrangement m) {
  switch (m) {
    case Arrangement::kA: return "A";
    case Arrangement::kB: return "B";
    case Arrangement::kC: return "C";
  }
  return "?";
}

/// Size of the arranged image for views of w x h.
inline std::pair<int, int> arranged_size(int w, int h, Arrangement m) {
  switch (m) {
    case Arrangement::kA: return {w, 2 * h};
    case Arrangement::kB: return {2 * w, h};
    case Arrangement::kC: return {h, 2 * w};
  }
  return {0, 0};
}

/// Ego front above ego back.
inline Image stack_ego(const Image& front, const Image& back) {
  if (!front.same_shape(back)) throw InvalidArgument("stack_ego: views differ in size");
  return vstack(front, back);
}

inline std::pair<Image, Image> unstack_ego(const Image& stacked) {
  if (stacked.height % 2 != 0) throw InvalidArgument("unstack_ego: height must be even");
  const int h = stacked.height / 2;
  return {crop(stacked, 0, 0, stacked.width, h), crop(stacked, 0, h, stacked.width, h)};
}

inline Image arrange_target(const Image& front, const Image& back, Arrangement m) {
  if (!front.same_shape(back)) throw InvalidArgument("arrange_target: views differ in size");
  switch (m) {
    case Arrangement::kA: return vstack(front, back);
    case Arrangement::kB: return hstack(front, back);
    case Arrangement::kC: return rotate90_cw(hstack(front, back));
  }
  throw InvalidArgument("arrange_target: bad method");
}

inline std::pair<Image, Image> unarrange_target(const Image& arranged, Arrangement m) {
  switch (m) {
    case Arrangement::kA: {
      if (arranged.height % 2 != 0) throw InvalidArgument("unarrange_target: A needs an even height");
      const int h = arranged.height / 2;
      return {crop(arranged, 0, 0, arranged.width, h), crop(arranged, 0, h, arranged.width, h)};
    }
    case Arrangement::kB: {
      if (arranged.width % 2 != 0) throw InvalidArgument("unarrange_target: B needs an even width");
      const int w = arranged.width / 2;
      return {crop(arranged, 0, 0, w, arranged.height), crop(arranged, w, 0, w, arranged.height)};
    }
    case Arrangement::kC: return unarrange_target(rotate90_ccw(arranged), Arrangement::kB);
  }
  throw InvalidArgument("unarrange_target: bad method");
}

}  // namespace egobody
