#pragma once

#include <filesystem>

#include "egobody/body/body_model.hpp"
#include "egobody/core/kvtext.hpp"

namespace egobody {

inline void put_params(kv::Document& doc, const BodyParams& p) {
  doc.set_list("beta", std::vector<double>(p.beta.data(), p.beta.data() + kNumBetas));
  doc.set_list("theta", std::vector<double>(p.theta.data(), p.theta.data() + kNumPose));
}

inline BodyParams get_params(const kv::Document& doc) {
  const auto beta = doc.get_list("beta");
  const auto theta = doc.get_list("theta");
  if (beta.size() != kNumBetas) throw ParseError(doc.file(), doc.entry("beta").line, "beta must have 10 values");
  if (theta.size() != kNumPose) throw ParseError(doc.file(), doc.entry("theta").line, "theta must have 72 values");
  BodyParams p;
  for (int i = 0; i < kNumBetas; ++i) p.beta[i] = beta[i];
  for (int i = 0; i < kNumPose; ++i) p.theta[i] = theta[i];
  p.validate();
  return p;
}

inline void save_params(const std::filesystem::path& path, const BodyParams& p) {
  kv::Document doc;
  doc.set("format_version", 1);
  doc.set("kind", "body_params");
  put_params(doc, p);
  doc.save(path);
}

/// Reads `beta` and `theta` from any params or frame-meta file.
inline BodyParams load_params(const std::filesystem::path& path) { return get_params(kv::Document::load(path)); }

}  // namespace egobody
