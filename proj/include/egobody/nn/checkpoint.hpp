#pragma once

// Checkpoint file:
//   "EGOCKPT1\n", u64 header length, header (key/value text),
//   then for each parameter group, for each parameter: value, m, v as raw
//   little-endian scalars.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "egobody/core/kvtext.hpp"
#include "egobody/nn/tensor.hpp"

namespace egobody::nn {

inline constexpr char kCheckpointMagic[] = "EGOCKPT1\n";
inline constexpr int kCheckpointVersion = 1;

template <class T>
using ParamGroup = std::pair<std::string, std::vector<Param<T>*>>;

template <class T>
void save_checkpoint(const std::filesystem::path& path, kv::Document header, const std::vector<ParamGroup<T>>& groups) {
  header.set("checkpoint_version", kCheckpointVersion);
  header.set("scalar_bytes", static_cast<int>(sizeof(T)));
  for (const auto& [name, ps] : groups) header.set("group." + name + ".elements", static_cast<long long>(count_params(ps)));
  const std::string text = header.to_string();
  std::string bytes(kCheckpointMagic);
  const std::uint64_t len = text.size();
  bytes.append(reinterpret_cast<const char*>(&len), sizeof(len));
  bytes += text;
  for (const auto& [name, ps] : groups)
    for (const auto* p : ps)
      for (const auto* t : {&p->value, &p->m, &p->v})
        bytes.append(reinterpret_cast<const char*>(t->data.data()), t->size() * sizeof(T));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  write_file_bytes(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

/// Reads only the header.
inline kv::Document read_checkpoint_header(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifact("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  std::string magic(magic_len, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic_len));
  if (!in || magic != kCheckpointMagic) throw ParseError(path.string(), 0, "not a checkpoint file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) throw ParseError(path.string(), 0, "corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError(path.string(), 0, "truncated checkpoint header");
  kv::Document d = kv::Document::parse(text, path.string());
  if (d.get_int("checkpoint_version") != kCheckpointVersion)
    throw ConfigError(path.string() + ": checkpoint version " + d.get_string("checkpoint_version") + " is not supported");
  return d;
}

/// Loads parameters into `groups`; sizes must match the header.
template <class T>
kv::Document load_checkpoint(const std::filesystem::path& path, const std::vector<ParamGroup<T>>& groups) {
  kv::Document d = read_checkpoint_header(path);
  if (d.get_int("scalar_bytes") != static_cast<int>(sizeof(T)))
    throw ConfigError(path.string() + ": checkpoint scalar type differs from the model's");
  for (const auto& [name, ps] : groups) {
    const std::string key = "group." + name + ".elements";
    if (!d.has(key)) throw ConfigError(path.string() + ": checkpoint has no parameter group '" + name + "'");
    if (static_cast<std::size_t>(d.get_number(key)) != count_params(ps))
      throw ConfigError(path.string() + ": parameter count of '" + name + "' differs from the configured model");
  }
  const auto bytes = read_file_bytes(path);
  std::uint64_t len = 0;
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  std::memcpy(&len, bytes.data() + magic_len, sizeof(len));
  std::size_t off = magic_len + sizeof(len) + len;
  for (const auto& [name, ps] : groups)
    for (auto* p : ps)
      for (auto* t : {&p->value, &p->m, &p->v}) {
        const std::size_t n = t->size() * sizeof(T);
        if (off + n > bytes.size()) throw ParseError(path.string(), 0, "truncated checkpoint data");
        std::memcpy(t->data.data(), bytes.data() + off, n);
        off += n;
      }
  if (off != bytes.size()) throw ParseError(path.string(), 0, "trailing bytes in checkpoint");
  return d;
}

/// Throws ConfigError naming the first key whose value differs.
inline void require_same_config(const kv::Document& saved, const kv::Document& expected, const std::string& what) {
  for (const auto& key : expected.keys()) {
    if (!saved.has(key)) throw ConfigError(what + ": checkpoint lacks config key '" + key + "'");
    const auto& a = saved.entry(key).tokens;
    const auto& b = expected.entry(key).tokens;
    if (a != b) {
      std::string sa, sb;
      for (const auto& t : a) sa += (sa.empty() ? "" : " ") + t;
      for (const auto& t : b) sb += (sb.empty() ? "" : " ") + t;
      throw ConfigError(what + ": config mismatch for '" + key + "' (checkpoint " + sa + ", configured " + sb + ")");
    }
  }
}

}  // namespace egobody::nn
