#pragma once

// Paired egocentric / third-person dataset on disk.
//
//   root/manifest
//   root/seq_0000/frame_00000_{ego_front,ego_back,tp_front,tp_back,texture}.png
//   root/seq_0000/frame_00000_meta

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "egobody/body/humanoid.hpp"
#include "egobody/body/params_io.hpp"
#include "egobody/camera/rig.hpp"
#include "egobody/core/hash.hpp"
#include "egobody/core/image.hpp"
#include "egobody/core/kvtext.hpp"
#include "egobody/data/motion.hpp"
#include "egobody/data/texture_synth.hpp"
#include "egobody/render/rasterizer.hpp"

namespace egobody {

namespace fs = std::filesystem;

enum class Split { kTrain, kVal, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw InvalidArgument("unknown split '" + s + "'");
}

struct DatasetConfig {
  int sequences = 40;
  int frames = 50;  ///< per sequence
  int resolution = 128;
  int texture_size = 256;
  int keyframe_spacing = 20;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  Rgb background{128, 128, 128};
  std::vector<MotionStyle> styles{MotionStyle::kWalk, MotionStyle::kBox, MotionStyle::kJump, MotionStyle::kDance,
                                  MotionStyle::kIdle};
  int workers = 1;  ///< rendering threads; output does not depend on it
  RigOptions rig;    ///< resolution is taken from `resolution`

  void validate() const {
    if (sequences < 1) throw ValidationError("dataset.sequences", "sequences must be >= 1");
    if (frames < 1) throw ValidationError("dataset.frames", "frames must be >= 1");
    if (resolution < 8) throw ValidationError("dataset.resolution", "resolution must be >= 8");
    if (texture_size < 1 || (texture_size & (texture_size - 1)) != 0)
      throw ValidationError("dataset.texture_size", "texture size must be a power of two");
    if (keyframe_spacing < 1) throw ValidationError("dataset.keyframe_spacing", "keyframe spacing must be >= 1");
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1)
      throw ValidationError("dataset.split", "val and test fractions must be >= 0 and sum below 1");
    if (styles.empty()) throw ValidationError("dataset.styles", "at least one motion style is required");
    if (workers < 1) throw ValidationError("dataset.workers", "workers must be >= 1");
  }

  RigOptions rig_options() const {
    RigOptions r = rig;
    r.resolution = resolution;
    return r;
  }

  /// Fingerprint of everything that affects the generated bytes.
  std::uint64_t hash() const {
    std::string s = std::to_string(sequences) + "|" + std::to_string(frames) + "|" + std::to_string(resolution) + "|" +
                    std::to_string(texture_size) + "|" + std::to_string(keyframe_spacing) + "|" +
                    kv::format_number(val_fraction) + "|" + kv::format_number(test_fraction) + "|";
    for (auto c : background) s += std::to_string(c) + ",";
    for (auto st : styles) s += motion_style_name(st) + ",";
    const RigOptions r = rig_options();
    for (const auto& c : rig_default(r)) {
      s += c.name + ":" + std::to_string(c.attach_joint) + ":" + kv::format_number(c.fov_deg);
      for (int i = 0; i < 3; ++i) s += ":" + kv::format_number(c.local_offset[i]);
      for (int i = 0; i < 9; ++i) s += ":" + kv::format_number(c.local_rotation(i));
      s += c.mode == AttachMode::kRigid ? ":rigid|" : ":yaw|";
    }
    return fnv1a(s);
  }
};

inline std::string sequence_dir(int seq) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%04d", seq);
  return buf;
}

/// Relative path prefix of a frame, e.g. "seq_0001/frame_00004".
inline std::string frame_prefix(int seq, int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/frame_%05d", frame);
  return sequence_dir(seq) + buf;
}

inline const std::array<std::string, 5>& frame_image_names() {
  static const std::array<std::string, 5> n = {"ego_front", "ego_back", "tp_front", "tp_back", "texture"};
  return n;
}

struct FrameRecord {
  Image ego_front, ego_back, tp_front, tp_back;
  TextureMap texture;
  BodyParams params;
  Eigen::MatrixX3d joints3d;
  Joints2D joints2d_tp_front;
  Eigen::Matrix4d tp_front_pose = Eigen::Matrix4d::Identity();  ///< camera-to-world
  int frame_id = 0;
  int sequence_id = 0;
  std::string style;

  Image ego_stacked() const { return vstack(ego_front, ego_back); }
};

struct ManifestEntry {
  int sequence = 0;
  int frame = 0;
  Split split = Split::kTrain;
  std::string prefix;
  std::uint64_t content_hash = 0;
};

struct DatasetManifest {
  fs::path root;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  DatasetConfig config;
  std::vector<ManifestEntry> entries;

  std::size_t frame_count() const { return entries.size(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].split == s) out.push_back(i);
    return out;
  }

  fs::path image_path(std::size_t i, const std::string& view) const {
    return root / (entries.at(i).prefix + "_" + view + ".png");
  }
  fs::path meta_path(std::size_t i) const { return root / (entries.at(i).prefix + "_meta"); }

  kv::Document to_document() const {
    kv::Document d;
    d.set("format_version", 1);
    d.set("kind", "dataset_manifest");
    d.set("seed", std::to_string(seed));
    d.set("config_hash", hex64(config_hash));
    d.set("sequences", config.sequences);
    d.set("frames_per_sequence", config.frames);
    d.set("resolution", config.resolution);
    d.set("texture_size", config.texture_size);
    d.set("keyframe_spacing", config.keyframe_spacing);
    d.set("val_fraction", config.val_fraction);
    d.set("test_fraction", config.test_fraction);
    d.set_list("background", std::vector<int>(config.background.begin(), config.background.end()));
    std::string styles;
    for (auto s : config.styles) styles += (styles.empty() ? "" : ",") + motion_style_name(s);
    d.set("styles", styles);
    d.set("rig_ego_fov", config.rig.ego_fov_deg);
    d.set("rig_tp_fov", config.rig.tp_fov_deg);
    d.set("rig_tp_distance", config.rig.tp_distance);
    d.set("rig_tp_height", config.rig.tp_height);
    d.set("rig_tp_aim_height", config.rig.tp_aim_height);
    d.set("rig_tp_mode", config.rig.tp_mode == AttachMode::kYawOnly ? "yaw" : "rigid");
    d.set("frame_count", static_cast<int>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      char key[32];
      std::snprintf(key, sizeof(key), "frame_%06zu", i);
      d.set(key, entries[i].prefix + " " + split_name(entries[i].split) + " " + hex64(entries[i].content_hash));
    }
    return d;
  }

  void save() const { to_document().save(root / "manifest"); }

  /// Loads root/manifest and checks that every listed file exists.
  static DatasetManifest load(const fs::path& root) {
    const fs::path path = root / "manifest";
    if (!fs::exists(path)) throw MissingArtifact("no dataset manifest at " + path.string() + " (run gen-data first)");
    const kv::Document d = kv::Document::load(path);
    if (d.get_string("kind") != "dataset_manifest") throw ParseError(path.string(), 0, "not a dataset manifest");
    DatasetManifest m;
    m.root = root;
    m.seed = std::stoull(d.get_string("seed"));
    m.config_hash = std::stoull(d.get_string("config_hash"), nullptr, 16);
    m.config.sequences = d.get_int("sequences");
    m.config.frames = d.get_int("frames_per_sequence");
    m.config.resolution = d.get_int("resolution");
    m.config.texture_size = d.get_int("texture_size");
    m.config.keyframe_spacing = d.get_int("keyframe_spacing");
    m.config.val_fraction = d.get_number("val_fraction");
    m.config.test_fraction = d.get_number("test_fraction");
    const auto bg = d.get_list("background");
    if (bg.size() != 3) throw ParseError(path.string(), d.entry("background").line, "background must have 3 values");
    for (int c = 0; c < 3; ++c) m.config.background[c] = static_cast<std::uint8_t>(bg[c]);
    m.config.styles.clear();
    std::string styles = d.get_string("styles");
    for (std::size_t a = 0; a <= styles.size();) {
      const std::size_t b = std::min(styles.find(',', a), styles.size());
      m.config.styles.push_back(parse_motion_style(styles.substr(a, b - a)));
      a = b + 1;
    }
    m.config.rig.ego_fov_deg = d.get_number("rig_ego_fov");
    m.config.rig.tp_fov_deg = d.get_number("rig_tp_fov");
    m.config.rig.tp_distance = d.get_number("rig_tp_distance");
    m.config.rig.tp_height = d.get_number("rig_tp_height");
    m.config.rig.tp_aim_height = d.get_number("rig_tp_aim_height");
    m.config.rig.tp_mode = d.get_string("rig_tp_mode") == "rigid" ? AttachMode::kRigid : AttachMode::kYawOnly;
    const int n = d.get_int("frame_count");
    for (int i = 0; i < n; ++i) {
      char key[32];
      std::snprintf(key, sizeof(key), "frame_%06d", i);
      const kv::Entry& e = d.entry(key);
      if (e.tokens.size() != 3) throw ParseError(path.string(), e.line, std::string(key) + " needs path, split, hash");
      ManifestEntry me;
      me.prefix = e.tokens[0];
      me.split = parse_split(e.tokens[1]);
      me.content_hash = std::stoull(e.tokens[2], nullptr, 16);
      if (std::sscanf(me.prefix.c_str(), "seq_%d/frame_%d", &me.sequence, &me.frame) != 2)
        throw ParseError(path.string(), e.line, "bad frame path '" + me.prefix + "'");
      m.entries.push_back(me);
    }
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      for (const auto& v : frame_image_names())
        if (!fs::exists(m.image_path(i, v))) throw MissingArtifact("dataset file missing: " + m.image_path(i, v).string());
      if (!fs::exists(m.meta_path(i))) throw MissingArtifact("dataset file missing: " + m.meta_path(i).string());
    }
    return m;
  }
};

inline std::uint64_t manifest_hash(const fs::path& root) { return hash_file(root / "manifest"); }

/// Splits by sequence; with two or more sequences at least one is held out
/// for test.
inline std::vector<Split> assign_splits(const DatasetConfig& cfg, std::uint64_t seed) {
  const int n = cfg.sequences;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x73706c6974ULL));
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(static_cast<std::uint64_t>(i) + 1)]);
  int n_test = static_cast<int>(std::lround(cfg.test_fraction * n));
  if (n >= 2 && cfg.test_fraction > 0) n_test = std::max(n_test, 1);
  int n_val = static_cast<int>(std::lround(cfg.val_fraction * n));
  n_test = std::min(n_test, n - 1);
  n_val = std::min(n_val, n - 1 - n_test);
  std::vector<Split> split(n, Split::kTrain);
  for (int i = 0; i < n_test; ++i) split[order[i]] = Split::kTest;
  for (int i = 0; i < n_val; ++i) split[order[n_test + i]] = Split::kVal;
  return split;
}

/// Everything a sequence needs before frames are rendered.
struct SequencePlan {
  MotionStyle style;
  std::vector<BodyParams> poses;
  std::uint64_t texture_seed;
};

inline SequencePlan plan_sequence(const DatasetConfig& cfg, std::uint64_t seed, int seq) {
  const std::uint64_t s = derive_seed(seed, 0x7365714eULL, static_cast<std::uint64_t>(seq));
  Rng rng(s);
  SequencePlan p;
  p.style = cfg.styles[rng.index(cfg.styles.size())];
  MotionOptions mo;
  mo.keyframe_spacing = cfg.keyframe_spacing;
  p.poses = sample_pose_sequence(derive_seed(s, 1), cfg.frames, p.style, mo);
  p.texture_seed = derive_seed(s, 2);
  return p;
}

/// Renders one frame: four views, joints and the projected tp_front joints.
inline FrameRecord render_frame(const BodyModelAsset& asset, const std::vector<CameraSpec>& rig, const BodyParams& params,
                                const TextureMap& texture, const RenderOptions& ropt) {
  FrameRecord r;
  r.params = params;
  r.texture = texture;
  const MeshAsset mesh = forward(asset, params);
  r.joints3d = mesh.joints3d;
  Image* views[4] = {&r.ego_front, &r.ego_back, &r.tp_front, &r.tp_back};
  for (int c = 0; c < 4; ++c) {
    const Eigen::Matrix4d pose = camera_world_pose(rig[c], mesh.joint_transforms);
    RenderResult rr = rasterize(mesh, texture, rig[c], pose, ropt);
    if (c == 2) {
      r.tp_front_pose = pose;
      r.joints2d_tp_front = render_joints2d(mesh, rig[c], pose, rr);
    }
    *views[c] = std::move(rr.image);
  }
  return r;
}

inline kv::Document frame_meta(const FrameRecord& r) {
  kv::Document d;
  d.set("format_version", 1);
  d.set("kind", "frame_meta");
  d.set("sequence", r.sequence_id);
  d.set("frame", r.frame_id);
  d.set("style", r.style);
  put_params(d, r.params);
  d.set_matrix("joints3d", r.joints3d);
  d.set_matrix("joints2d_tp_front", r.joints2d_tp_front.pixels);
  std::vector<int> vis(r.joints2d_tp_front.visible.begin(), r.joints2d_tp_front.visible.end());
  d.set_list("visible_tp_front", vis);
  d.set_matrix("depth_tp_front", r.joints2d_tp_front.depth);
  d.set_matrix("tp_front_pose", r.tp_front_pose);
  return d;
}

inline void save_frame(const fs::path& root, const std::string& prefix, const FrameRecord& r) {
  write_png(root / (prefix + "_ego_front.png"), r.ego_front);
  write_png(root / (prefix + "_ego_back.png"), r.ego_back);
  write_png(root / (prefix + "_tp_front.png"), r.tp_front);
  write_png(root / (prefix + "_tp_back.png"), r.tp_back);
  write_png(root / (prefix + "_texture.png"), r.texture.image);
  frame_meta(r).save(root / (prefix + "_meta"));
}

inline std::uint64_t frame_content_hash(const fs::path& root, const std::string& prefix) {
  Fnv1a h;
  for (const auto& v : frame_image_names()) {
    const auto b = read_file_bytes(root / (prefix + "_" + v + ".png"));
    h.update(b.data(), b.size());
  }
  const auto b = read_file_bytes(root / (prefix + "_meta"));
  h.update(b.data(), b.size());
  return h.digest();
}

inline FrameRecord load_frame(const DatasetManifest& m, std::size_t i) {
  FrameRecord r;
  r.ego_front = read_png(m.image_path(i, "ego_front"));
  r.ego_back = read_png(m.image_path(i, "ego_back"));
  r.tp_front = read_png(m.image_path(i, "tp_front"));
  r.tp_back = read_png(m.image_path(i, "tp_back"));
  r.texture = TextureMap(read_png(m.image_path(i, "texture")));
  const kv::Document d = kv::Document::load(m.meta_path(i));
  r.params = get_params(d);
  r.sequence_id = d.get_int("sequence");
  r.frame_id = d.get_int("frame");
  r.style = d.get_string("style");
  r.joints3d = d.get_eigen("joints3d", kNumJoints, 3);
  r.joints2d_tp_front.pixels = d.get_eigen("joints2d_tp_front", kNumJoints, 2);
  r.joints2d_tp_front.depth = d.get_eigen("depth_tp_front", kNumJoints, 1);
  const auto vis = d.get_list("visible_tp_front");
  if (vis.size() != kNumJoints) throw ParseError(d.file(), d.entry("visible_tp_front").line, "need 24 visibility flags");
  for (double v : vis) r.joints2d_tp_front.visible.push_back(v != 0.0);
  r.tp_front_pose = d.get_eigen("tp_front_pose", 4, 4);
  for (const Image* img : {&r.ego_back, &r.tp_front, &r.tp_back})
    if (!img->same_shape(r.ego_front)) throw ValidationError("frame.resolution", "frame views differ in size");
  return r;
}

/// Writes the dataset under `root`. Output bytes depend only on (cfg, seed).
/// On failure, files created by this call are removed before rethrowing.
inline DatasetManifest generate_dataset(const DatasetConfig& cfg, std::uint64_t seed, const fs::path& root) {
  cfg.validate();
  const BodyModelAsset asset = make_procedural_humanoid(0);
  const auto rig = rig_default(cfg.rig_options());
  RenderOptions ropt;
  ropt.background = cfg.background;
  const auto splits = assign_splits(cfg, seed);

  DatasetManifest m;
  m.root = root;
  m.seed = seed;
  m.config = cfg;
  m.config_hash = cfg.hash();

  std::vector<fs::path> created;
  const bool fresh_root = !fs::exists(root);
  try {
    fs::create_directories(root);
    std::vector<SequencePlan> plans;
    std::vector<TextureMap> textures;
    for (int s = 0; s < cfg.sequences; ++s) {
      plans.push_back(plan_sequence(cfg, seed, s));
      textures.push_back(make_procedural_texture(plans.back().texture_seed, cfg.texture_size));
      const fs::path dir = root / sequence_dir(s);
      if (!fs::exists(dir)) created.push_back(dir);
      fs::create_directories(dir);
      for (int f = 0; f < cfg.frames; ++f)
        m.entries.push_back({s, f, splits[s], frame_prefix(s, f), 0});
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto work = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= m.entries.size()) return;
        {
          std::lock_guard lock(err_mu);
          if (err) return;
        }
        try {
          ManifestEntry& e = m.entries[i];
          const SequencePlan& plan = plans[e.sequence];
          FrameRecord r = render_frame(asset, rig, plan.poses[e.frame], textures[e.sequence], ropt);
          r.sequence_id = e.sequence;
          r.frame_id = e.frame;
          r.style = motion_style_name(plan.style);
          save_frame(root, e.prefix, r);
          e.content_hash = frame_content_hash(root, e.prefix);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    };
    const int n_workers = std::min<int>(cfg.workers, static_cast<int>(m.entries.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    m.save();
  } catch (...) {
    std::error_code ec;
    for (const auto& p : created) fs::remove_all(p, ec);
    fs::remove(root / "manifest", ec);
    if (fresh_root) fs::remove_all(root, ec);
    throw;
  }
  return m;
}

}  // namespace egobody
