#pragma once

// Subcommand implementations behind the `pipeline` executable.

#include <ostream>

#include "egobody/body/model_io.hpp"
#include "egobody/body/params_io.hpp"
#include "egobody/pipeline/config.hpp"

namespace egobody {

inline constexpr int kTurntableViews = 4;

/// Front-facing body asset used by every stage.
inline const BodyModelAsset& pipeline_asset() {
  static const BodyModelAsset a = make_procedural_humanoid(0);
  return a;
}

inline DatasetManifest load_training_data(const PipelineConfig& cfg) {
  DatasetManifest m = DatasetManifest::load(cfg.data_root);
  if (m.config.resolution != cfg.dataset.resolution || m.config.texture_size != cfg.dataset.texture_size)
    throw ConfigError("dataset at " + cfg.data_root.string() + " was generated at resolution " +
                      std::to_string(m.config.resolution) + " / texture " + std::to_string(m.config.texture_size) +
                      " but the config asks for " + std::to_string(cfg.dataset.resolution) + " / " +
                      std::to_string(cfg.dataset.texture_size) + " (rerun gen-data)");
  return m;
}

inline GanModel new_translation_model(const PipelineConfig& cfg) {
  return make_translation_model(cfg.dataset.resolution, cfg.translate_net, cfg.translate);
}
inline RecoveryModel new_recovery_model(const PipelineConfig& cfg) {
  return RecoveryModel(cfg.regressor, cfg.prior, cfg.recover, JointShapeBasis::from_asset(pipeline_asset()));
}
inline GanModel new_texture_model(const PipelineConfig& cfg) {
  return make_texture_model(cfg.dataset.resolution, cfg.dataset.texture_size, cfg.texture_net, cfg.texture);
}

inline void require_checkpoint(const std::filesystem::path& p, const std::string& command) {
  if (!std::filesystem::exists(p))
    throw MissingArtifact("missing checkpoint " + p.string() + "; run `pipeline " + command +
                          " --config <file>` first");
}

struct LoadedModels {
  GanModel translation;
  RecoveryModel recovery;
  GanModel texture;

  explicit LoadedModels(const PipelineConfig& cfg)
      : translation(new_translation_model(cfg)), recovery(new_recovery_model(cfg)), texture(new_texture_model(cfg)) {
    require_checkpoint(cfg.translate_checkpoint(), "train-translate");
    require_checkpoint(cfg.recover_checkpoint(), "train-recover");
    require_checkpoint(cfg.texture_checkpoint(), "train-texture");
    translation.load(cfg.translate_checkpoint(), kTranslationKind);
    recovery.load(cfg.recover_checkpoint());
    texture.load(cfg.texture_checkpoint(), kTextureKind);
  }

  PipelineModels view() { return {translation, recovery, texture, pipeline_asset()}; }
};

// ---------------------------------------------------------------------------
// Data and training

inline DatasetManifest cmd_gen_data(const PipelineConfig& cfg, std::ostream& log) {
  log << "generating " << cfg.dataset.sequences << " x " << cfg.dataset.frames << " frames at "
      << cfg.dataset.resolution << " px into " << cfg.data_root.string() << "\n";
  DatasetManifest m = generate_dataset(cfg.dataset, cfg.seed, cfg.data_root);
  log << "train " << m.indices(Split::kTrain).size() << ", val " << m.indices(Split::kVal).size() << ", test "
      << m.indices(Split::kTest).size() << " frames; manifest " << hex64(manifest_hash(cfg.data_root)) << "\n";
  return m;
}

namespace cmd_detail {

inline std::filesystem::path fresh_csv(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::filesystem::remove(p);
  return p;
}

inline int log_every(int steps) { return std::max(1, steps / 20); }

inline void train_gan_stage(GanModel& model, const PipelineConfig& cfg, const PairFn& pairs, const std::string& kind,
                            const std::filesystem::path& ckpt, const std::string& csv_name, int steps, std::ostream& log) {
  const DatasetManifest data = load_training_data(cfg);
  const PairCache cache = load_pairs(model, data, data.indices(Split::kTrain), pairs);
  log << kind << ": " << cache.inputs.size() << " training pairs, " << steps << " steps\n";
  TrainLoopOptions opt;
  opt.steps = steps;
  opt.kind = kind;
  opt.checkpoint = ckpt;
  opt.metrics_csv = fresh_csv(cfg.models_root / csv_name);
  const int every = log_every(steps);
  opt.on_step = [&](const GanMetrics& m) {
    if (m.step % every == 0 || m.step == steps)
      log << "  step " << m.step << "  D " << m.loss_d << "  G_adv " << m.loss_g_adv << "  L1 " << m.loss_l1 << "\n";
    if (!std::isfinite(m.loss_d) || !std::isfinite(m.loss_g_adv) || !std::isfinite(m.loss_l1))
      throw DivergenceError(kind + " training diverged at step " + std::to_string(m.step));
  };
  std::filesystem::create_directories(cfg.models_root);
  train_gan(model, cache, opt);
  log << "saved " << ckpt.string() << "\n";
}

}  // namespace cmd_detail

inline void cmd_train_translate(const PipelineConfig& cfg, std::ostream& log) {
  GanModel model = new_translation_model(cfg);
  cmd_detail::train_gan_stage(model, cfg, translation_pairs(cfg.translate.method), kTranslationKind,
                              cfg.translate_checkpoint(), "translate_metrics.csv", cfg.translate.max_steps, log);
}

inline void cmd_train_texture(const PipelineConfig& cfg, std::ostream& log) {
  GanModel model = new_texture_model(cfg);
  cmd_detail::train_gan_stage(model, cfg, texture_pairs(), kTextureKind, cfg.texture_checkpoint(),
                              "texture_metrics.csv", cfg.texture.max_steps, log);
}

inline void cmd_train_recover(const PipelineConfig& cfg, std::ostream& log) {
  const DatasetManifest data = load_training_data(cfg);
  RecoveryModel model = new_recovery_model(cfg);
  const RecoverySet set = load_recovery_set(model, data, data.indices(Split::kTrain));
  if (set.targets.empty()) throw ConfigError("no recovery training frames (is the train split empty?)");
  model.regressor().set_mean(mean_parameters(set.targets));
  const int steps = cfg.recover.max_steps;
  log << "mesh_recovery: " << set.images.size() << " training frames, " << steps << " steps\n";
  RecoveryLoopOptions opt;
  opt.steps = steps;
  opt.checkpoint = cfg.recover_checkpoint();
  opt.metrics_csv = cmd_detail::fresh_csv(cfg.models_root / "recover_metrics.csv");
  const int every = cmd_detail::log_every(steps);
  opt.on_step = [&](const RecoveryMetrics& m) {
    if (m.step % every == 0 || m.step == steps)
      log << "  step " << m.step << "  total " << m.loss_total << "  reproj " << m.loss_reproj << "  3D " << m.loss_3d
          << "  adv " << m.loss_adv << "  D " << m.loss_d_prior << "\n";
    if (!std::isfinite(m.loss_total)) throw DivergenceError("mesh_recovery training diverged at step " + std::to_string(m.step));
  };
  train_recovery(model, set, opt);
  log << "saved " << cfg.recover_checkpoint().string() << "\n";
}

// ---------------------------------------------------------------------------
// Evaluation

inline EvalReport cmd_eval(const PipelineConfig& cfg, std::ostream& log) {
  const DatasetManifest data = load_training_data(cfg);
  LoadedModels models(cfg);
  PipelineModels m = models.view();
  EvalReport report = evaluate_split(m, data, Split::kTest, cfg.eval_max_frames);
  std::vector<std::pair<Image, Image>> inputs;
  for (std::size_t i : data.indices(Split::kTest)) {
    const FrameRecord r = load_frame(data, i);
    inputs.emplace_back(r.ego_front, r.ego_back);
    if (inputs.size() >= 8) break;
  }
  if (!inputs.empty()) report.timings = time_pipeline(m, inputs, cfg.eval_timing_samples);
  const auto dir = cfg.output_root / "eval";
  report.save(dir);
  log << report.summary() << "written to " << dir.string() << "\n";
  return report;
}

inline ArrangementTable cmd_experiment(const PipelineConfig& cfg, std::ostream& log) {
  const DatasetManifest data = load_training_data(cfg);
  const ArrangementTable t = run_arrangement_experiment(data, cfg.experiment, [&](const std::string& s) { log << s << "\n"; });
  const auto dir = cfg.output_root / "experiment";
  t.save(dir);
  log << t.summary() << "written to " << dir.string() << "\n";
  return t;
}

// ---------------------------------------------------------------------------
// Turntable rendering shared by infer and animate

/// Camera circling the beta-shaped rest mesh at `yaw_deg` (0 = in front).
/// Depends on beta only, so animate frames line up with infer views.
inline std::pair<CameraSpec, Eigen::Matrix4d> turntable_camera(const BodyModelAsset& asset, const BetaVec& beta,
                                                               double yaw_deg, int resolution, double fov_deg) {
  BodyParams rest;
  rest.beta = beta;
  const MeshAsset m = forward(asset, rest);
  const Eigen::Vector3d lo = m.vertices.colwise().minCoeff(), hi = m.vertices.colwise().maxCoeff();
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const double extent = std::max(hi.y() - lo.y(), std::max(hi.x() - lo.x(), hi.z() - lo.z()));
  const double dist = 0.5 * extent * 1.3 / std::tan(0.5 * deg2rad(fov_deg)) + 0.5 * (hi.z() - lo.z());
  const double a = deg2rad(yaw_deg);
  const Eigen::Vector3d eye = center + dist * Eigen::Vector3d(std::sin(a), 0.0, std::cos(a));
  CameraSpec spec;
  spec.name = "turntable";
  spec.fov_deg = fov_deg;
  spec.width = spec.height = resolution;
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose.block<3, 3>(0, 0) = look_rotation(center - eye);
  pose.block<3, 1>(0, 3) = eye;
  return {spec, pose};
}

inline Image render_turntable(const MeshAsset& mesh, const TextureMap& tex, const BodyModelAsset& asset,
                              const BetaVec& beta, double yaw_deg, int resolution, double fov_deg, Rgb background) {
  const auto [spec, pose] = turntable_camera(asset, beta, yaw_deg, resolution, fov_deg);
  RenderOptions opt;
  opt.background = background;
  return rasterize(mesh, tex, spec, pose, opt).image;
}

inline std::string view_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d.png", 360 / kTurntableViews * k);
  return buf;
}

// ---------------------------------------------------------------------------
// Inference

/// Writes `dir` from scratch through a sibling staging directory; on failure
/// nothing is left behind.
template <class Fn>
void write_atomically(const std::filesystem::path& dir, Fn&& fill) {
  namespace fs = std::filesystem;
  const fs::path target = fs::absolute(dir).lexically_normal();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);
  const fs::path staging = parent / ("." + target.filename().string() + ".staging");
  fs::remove_all(staging);
  try {
    fs::create_directories(staging);
    fill(staging);
    fs::remove_all(target);
    fs::rename(staging, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

inline InferenceResult cmd_infer(const PipelineConfig& cfg, const std::filesystem::path& ego_front_png,
                                 const std::filesystem::path& ego_back_png, const std::filesystem::path& out_dir,
                                 std::ostream& log) {
  for (const auto& p : {ego_front_png, ego_back_png})
    if (!std::filesystem::exists(p)) throw MissingArtifact("input image not found: " + p.string());
  const Image front = read_png(ego_front_png), back = read_png(ego_back_png);
  const int res = cfg.dataset.resolution;
  if (front.width != res || front.height != res || !front.same_shape(back))
    throw ValidationError("infer.input", "egocentric inputs must both be " + std::to_string(res) + "x" +
                                             std::to_string(res) + " (dataset.resolution)");
  LoadedModels models(cfg);
  PipelineModels m = models.view();
  InferenceResult r = run_inference(m, front, back);
  const BodyModelAsset& asset = pipeline_asset();
  write_atomically(out_dir, [&](const std::filesystem::path& dir) {
    export_mesh(r.mesh, dir, "mesh", "texture.png", "skeleton.txt");
    write_png(dir / "texture.png", r.texture.image);
    recovered_document(r.theta, asset).save(dir / "params.txt");
    std::filesystem::create_directories(dir / "views");
    for (int k = 0; k < kTurntableViews; ++k)
      write_png(dir / "views" / view_name(k),
                render_turntable(r.mesh, r.texture, asset, r.theta.beta, 360.0 / kTurntableViews * k, res,
                                 cfg.dataset.rig.tp_fov_deg, cfg.dataset.background));
  });
  log << "translation " << r.seconds.translation << " s, recovery " << r.seconds.recovery << " s, texture "
      << r.seconds.texture << " s\nwritten to " << out_dir.string() << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// Export and animation

/// Without params: the rigged template with every model tensor. With params:
/// the posed mesh, optionally textured.
inline std::filesystem::path cmd_export(const std::optional<std::filesystem::path>& params_file,
                                        const std::optional<std::filesystem::path>& texture_png,
                                        const std::filesystem::path& out_dir, std::ostream& log) {
  const BodyModelAsset& asset = pipeline_asset();
  std::filesystem::path obj;
  if (!params_file) {
    obj = export_model_asset(asset, out_dir, "body_model");
  } else {
    if (!std::filesystem::exists(*params_file)) throw MissingArtifact("params file not found: " + params_file->string());
    const BodyParams p = load_params(*params_file);
    std::string tex_name;
    if (texture_png) {
      if (!std::filesystem::exists(*texture_png)) throw MissingArtifact("texture not found: " + texture_png->string());
      TextureMap(read_png(*texture_png));
      tex_name = "texture.png";
      std::filesystem::create_directories(out_dir);
      std::filesystem::copy_file(*texture_png, out_dir / tex_name, std::filesystem::copy_options::overwrite_existing);
    }
    obj = export_mesh(forward(asset, p), out_dir, "mesh", tex_name, "skeleton.txt");
  }
  log << "written " << obj.string() << "\n";
  return obj;
}

struct AnimateOptions {
  std::filesystem::path params_file;
  std::filesystem::path texture_png;
  std::filesystem::path poses_file;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> compare_texture_png;
  double yaw_deg = 0;
};

struct AnimateResult {
  int frames = 0;
  std::vector<std::uint64_t> shape_hashes;
  std::vector<double> ssim;  ///< only with a comparison texture
};

inline std::uint64_t shaped_template_hash(const BodyModelAsset& asset, const BetaVec& beta) {
  const Eigen::MatrixX3d v = shape_blend(asset, beta);
  return fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()), sizeof(double) * static_cast<std::size_t>(v.size())));
}

/// The recovered shape is fixed; each pose of the sequence replaces theta.
inline AnimateResult cmd_animate(const PipelineConfig& cfg, const AnimateOptions& o, std::ostream& log) {
  for (const auto& p : {o.params_file, o.texture_png, o.poses_file})
    if (!std::filesystem::exists(p)) throw MissingArtifact("not found: " + p.string());
  const BodyModelAsset& asset = pipeline_asset();
  const BetaVec beta = load_params(o.params_file).beta;
  const TextureMap tex(read_png(o.texture_png));
  std::optional<TextureMap> compare;
  if (o.compare_texture_png) {
    if (!std::filesystem::exists(*o.compare_texture_png))
      throw MissingArtifact("comparison texture not found: " + o.compare_texture_png->string());
    compare.emplace(read_png(*o.compare_texture_png));
  }
  const std::vector<BodyParams> poses = load_pose_sequence(o.poses_file);
  if (poses.empty()) throw ParseError(o.poses_file.string(), 0, "pose sequence is empty");
  const int res = cfg.dataset.resolution;
  const double fov = cfg.dataset.rig.tp_fov_deg;
  AnimateResult result;
  write_atomically(o.out_dir, [&](const std::filesystem::path& dir) {
    std::ostringstream csv;
    csv << (compare ? "frame,shape_hash,ssim\n" : "frame,shape_hash\n");
    for (std::size_t i = 0; i < poses.size(); ++i) {
      BodyParams p;
      p.beta = beta;
      p.theta = poses[i].theta;
      p.validate();
      const MeshAsset mesh = forward(asset, p);
      const Image frame = render_turntable(mesh, tex, asset, beta, o.yaw_deg, res, fov, cfg.dataset.background);
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
      write_png(dir / name, frame);
      const std::uint64_t h = shaped_template_hash(asset, p.beta);
      result.shape_hashes.push_back(h);
      csv << i << "," << hex64(h);
      if (compare) {
        const Image ref = render_turntable(mesh, *compare, asset, beta, o.yaw_deg, res, fov, cfg.dataset.background);
        result.ssim.push_back(ssim(frame, ref));
        csv << "," << kv::format_number(result.ssim.back());
      }
      csv << "\n";
    }
    write_file_bytes(dir / "frames.csv", csv.str());
  });
  result.frames = static_cast<int>(poses.size());
  log << result.frames << " frames written to " << o.out_dir.string() << "\n";
  if (!result.ssim.empty()) {
    double mean = 0;
    for (double s : result.ssim) mean += s;
    log << "mean SSIM against the comparison texture: " << mean / static_cast<double>(result.ssim.size()) << "\n";
  }
  return result;
}

}  // namespace egobody
