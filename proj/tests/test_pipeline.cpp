#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "egobody/pipeline/commands.hpp"
#include "test_util.hpp"

using namespace egobody;
using egobody::testing::TempDir;

namespace {

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::set<std::string> listing(const std::filesystem::path& root) {
  std::set<std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    out.insert(std::filesystem::relative(e.path(), root).generic_string());
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PIPELINE_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Tiny configuration: 32 px views, a few training steps per model.
PipelineConfig tiny_config(const std::filesystem::path& root) {
  return load_pipeline_config(std::nullopt, {{"data_root", (root / "data").string()},
                                             {"models_root", (root / "models").string()},
                                             {"output_root", (root / "out").string()},
                                             {"dataset.sequences", "2"},
                                             {"dataset.frames", "3"},
                                             {"dataset.test_fraction", "0.4"},
                                             {"dataset.resolution", "32"},
                                             {"dataset.texture_size", "32"},
                                             {"translate.base", "8"},
                                             {"translate.depth", "5"},
                                             {"translate.disc_base", "8"},
                                             {"translate.steps", "4"},
                                             {"texture.base", "8"},
                                             {"texture.depth", "5"},
                                             {"texture.disc_base", "8"},
                                             {"texture.steps", "4"},
                                             {"recover.depth", "3"},
                                             {"recover.feature", "32"},
                                             {"recover.hidden", "32"},
                                             {"recover.batch", "2"},
                                             {"recover.steps", "4"},
                                             {"eval.timing_samples", "1"}});
}

/// Dataset plus all three checkpoints, built once for the suite.
struct World {
  std::filesystem::path root = std::filesystem::temp_directory_path() / "egobody_pipeline_world";
  PipelineConfig cfg;
  std::filesystem::path front, back;
  std::ostringstream log;

  World() {
    std::filesystem::remove_all(root);
    cfg = tiny_config(root);
    const DatasetManifest m = cmd_gen_data(cfg, log);
    cmd_train_translate(cfg, log);
    cmd_train_recover(cfg, log);
    cmd_train_texture(cfg, log);
    const std::size_t i = m.indices(Split::kTest).at(0);
    front = m.image_path(i, "ego_front");
    back = m.image_path(i, "ego_back");
  }
  ~World() {
    std::error_code ec;
    std::filesystem::remove_all(root, ec);
  }
};

World& world() {
  static World w;
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, CheckedInFileEqualsDefaults) {
  const std::filesystem::path file = std::filesystem::path(EGOBODY_SOURCE_DIR) / "configs" / "pipeline.conf";
  EXPECT_EQ(read_text(file), config_text(PipelineConfig{}));
  EXPECT_EQ(config_text(load_pipeline_config(file)), config_text(load_pipeline_config(std::nullopt)));
}

TEST(Config, EveryKeyIsDocumented) {
  std::istringstream in(config_text(PipelineConfig{}));
  std::string prev, line;
  int keys = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      ++keys;
      EXPECT_EQ(prev.rfind("# ", 0), 0u) << line;
    }
    prev = line;
  }
  EXPECT_GT(keys, 60);
}

TEST(Config, DefaultsRoundTripThroughText) {
  TempDir dir;
  PipelineConfig c = load_pipeline_config(std::nullopt, {{"dataset.styles", "walk jump"}, {"recover.lr", "3e-05"}});
  write_text(dir / "c.conf", config_text(c));
  EXPECT_EQ(config_text(load_pipeline_config(dir / "c.conf")), config_text(c));
  EXPECT_EQ(c.dataset.styles.size(), 2u);
  EXPECT_EQ(c.recover.lr, 3e-05);
}

TEST(Config, OverridesBeatTheFile) {
  TempDir dir;
  write_text(dir / "c.conf", "seed: 3\ndataset.frames: 9\n");
  const PipelineConfig c = load_pipeline_config(dir / "c.conf", {{"seed", "11"}});
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.dataset.frames, 9);
  EXPECT_EQ(c.regressor.resolution, c.dataset.resolution);
  EXPECT_EQ(c.texture.method, Arrangement::kC);
}

TEST(Config, UnknownKeysAreRejected) {
  TempDir dir;
  write_text(dir / "c.conf", "seed: 3\ndataset.frame: 9\n");
  try {
    load_pipeline_config(dir / "c.conf");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("dataset.frame"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_pipeline_config(std::nullopt, {{"translate.lamda_l1", "1"}}), ConfigError);
}

TEST(Config, BadValuesAreRejected) {
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"seed", "abc"},           {"dataset.frames", "2.5"},      {"translate.method", "D"},
      {"translate.use_skip", "2"}, {"dataset.styles", "swim"},     {"dataset.background", "300"},
      {"translate.depth", "9"},  {"dataset.texture_size", "48"}, {"dataset.rig.tp_mode", "orbit"},
      {"recover.lr", "0"},       {"dataset.resolution", "100"}};
  for (const auto& kv : bad) {
    EXPECT_ANY_THROW(load_pipeline_config(std::nullopt, {kv})) << kv.first << " = " << kv.second;
  }
  EXPECT_THROW(load_pipeline_config("/nonexistent/egobody.conf"), ConfigError);
}

TEST(Config, ModelGeometryFollowsDataset) {
  TempDir dir;
  const PipelineConfig c = tiny_config(dir.path());
  EXPECT_EQ(new_translation_model(c).generator().config().out_w, 32);
  EXPECT_EQ(new_texture_model(c).generator().config().out_w, 32);
  EXPECT_EQ(new_recovery_model(c).regressor().config().resolution, 32);
}

// ---------------------------------------------------------------------------
// Commands

TEST(Commands, GenDataIsReproducible) {
  TempDir dir;
  PipelineConfig c = tiny_config(dir.path());
  std::ostringstream log;
  cmd_gen_data(c, log);
  const auto h1 = manifest_hash(c.data_root);
  cmd_gen_data(c, log);
  EXPECT_EQ(manifest_hash(c.data_root), h1);
  c.seed += 1;
  c.data_root = dir / "other";
  cmd_gen_data(c, log);
  EXPECT_NE(manifest_hash(c.data_root), h1);
}

TEST(Commands, TrainingIsIdempotent) {
  World& w = world();
  const auto ckpt = hash_file(w.cfg.translate_checkpoint());
  const auto csv = read_text(w.cfg.models_root / "translate_metrics.csv");
  std::ostringstream log;
  cmd_train_translate(w.cfg, log);
  EXPECT_EQ(hash_file(w.cfg.translate_checkpoint()), ckpt);
  EXPECT_EQ(read_text(w.cfg.models_root / "translate_metrics.csv"), csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + w.cfg.translate.max_steps);
}

TEST(Commands, MissingCheckpointNamesTheTrainingCommand) {
  TempDir dir;
  const PipelineConfig c = tiny_config(dir.path());
  std::ostringstream log;
  try {
    cmd_infer(c, world().front, world().back, dir / "result", log);
    FAIL() << "expected MissingArtifact";
  } catch (const MissingArtifact& e) {
    EXPECT_NE(std::string(e.what()).find("train-translate"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "result"));
}

TEST(Commands, MissingDatasetNamesGenData) {
  TempDir dir;
  std::ostringstream log;
  try {
    cmd_train_recover(tiny_config(dir.path()), log);
    FAIL() << "expected MissingArtifact";
  } catch (const MissingArtifact& e) {
    EXPECT_NE(std::string(e.what()).find("gen-data"), std::string::npos) << e.what();
  }
}

TEST(Commands, InferWritesExactlyTheArtifactSet) {
  World& w = world();
  TempDir dir;
  std::ostringstream log;
  cmd_infer(w.cfg, w.front, w.back, dir / "result", log);
  const std::set<std::string> want = {"mesh.obj",         "mesh.mtl",         "skeleton.txt",     "texture.png",
                                      "params.txt",       "views",            "views/view_000.png", "views/view_090.png",
                                      "views/view_180.png", "views/view_270.png"};
  EXPECT_EQ(listing(dir / "result"), want);
  EXPECT_EQ(listing(dir.path()), [&] {
    std::set<std::string> s;
    s.insert("result");
    for (const auto& f : want) s.insert("result/" + f);
    return s;
  }());
}

TEST(Commands, InferOutputsReload) {
  World& w = world();
  TempDir dir;
  std::ostringstream log;
  const InferenceResult r = cmd_infer(w.cfg, w.front, w.back, dir / "result", log);
  const ObjData obj = load_obj(dir / "result" / "mesh.obj");
  EXPECT_EQ(obj.vertices.rows(), pipeline_asset().template_vertices.rows());
  EXPECT_GE(obj.uv_coords.minCoeff(), 0.0);
  EXPECT_LE(obj.uv_coords.maxCoeff(), 1.0);
  EXPECT_NE(read_text(dir / "result" / "mesh.mtl").find("map_Kd texture.png"), std::string::npos);

  const BodyParams p = load_params(dir / "result" / "params.txt");
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p, r.theta.params());
  const MeshAsset mesh = forward(pipeline_asset(), p);
  EXPECT_TRUE(mesh.vertices.isApprox(obj.vertices, 1e-9));
  const TextureMap tex(read_png(dir / "result" / "texture.png"));
  EXPECT_EQ(tex.size(), w.cfg.dataset.texture_size);
  const Image view = render_turntable(mesh, tex, pipeline_asset(), p.beta, 0, 32, 50, w.cfg.dataset.background);
  EXPECT_EQ(view, read_png(dir / "result" / "views" / "view_000.png"));
}

TEST(Commands, InferLeavesCheckpointsUntouched) {
  World& w = world();
  TempDir dir;
  std::vector<std::uint64_t> before;
  for (const auto& p : {w.cfg.translate_checkpoint(), w.cfg.recover_checkpoint(), w.cfg.texture_checkpoint()})
    before.push_back(hash_file(p));
  std::ostringstream log;
  cmd_infer(w.cfg, w.front, w.back, dir / "a", log);
  cmd_infer(w.cfg, w.front, w.back, dir / "b", log);
  std::vector<std::uint64_t> after;
  for (const auto& p : {w.cfg.translate_checkpoint(), w.cfg.recover_checkpoint(), w.cfg.texture_checkpoint()})
    after.push_back(hash_file(p));
  EXPECT_EQ(before, after);
  for (const auto& f : listing(dir / "a")) {
    if (f.find('.') == std::string::npos) continue;
    EXPECT_EQ(hash_file(dir / "a" / f), hash_file(dir / "b" / f)) << f;
  }
}

TEST(Commands, FailedInferLeavesNothingBehind) {
  World& w = world();
  TempDir dir;
  write_png(dir / "small.png", Image(16, 16, Rgb{1, 2, 3}));
  std::ostringstream log;
  EXPECT_THROW(cmd_infer(w.cfg, dir / "small.png", dir / "small.png", dir / "result", log), ValidationError);
  EXPECT_THROW(write_atomically(dir / "result", [](const std::filesystem::path& d) {
                 write_png(d / "partial.png", Image(4, 4, Rgb{0, 0, 0}));
                 throw std::runtime_error("stage failed");
               }),
               std::runtime_error);
  EXPECT_EQ(listing(dir.path()), std::set<std::string>{"small.png"});
}

TEST(Commands, AnimateAtRecoveredPoseMatchesFrontView) {
  World& w = world();
  TempDir dir;
  std::ostringstream log;
  const InferenceResult r = cmd_infer(w.cfg, w.front, w.back, dir / "result", log);
  save_pose_sequence(dir / "one.seq", {r.theta.params()});
  AnimateOptions o{dir / "result" / "params.txt", dir / "result" / "texture.png", dir / "one.seq", dir / "anim", {}, 0};
  const AnimateResult a = cmd_animate(w.cfg, o, log);
  EXPECT_EQ(a.frames, 1);
  EXPECT_EQ(read_file_bytes(dir / "anim" / "frame_00000.png"), read_file_bytes(dir / "result" / "views" / "view_000.png"));
}

TEST(Commands, AnimateKeepsShapeConstant) {
  World& w = world();
  TempDir dir;
  std::ostringstream log;
  cmd_infer(w.cfg, w.front, w.back, dir / "result", log);
  auto walk = sample_pose_sequence(21, 30, MotionStyle::kWalk);
  for (auto& p : walk) p.beta.setConstant(2.0);  // ignored: the recovered shape is kept
  save_pose_sequence(dir / "walk.seq", walk);
  const auto gt_texture = world().cfg.data_root / "seq_0000" / "frame_00000_texture.png";
  AnimateOptions o{dir / "result" / "params.txt", dir / "result" / "texture.png", dir / "walk.seq", dir / "anim",
                   gt_texture, 0};
  const AnimateResult a = cmd_animate(w.cfg, o, log);
  EXPECT_EQ(a.frames, 30);
  ASSERT_EQ(a.shape_hashes.size(), 30u);
  const BetaVec beta = load_params(dir / "result" / "params.txt").beta;
  for (auto h : a.shape_hashes) EXPECT_EQ(h, shaped_template_hash(pipeline_asset(), beta));
  ASSERT_EQ(a.ssim.size(), 30u);
  for (double s : a.ssim) {
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
  const auto files = listing(dir / "anim");
  EXPECT_EQ(files.size(), 31u);
  EXPECT_TRUE(files.count("frame_00029.png"));
  const std::string csv = read_text(dir / "anim" / "frames.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "frame,shape_hash,ssim");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
}

TEST(Commands, AnimateRejectsMalformedSequence) {
  World& w = world();
  TempDir dir;
  std::ostringstream log;
  cmd_infer(w.cfg, w.front, w.back, dir / "result", log);
  write_text(dir / "bad.seq", "format_version: 1\nkind: pose_sequence\nframes: 2\ntheta [2 3]:\n1 2 3\n");
  AnimateOptions o{dir / "result" / "params.txt", dir / "result" / "texture.png", dir / "bad.seq", dir / "anim", {}, 0};
  EXPECT_THROW(cmd_animate(w.cfg, o, log), ParseError);
  EXPECT_FALSE(std::filesystem::exists(dir / "anim"));
}

TEST(Commands, ExportTemplateReloads) {
  TempDir dir;
  std::ostringstream log;
  const auto obj = cmd_export(std::nullopt, std::nullopt, dir.path(), log);
  const BodyModelAsset back = load_model_asset(obj);
  EXPECT_TRUE(back.template_vertices.isApprox(pipeline_asset().template_vertices, 1e-12));
  EXPECT_TRUE(back.skin_weights.isApprox(pipeline_asset().skin_weights, 1e-12));
}

TEST(Commands, EvalWritesReport) {
  World& w = world();
  std::ostringstream log;
  const EvalReport r = cmd_eval(w.cfg, log);
  EXPECT_FALSE(r.samples.empty());
  EXPECT_EQ(r.timings.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(w.cfg.output_root / "eval" / "report.txt"));
  EXPECT_TRUE(std::filesystem::exists(w.cfg.output_root / "eval" / "samples.csv"));
}

// ---------------------------------------------------------------------------
// Executable

TEST(Cli, ExitCodes) {
  World& w = world();
  TempDir dir;
  const std::string roots = " --data_root " + w.cfg.data_root.string() + " --models_root " + (dir / "none").string();
  EXPECT_EQ(run_cli("defaults"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("gen-data --no_such_key 3"), 2);
  EXPECT_EQ(run_cli("gen-data --dataset.frames 0"), 2);
  EXPECT_EQ(run_cli("gen-data --config " + (dir / "missing.conf").string()), 2);
  EXPECT_EQ(run_cli("infer --front a.png"), 2);
  EXPECT_EQ(run_cli("infer --dataset.resolution 32 --dataset.texture_size 32 --translate.depth 5 --texture.depth 5 "
                    "--recover.depth 3 --front " + w.front.string() + " --back " + w.back.string() +
                    " --out " + (dir / "r").string() + roots),
            1);
  EXPECT_FALSE(std::filesystem::exists(dir / "r"));
}

TEST(Cli, ConfigFileAndOverrides) {
  TempDir dir;
  write_text(dir / "c.conf", "dataset.sequences: 1\ndataset.frames: 2\ndataset.resolution: 16\ndataset.texture_size: 16\n"
                             "translate.depth: 4\ntexture.depth: 4\nrecover.depth: 3\n");
  EXPECT_EQ(run_cli("gen-data --config " + (dir / "c.conf").string() + " --data_root " + (dir / "d").string()), 0);
  EXPECT_EQ(DatasetManifest::load(dir / "d").frame_count(), 2u);
  EXPECT_EQ(run_cli("gen-data --config " + (dir / "c.conf").string() + " --data_root=" + (dir / "e").string() +
                    " --dataset.frames 3"),
            0);
  EXPECT_EQ(DatasetManifest::load(dir / "e").frame_count(), 3u);
}
