// Acceptance run: one PASS/FAIL line per criterion. Criterion 11 is
// directional and never fails the run.
//
//   acceptance [--pipeline PATH] [--work DIR] [--full-experiment]

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>

#include <CLI11.hpp>

#include "egobody/pipeline/commands.hpp"

using namespace egobody;

namespace {

using clock_type = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Oracles

Eigen::Vector3d random_axis_angle(Rng& rng, double max_angle) {
  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  return axis.normalized() * rng.uniform(0.0, max_angle);
}

BodyParams random_params(Rng& rng, double max_angle) {
  BodyParams p;
  for (int i = 0; i < kNumBetas; ++i) p.beta[i] = rng.normal();
  for (int j = 0; j < kNumJoints; ++j) p.theta.segment<3>(3 * j) = random_axis_angle(rng, max_angle);
  return p;
}

Eigen::Matrix3d series_exp(const Eigen::Vector3d& w, int terms) {
  Eigen::Matrix3d k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity(), term = Eigen::Matrix3d::Identity();
  for (int n = 1; n <= terms; ++n) {
    term = term * k / n;
    sum += term;
  }
  return sum;
}

/// Joint position composed along the root path from scratch.
Eigen::Vector3d path_position(const JointMat& joints, const Parents& parents, const ThetaVec& theta, int k) {
  std::vector<int> path;
  for (int j = k; j >= 0; j = parents[j]) path.insert(path.begin(), j);
  Eigen::Matrix4d g = Eigen::Matrix4d::Identity();
  for (int j : path) {
    Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
    local.block<3, 3>(0, 0) = series_exp(theta.segment<3>(3 * j), 30);
    local.block<3, 1>(0, 3) = parents[j] < 0 ? Eigen::Vector3d(joints.row(j).transpose())
                                             : Eigen::Vector3d((joints.row(j) - joints.row(parents[j])).transpose());
    g = g * local;
  }
  return g.block<3, 1>(0, 3);
}

Image random_image(Rng& rng, int w, int h) {
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

template <class T>
nn::Tensor<T> random_tensor(Rng& rng, int n, int c, int h, int w) {
  nn::Tensor<T> t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-1, 1));
  return t;
}

template <class T>
std::vector<std::vector<T>> grads_of(const std::vector<nn::Param<T>*>& ps) {
  std::vector<std::vector<T>> g;
  for (auto* p : ps) g.push_back(p->grad.data);
  return g;
}

MeshAsset triangles(const std::vector<Eigen::Vector3d>& v, const std::vector<Eigen::Vector2d>& uv) {
  MeshAsset m;
  const int n = static_cast<int>(v.size());
  m.vertices.resize(n, 3);
  m.uv_coords.resize(n, 2);
  m.faces.resize(n / 3, 3);
  for (int i = 0; i < n; ++i) {
    m.vertices.row(i) = v[i].transpose();
    m.uv_coords.row(i) = uv[i].transpose();
  }
  for (int f = 0; f < n / 3; ++f) m.faces.row(f) << 3 * f, 3 * f + 1, 3 * f + 2;
  return m;
}

TextureMap coded_texture(int t) {
  Image img(t, t);
  for (int y = 0; y < t; ++y)
    for (int x = 0; x < t; ++x) img.set(x, y, {static_cast<std::uint8_t>(4 * x), static_cast<std::uint8_t>(4 * y), 77});
  return TextureMap(img);
}

const BodyModelAsset& asset() { return pipeline_asset(); }

const JointShapeBasis& basis() {
  static const JointShapeBasis b = JointShapeBasis::from_asset(asset());
  return b;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome body_model() {
  const auto t0 = clock_type::now();
  const double rest = (forward(asset(), BodyParams{}).vertices - asset().template_vertices).cwiseAbs().maxCoeff();
  Rng rng(21);
  double fk = 0;
  const JointMat j = humanoid_layout::rest_joints();
  for (int trial = 0; trial < 50; ++trial) {
    const BodyParams p = random_params(rng, std::numbers::pi);
    const auto g = forward_kinematics(j, kSmplParents, p.theta);
    for (int k = 0; k < kNumJoints; ++k)
      fk = std::max(fk, (g[k].block<3, 1>(0, 3) - path_position(j, kSmplParents, p.theta, k)).norm());
  }
  double rod = 0;
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d w = random_axis_angle(rng, std::numbers::pi);
    rod = std::max(rod, (rodrigues(w) - series_exp(w, 20)).cwiseAbs().maxCoeff());
  }
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  return {rest < 1e-6 && fk < 1e-9 && rod < 1e-9 && secs < 10,
          "template " + fmt("%.1e", rest) + ", FK " + fmt("%.1e", fk) + ", rodrigues " + fmt("%.1e", rod) + ", " +
              fmt("%.2f", secs) + " s"};
}

Outcome rig_invariant() {
  const auto rig = rig_default();
  double worst = 0;
  for (MotionStyle style : {MotionStyle::kWalk, MotionStyle::kDance, MotionStyle::kJump}) {
    for (const auto& p : sample_pose_sequence(31, 100, style)) {
      const MeshAsset m = forward(asset(), p);
      for (int i = 2; i < 4; ++i) {
        const Eigen::Matrix4d a = attachment_frame(rig[i], m.joint_transforms);
        const Eigen::Vector3d cam = camera_world_pose(rig[i], m.joint_transforms).block<3, 1>(0, 3);
        const Eigen::Vector3d local = a.block<3, 3>(0, 0).transpose() * (cam - m.joints3d.row(0).transpose());
        worst = std::max(worst, (local - rig[i].local_offset).norm());
      }
    }
  }
  return {worst < 1e-12, "max offset drift " + fmt("%.1e", worst) + " m over 3 x 100 frames"};
}

/// Frozen hash of the golden scene: random pose seed 3, coded texture, four rig views at 64 px.
constexpr std::uint64_t kGoldenHash = 0x5750698b267a7232ULL;

std::uint64_t golden_scene_hash() {
  Rng rng(3);
  BodyParams p;
  for (int i = 0; i < kNumBetas; ++i) p.beta[i] = rng.normal();
  for (int j = 0; j < kNumJoints; ++j) p.theta.segment<3>(3 * j) = random_axis_angle(rng, 0.4);
  const MeshAsset mesh = forward(asset(), p);
  RigOptions ro;
  ro.resolution = 64;
  std::string all;
  for (const auto& c : rig_default(ro)) {
    const auto r = rasterize(mesh, coded_texture(64), c, camera_world_pose(c, mesh.joint_transforms));
    all += hex64(r.image.hash());
  }
  return fnv1a(all);
}

Outcome renderer() {
  const std::uint64_t a = golden_scene_hash(), b = golden_scene_hash();
  CameraSpec cam;
  cam.width = cam.height = 64;
  Image tex(2, 2);
  tex.set(0, 0, {255, 0, 0});
  tex.set(0, 1, {255, 0, 0});
  tex.set(1, 0, {0, 0, 255});
  tex.set(1, 1, {0, 0, 255});
  bool zorder = true;
  for (bool near_first : {true, false}) {
    std::vector<Eigen::Vector3d> v = {{-1, -1, 1}, {1, -1, 1}, {0, 1, 1}}, far = {{-2, -2, 2}, {2, -2, 2}, {0, 2, 2}};
    std::vector<Eigen::Vector2d> uv(3, Eigen::Vector2d(0.1, 0.5)), blue(3, Eigen::Vector2d(0.9, 0.5));
    if (near_first) {
      v.insert(v.end(), far.begin(), far.end());
      uv.insert(uv.end(), blue.begin(), blue.end());
    } else {
      far.insert(far.end(), v.begin(), v.end());
      blue.insert(blue.end(), uv.begin(), uv.end());
      v = far;
      uv = blue;
    }
    const auto r = rasterize(triangles(v, uv), TextureMap(tex), cam, Eigen::Matrix4d::Identity());
    zorder = zorder && r.image.rgb(32, 32) == Rgb{255, 0, 0};
  }
  RenderOptions bg;
  bg.background = {10, 20, 30};
  const bool background =
      rasterize(MeshAsset{}, TextureMap::solid(4, {1, 2, 3}), cam, Eigen::Matrix4d::Identity(), bg).image ==
      Image(64, 64, {10, 20, 30});
  return {a == b && a == kGoldenHash && zorder && background,
          "golden " + hex64(a) + (a == kGoldenHash ? " (matches)" : " (expected " + hex64(kGoldenHash) + ")") +
              ", z-order " + (zorder ? "ok" : "wrong") + ", background " + (background ? "ok" : "wrong")};
}

Outcome arrangement() {
  Rng rng(77);
  int bad = 0;
  for (int k = 0; k < 100; ++k) {
    const int w = 4 + static_cast<int>(rng.index(20)), h = 4 + static_cast<int>(rng.index(20));
    const Image f = random_image(rng, w, h), b = random_image(rng, w, h);
    for (auto m : {Arrangement::kA, Arrangement::kB, Arrangement::kC}) {
      const auto [f2, b2] = unarrange_target(arrange_target(f, b, m), m);
      bad += !(f2 == f && b2 == b);
    }
  }
  int rot = 0;
  for (int k = 0; k < 10; ++k) {
    const int s = 4 + static_cast<int>(rng.index(20));
    const Image f = random_image(rng, s, s), b = random_image(rng, s, s);
    const Image bi = arrange_target(f, b, Arrangement::kB), ci = arrange_target(f, b, Arrangement::kC);
    if (ci.width != bi.height || ci.height != bi.width) {
      ++rot;
      continue;
    }
    for (int y = 0; y < bi.height; ++y)
      for (int x = 0; x < bi.width; ++x) rot += ci.rgb(bi.height - 1 - y, x) != bi.rgb(x, y);
  }
  return {bad == 0 && rot == 0, std::to_string(300 - bad) + "/300 round trips exact, " + std::to_string(rot) +
                                    " pixels differ between C and B rotated clockwise"};
}

Outcome loss_algebra() {
  using D = double;
  const nn::Tensor<D> zero(1, 1, 3, 3, 0.0);
  const double half = std::abs(cgan_loss(zero, zero).loss_d - 2 * std::log(2.0));

  Rng rng(4);
  GeneratorConfig g;
  g.in_h = g.out_h = g.in_w = g.out_w = 16;
  g.base = 8;
  g.depth = 2;
  g.dropout = 0;
  DiscriminatorConfig dc;
  dc.base = 8;
  dc.layers = 1;
  TrainConfig t;
  Pix2Pix<D> gan(g, dc, t);
  const auto x = random_tensor<D>(rng, 1, 3, 16, 16), y = random_tensor<D>(rng, 1, 3, 16, 16);
  auto ps = gan.generator().params();
  gan.generator_gradients(x, y, 1.0, t.lambda_l1);
  const auto total = grads_of(ps);
  gan.generator_gradients(x, y, 1.0, 0.0);
  const auto adv = grads_of(ps);
  gan.generator_gradients(x, y, 0.0, 1.0);
  const auto l1 = grads_of(ps);
  double eq3 = 0;
  for (std::size_t p = 0; p < ps.size(); ++p)
    for (std::size_t i = 0; i < total[p].size(); ++i)
      eq3 = std::max(eq3, std::abs(total[p][i] - (adv[p][i] + t.lambda_l1 * l1[p][i])));

  RegressorConfig rc;
  rc.resolution = 32;
  rc.base = 4;
  rc.depth = 3;
  rc.feature = 16;
  rc.hidden = 16;
  RecoveryTrainConfig tc;
  MeshRecovery<D> rec(rc, {}, tc, basis());
  const auto img = random_tensor<D>(rng, 3, 3, 32, 32);
  std::vector<RecoveryTarget> targets;
  for (int i = 0; i < 3; ++i) {
    ThetaVector<D> th;
    const BodyParams p = random_params(rng, 0.6);
    th.head<kNumPose>() = p.theta;
    th.segment<kNumBetas>(kNumPose) = p.beta;
    th.tail<3>() << rng.uniform(0.5, 1.5), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2);
    RecoveryTarget tg;
    tg.x = th;
    tg.joints2d = project_theta<D>(basis(), th);
    tg.joints3d = root_aligned_joints<D>(basis(), th);
    targets.push_back(tg);
  }
  targets[1].visible[3] = false;
  auto rps = rec.regressor().params();
  rec.objective_gradients(img, targets);
  const auto rt = grads_of(rps);
  rec.regressor_gradients(img, targets, 1, 0, 0);
  const auto rr = grads_of(rps);
  rec.regressor_gradients(img, targets, 0, 1, 0);
  const auto r3 = grads_of(rps);
  rec.regressor_gradients(img, targets, 0, 0, 1);
  const auto ra = grads_of(rps);
  double eq4 = 0;
  for (std::size_t p = 0; p < rt.size(); ++p)
    for (std::size_t i = 0; i < rt[p].size(); ++i)
      eq4 = std::max(eq4, std::abs(rt[p][i] - (tc.lambda * (rr[p][i] + r3[p][i]) + ra[p][i])));

  const auto a = random_tensor<D>(rng, 1, 3, 4, 4), b = random_tensor<D>(rng, 1, 3, 4, 4);
  const auto l = l1_loss(a, b);
  double rel = 0;
  const double h = 1e-7;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto p = a, m = a;
    p.data[i] += h;
    m.data[i] -= h;
    const double fd = (l1_loss(p, b).value - l1_loss(m, b).value) / (2 * h);
    rel = std::max(rel, std::abs(l.grad.data[i] - fd) / std::abs(fd));
  }
  return {half < 1e-9 && eq3 < 1e-6 && eq4 < 1e-6 && rel < 1e-4,
          "cGAN(0.5) err " + fmt("%.1e", half) + ", translation additivity " + fmt("%.1e", eq3) +
              ", recovery additivity " + fmt("%.1e", eq4) + ", L1 FD rel " + fmt("%.1e", rel)};
}

FrameRecord single_frame(int res, int texture_size, std::uint64_t pose_seed, MotionStyle style, std::uint64_t tex_seed) {
  RigOptions ro;
  ro.resolution = res;
  const auto seq = sample_pose_sequence(pose_seed, 1, style);
  return render_frame(asset(), rig_default(ro), seq[0], make_procedural_texture(tex_seed, texture_size), RenderOptions{});
}

Outcome translation_overfit() {
  const auto t0 = clock_type::now();
  const FrameRecord r = single_frame(32, 64, 4, MotionStyle::kWalk, 3);
  const Image in = r.ego_stacked(), tgt = arrange_target(r.tp_front, r.tp_back, Arrangement::kC);
  TrainConfig t;
  t.seed = 1;
  t.lr_g = t.lr_d = 2e-3;
  GanModel model = make_translation_model(32, {16, 3, 16, 2, 0.5, true}, t);
  PairCache cache;
  cache.inputs.push_back(model.input_tensor(in));
  cache.targets.push_back(model.target_tensor(tgt));
  TrainLoopOptions opt;
  opt.steps = 200;
  const double l1 = train_gan(model, cache, opt).back().loss_l1;
  const double s = ssim(translate(model, in), tgt);
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  return {l1 < 0.05 && s > 0.8 && secs < 300,
          "pair " + std::to_string(tgt.width) + "x" + std::to_string(tgt.height) + ", L1 " + fmt("%.4f", l1) + ", SSIM " +
              fmt("%.3f", s) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome recovery_overfit() {
  const auto t0 = clock_type::now();
  RigOptions ro;
  ro.resolution = 64;
  const auto rig = rig_default(ro);
  std::vector<FrameRecord> frames;
  const MotionStyle styles[] = {MotionStyle::kWalk, MotionStyle::kBox};
  for (int s = 0; s < 2; ++s) {
    const TextureMap tex = make_procedural_texture(200 + s, 64);
    for (const auto& p : sample_pose_sequence(100 + s, 8, styles[s])) frames.push_back(render_frame(asset(), rig, p, tex, RenderOptions{}));
  }
  RegressorConfig rc;
  rc.resolution = 64;
  rc.base = 16;
  rc.depth = 4;
  rc.feature = 128;
  rc.hidden = 256;
  RecoveryTrainConfig tc;
  tc.batch = 8;
  tc.seed = 1;
  RecoveryModel m(rc, {}, tc, basis());
  RecoverySet set;
  for (const auto& r : frames) {
    set.images.push_back(m.input_tensor(r.tp_front));
    set.targets.push_back(make_recovery_target(basis(), r, 64, 64));
  }
  m.regressor().set_mean(mean_parameters(set.targets));
  RecoveryLoopOptions opt;
  opt.steps = 300;
  train_recovery(m, set, opt);
  double err = 0, beta = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const ThetaFull f = m.recover(frames[i].tp_front);
    err += mean_joint_error(basis(), f, set.targets[i]);
    beta = std::max(beta, (f.beta - frames[i].params.beta).cwiseAbs().maxCoeff());
  }
  err /= static_cast<double>(frames.size());
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  return {err < 0.05 && beta < 0.5 && secs < 900, "16 frames, mean joint error " + fmt("%.2f", err * 100) +
                                                       " cm, worst beta error " + fmt("%.3f", beta) + ", " +
                                                       fmt("%.1f", secs) + " s"};
}

Outcome texture_closed_loop() {
  const FrameRecord r = single_frame(32, 64, 11, MotionStyle::kIdle, 5);
  TrainConfig t;
  t.seed = 2;
  t.lr_g = t.lr_d = 2e-3;
  GanModel model = make_texture_model(32, 64, {16, 6, 16, 2, 0.5, true}, t);
  PairCache cache;
  const auto [in, tgt] = texture_pairs()(r);
  cache.inputs.push_back(model.input_tensor(in));
  cache.targets.push_back(model.target_tensor(tgt));
  TrainLoopOptions opt;
  opt.steps = 200;
  opt.kind = kTextureKind;
  train_gan(model, cache, opt);
  const TextureMap generated = generate_texture(model, in);
  RigOptions ro;
  ro.resolution = 64;
  const auto cam = rig_default(ro)[2];
  const MeshAsset mesh = forward(asset(), r.params);
  const Eigen::Matrix4d pose = camera_world_pose(cam, mesh.joint_transforms);
  const double s = ssim(rasterize(mesh, generated, cam, pose).image, rasterize(mesh, r.texture, cam, pose).image);
  return {s > 0.7, "re-rendered SSIM " + fmt("%.3f", s)};
}

Outcome metrics() {
  Rng rng(1);
  const Image a = random_image(rng, 32, 24);
  const double s = ssim(a, a), e = rmse(a, a);
  Eigen::MatrixX2d gt(24, 2);
  for (int k = 0; k < 24; ++k) gt.row(k) << rng.uniform(0, 128), rng.uniform(0, 128);
  Eigen::MatrixX2d pred = gt;
  pred.col(0).array() += 3;
  pred.col(1).array() += 4;
  const double off = joints_rmse(pred, gt, std::vector<bool>(24, true));
  const int n = 24 * 200;
  Eigen::MatrixX2d zero = Eigen::MatrixX2d::Zero(n, 2), noisy(n, 2);
  for (int k = 0; k < n; ++k) noisy.row(k) << rng.normal(0, 2), rng.normal(0, 2);
  const double mc = joints_rmse(noisy, zero, std::vector<bool>(n, true));
  const double want = 2 * std::sqrt(2.0);
  return {std::abs(s - 1) < 1e-12 && e == 0 && off == 5.0 && std::abs(mc - want) < 0.15 * want,
          "ssim(a,a) " + fmt("%.6f", s) + ", rmse(a,a) " + fmt("%g", e) + ", (3,4) offset " + fmt("%.17g", off) +
              ", sigma=2 RMSE " + fmt("%.3f", mc) + " vs " + fmt("%.3f", want)};
}

int run(const std::string& exe, const std::string& args) {
  const std::string cmd = exe + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end(const std::string& exe, const std::filesystem::path& work) {
  namespace fs = std::filesystem;
  const auto t0 = clock_type::now();
  const fs::path root = work / "e2e";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string opts = " --data_root " + (root / "data").string() + " --models_root " + (root / "models").string() +
                           " --output_root " + (root / "out").string() +
                           " --dataset.sequences 2 --dataset.frames 4 --dataset.resolution 64 --dataset.texture_size 64"
                           " --translate.depth 6 --translate.base 16 --texture.depth 6 --texture.base 16"
                           " --translate.steps 50 --recover.steps 50 --texture.steps 50";
  for (const char* cmd : {"gen-data", "train-translate", "train-recover", "train-texture"})
    if (int rc = run(exe, std::string(cmd) + opts); rc != 0) return {false, std::string(cmd) + " exited " + std::to_string(rc)};
  const DatasetManifest data = DatasetManifest::load(root / "data");
  const auto test = data.indices(Split::kTest);
  if (test.empty()) return {false, "no held-out frame"};
  const fs::path out = root / "infer";
  if (int rc = run(exe, "infer" + opts + " --front " + data.image_path(test[0], "ego_front").string() + " --back " +
                            data.image_path(test[0], "ego_back").string() + " --out " + out.string());
      rc != 0)
    return {false, "infer exited " + std::to_string(rc)};
  std::set<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) files.insert(fs::relative(e.path(), out).generic_string());
  const std::set<std::string> want = {"mesh.obj", "mesh.mtl", "skeleton.txt", "texture.png", "params.txt", "views",
                                      "views/view_000.png", "views/view_090.png", "views/view_180.png",
                                      "views/view_270.png"};
  const ObjData obj = load_obj(out / "mesh.obj");
  const bool uv_ok = obj.uv_coords.rows() > 0 && obj.uv_coords.minCoeff() >= 0 && obj.uv_coords.maxCoeff() <= 1;
  const BodyParams p = load_params(out / "params.txt");
  p.validate();
  forward(asset(), p);

  const int n = 12;
  save_pose_sequence(root / "walk.seq", sample_pose_sequence(9, n, MotionStyle::kWalk));
  if (int rc = run(exe, "animate" + opts + " --params " + (out / "params.txt").string() + " --texture " +
                            (out / "texture.png").string() + " --poses " + (root / "walk.seq").string() + " --out " +
                            (root / "anim").string());
      rc != 0)
    return {false, "animate exited " + std::to_string(rc)};
  int frames = 0;
  for (const auto& e : fs::directory_iterator(root / "anim")) frames += e.path().extension() == ".png";
  std::set<std::string> hashes;
  std::ifstream csv(root / "anim" / "frames.csv");
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) hashes.insert(line.substr(line.find(',') + 1));
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  const bool ok = files == want && uv_ok && frames == n && hashes.size() == 1 && secs < 1200;
  return {ok, std::string("artifacts ") + (files == want ? "complete" : "WRONG") + ", OBJ " +
                  std::to_string(obj.vertices.rows()) + " vertices, UVs " + (uv_ok ? "in [0,1]" : "OUT OF RANGE") +
                  ", params reload, " + std::to_string(frames) + "/" + std::to_string(n) + " animation frames, " +
                  std::to_string(hashes.size()) + " distinct shape hash, " + fmt("%.1f", secs) + " s"};
}

Outcome directional(const std::filesystem::path& work, bool full) {
  namespace fs = std::filesystem;
  DatasetConfig dc;
  ArrangementBudget budget;
  if (full) {
    dc.sequences = 44;
    dc.frames = 50;
    dc.resolution = 64;
    dc.texture_size = 64;
    budget.steps = 5000;
    budget.max_train_frames = 2000;
    budget.max_test_frames = 200;
    budget.size = {32, 6, 32, 3, 0.5, true};
  } else {
    dc.sequences = 6;
    dc.frames = 6;
    dc.resolution = 32;
    dc.texture_size = 32;
    dc.test_fraction = 0.34;
    budget.steps = 300;
    budget.size = {16, 5, 16, 2, 0.5, true};
  }
  budget.train.lr_g = budget.train.lr_d = full ? 2e-4 : 1e-3;
  budget.train.seed = 3;
  const fs::path root = work / "directional";
  fs::remove_all(root);
  const DatasetManifest data = generate_dataset(dc, 19, root / "data");
  const ArrangementTable t = run_arrangement_experiment(data, budget);
  t.save(root / "report");
  const auto& a = t.row(Arrangement::kA);
  const auto& b = t.row(Arrangement::kB);
  const auto& c = t.row(Arrangement::kC);
  const std::string frames = std::to_string(data.indices(Split::kTrain).size());
  return {c.ssim >= a.ssim, std::string(full ? "full" : "reduced") + " budget (" + frames + " train frames, " +
                                std::to_string(budget.steps) + " steps): SSIM A " + fmt("%.3f", a.ssim) + ", B " +
                                fmt("%.3f", b.ssim) + ", C " + fmt("%.3f", c.ssim) + "; RMSE A " + fmt("%.1f", a.rmse) +
                                ", B " + fmt("%.1f", b.rmse) + ", C " + fmt("%.1f", c.rmse)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string exe = PIPELINE_EXE;
  std::string work = (std::filesystem::temp_directory_path() / "egobody_acceptance").string();
  bool full = false;
  app.add_option("--pipeline", exe, "pipeline executable");
  app.add_option("--work", work, "scratch directory");
  app.add_flag("--full-experiment", full, "run criterion 11 at 2000 frames / 5000 steps");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    bool blocking = true;
  };
  const std::vector<Criterion> criteria = {
      {1, "body model correctness", body_model},
      {2, "rig hip-offset invariant", rig_invariant},
      {3, "renderer determinism", renderer},
      {4, "arrangement round trip", arrangement},
      {5, "loss algebra", loss_algebra},
      {6, "translation overfit", translation_overfit},
      {7, "recovery overfit", recovery_overfit},
      {8, "texture closed loop", texture_closed_loop},
      {9, "metric correctness", metrics},
      {10, "end-to-end smoke", [&] { return end_to_end(exe, work); }},
      {11, "arrangement C vs A (directional)", [&] { return directional(work, full); }, false},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const char* tag = o.pass ? "PASS" : (c.blocking ? "FAIL" : "WARN");
    std::printf("[%s] criterion %d: %s: %s\n", tag, c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass && c.blocking;
  }
  std::error_code ec;
  std::filesystem::remove_all(work, ec);
  return failures == 0 ? 0 : 1;
}
