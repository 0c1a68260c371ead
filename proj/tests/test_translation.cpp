#include <gtest/gtest.h>

#include "egobody/eval/metrics.hpp"
#include "egobody/translate/translation.hpp"
#include "test_util.hpp"

using namespace egobody;
using egobody::testing::TempDir;

namespace {

GeneratorConfig small_gen(int h, int w, int depth = 3) {
  GeneratorConfig g;
  g.in_h = g.out_h = h;
  g.in_w = g.out_w = w;
  g.base = 8;
  g.depth = depth;
  return g;
}

DiscriminatorConfig small_disc(int layers = 2) {
  DiscriminatorConfig d;
  d.base = 8;
  d.layers = layers;
  return d;
}

template <class T>
nn::Tensor<T> random_image_tensor(Rng& rng, int h, int w) {
  nn::Tensor<T> t(1, 3, h, w);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-1, 1));
  return t;
}

template <class T>
std::vector<std::vector<T>> grads_of(const std::vector<nn::Param<T>*>& ps) {
  std::vector<std::vector<T>> g;
  for (auto* p : ps) g.push_back(p->grad.data);
  return g;
}

// One rendered frame at `res`, Method C arranged.
std::pair<Image, Image> rendered_pair(int res) {
  const BodyModelAsset asset = make_procedural_humanoid(0);
  RigOptions ro;
  ro.resolution = res;
  const auto seq = sample_pose_sequence(4, 1, MotionStyle::kWalk);
  const FrameRecord r = render_frame(asset, rig_default(ro), seq[0], make_procedural_texture(3, 64), RenderOptions{});
  return {r.ego_stacked(), arrange_target(r.tp_front, r.tp_back, Arrangement::kC)};
}

}  // namespace

TEST(Networks, GeneratorShape) {
  UNetGenerator<float> g(small_gen(64, 64), 1);
  const auto y = g.forward(nn::Tensor<float>(1, 3, 64, 64), false);
  EXPECT_EQ(y.c, 3);
  EXPECT_EQ(y.h, 64);
  EXPECT_EQ(y.w, 64);
  for (float v : y.data) EXPECT_LE(std::abs(v), 1.0f);
  EXPECT_THROW(g.forward(nn::Tensor<float>(1, 3, 32, 64), false), InvalidArgument);
}

TEST(Networks, DiscriminatorIsPatchwise) {
  DiscriminatorConfig d = small_disc(3);
  PatchDiscriminator<float> disc(d, 2);
  const auto s = disc.forward(nn::Tensor<float>(1, 3, 64, 64), nn::Tensor<float>(1, 3, 64, 64), false);
  EXPECT_EQ(s.c, 1);
  EXPECT_LT(s.h, 64);
  EXPECT_GT(s.h * s.w, 1);
  EXPECT_EQ(s.h, 6);
  EXPECT_EQ(d.receptive_field(), 70);
}

TEST(Networks, SkipConnectionsChangeParameterCountOnly) {
  GeneratorConfig a = small_gen(32, 32);
  GeneratorConfig b = a;
  b.use_skip = false;
  UNetGenerator<float> ga(a, 1), gb(b, 1);
  EXPECT_NE(nn::count_params(ga.params()), nn::count_params(gb.params()));
  const auto ya = ga.forward(nn::Tensor<float>(1, 3, 32, 32), false);
  const auto yb = gb.forward(nn::Tensor<float>(1, 3, 32, 32), false);
  EXPECT_TRUE(ya.same_shape(yb));
  UNetGenerator<float> again(a, 1);
  EXPECT_EQ(nn::count_params(again.params()), nn::count_params(ga.params()));
}

TEST(Networks, InvalidConfigs) {
  GeneratorConfig g = small_gen(60, 64);
  EXPECT_THROW(g.validate(), ConfigError);
  DiscriminatorConfig d;
  d.layers = 0;
  EXPECT_THROW(d.validate(), ConfigError);
  TrainConfig t;
  t.batch = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.lambda_l1 = -1;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Networks, GeneratorInputGradient) {
  Rng rng(3);
  GeneratorConfig cfg = small_gen(16, 16, 2);
  cfg.base = 4;
  cfg.dropout = 0;
  UNetGenerator<double> g(cfg, 5);
  const auto x = random_image_tensor<double>(rng, 16, 16);
  const auto r = random_image_tensor<double>(rng, 16, 16);
  auto f = [&](const nn::Tensor<double>& in) {
    const auto y = g.forward(in, false);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r.data[i] * y.data[i];
    return s;
  };
  g.forward(x, true);
  const auto gx = g.backward(r);
  for (int t = 0; t < 10; ++t) {
    const std::size_t i = rng.index(x.size());
    auto xp = x, xm = x;
    xp.data[i] += 1e-6;
    xm.data[i] -= 1e-6;
    const double fd = (f(xp) - f(xm)) / 2e-6;
    EXPECT_NEAR(gx.data[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Training, GeneratorGradientIsSumOfTerms) {
  Rng rng(4);
  GeneratorConfig g = small_gen(16, 16, 2);
  g.dropout = 0;
  TrainConfig t;
  t.lambda_l1 = 100;
  Pix2Pix<double> model(g, small_disc(1), t);
  const auto x = random_image_tensor<double>(rng, 16, 16), y = random_image_tensor<double>(rng, 16, 16);
  auto ps = model.generator().params();
  model.generator_gradients(x, y, 1.0, t.lambda_l1);
  const auto total = grads_of(ps);
  model.generator_gradients(x, y, 1.0, 0.0);
  const auto adv = grads_of(ps);
  model.generator_gradients(x, y, 0.0, 1.0);
  const auto l1 = grads_of(ps);
  double worst = 0;
  for (std::size_t p = 0; p < ps.size(); ++p)
    for (std::size_t i = 0; i < total[p].size(); ++i)
      worst = std::max(worst, std::abs(total[p][i] - (adv[p][i] + t.lambda_l1 * l1[p][i])));
  EXPECT_LT(worst, 1e-6);
}

TEST(Training, LambdaZeroIgnoresL1) {
  Rng rng(5);
  GeneratorConfig g = small_gen(16, 16, 2);
  g.dropout = 0;
  TrainConfig t;
  t.lambda_l1 = 0;
  Pix2Pix<double> model(g, small_disc(1), t);
  const auto x = random_image_tensor<double>(rng, 16, 16), y = random_image_tensor<double>(rng, 16, 16);
  auto ps = model.generator().params();
  const auto [adv, l1] = model.generator_gradients(x, y, 1.0, t.lambda_l1);
  const auto with_zero = grads_of(ps);
  model.generator_gradients(x, y, 1.0, 0.0);
  EXPECT_EQ(with_zero, grads_of(ps));
  EXPECT_GT(l1, 0.0);
  EXPECT_GT(adv, 0.0);
}

TEST(Training, UpdatesTouchOnlyTheirNetwork) {
  Rng rng(6);
  Pix2Pix<float> model(small_gen(16, 16, 2), small_disc(1), TrainConfig{});
  const auto x = random_image_tensor<float>(rng, 16, 16), y = random_image_tensor<float>(rng, 16, 16);
  const auto gh = nn::hash_params(model.generator().params());
  const auto dh = nn::hash_params(model.discriminator().params());
  const auto fake = model.generator().forward(x, false);
  model.discriminator_step(x, y, fake);
  EXPECT_EQ(gh, nn::hash_params(model.generator().params()));
  EXPECT_NE(dh, nn::hash_params(model.discriminator().params()));
  const auto dh2 = nn::hash_params(model.discriminator().params());
  model.generator_gradients(x, y, 1.0, 100.0);
  EXPECT_EQ(dh2, nn::hash_params(model.discriminator().params()));
}

TEST(Training, ReproducibleTrace) {
  Rng rng(7);
  const auto x = random_image_tensor<float>(rng, 16, 16), y = random_image_tensor<float>(rng, 16, 16);
  TrainConfig t;
  t.seed = 99;
  Pix2Pix<float> a(small_gen(16, 16, 2), small_disc(1), t), b(small_gen(16, 16, 2), small_disc(1), t);
  for (int s = 0; s < 50; ++s) {
    const GanMetrics ma = a.train_step(x, y), mb = b.train_step(x, y);
    ASSERT_EQ(ma.loss_d, mb.loss_d) << s;
    ASSERT_EQ(ma.loss_g_adv, mb.loss_g_adv) << s;
    ASSERT_EQ(ma.loss_l1, mb.loss_l1) << s;
    ASSERT_TRUE(std::isfinite(ma.loss_d) && std::isfinite(ma.loss_g_adv) && std::isfinite(ma.loss_l1));
  }
}

TEST(Translate, UntrainedSmokeAndDeterminism) {
  const auto [in, tgt] = rendered_pair(32);
  TrainConfig t;
  NetworkSize size{8, 3, 8, 2, 0.5, true};
  GanModel model = make_translation_model(32, size, t);
  const Image a = translate(model, in, false);
  EXPECT_EQ(a.width, tgt.width);
  EXPECT_EQ(a.height, tgt.height);
  EXPECT_EQ(translate(model, in, false), a);
  EXPECT_THROW(translate(model, Image(32, 32), false), InvalidArgument);
}

TEST(Translate, OverfitSinglePair) {
  // Views at 32 px give a 64 x 32 stacked input and Method C target.
  const auto [in, tgt] = rendered_pair(32);
  TrainConfig t;
  t.seed = 1;
  t.lr_g = t.lr_d = 2e-3;
  NetworkSize size{16, 3, 16, 2, 0.5, true};
  GanModel model = make_translation_model(32, size, t);
  PairCache cache;
  cache.inputs.push_back(model.input_tensor(in));
  cache.targets.push_back(model.target_tensor(tgt));
  TrainLoopOptions opt;
  opt.steps = 200;
  const auto trace = train_gan(model, cache, opt);
  EXPECT_LT(trace.back().loss_l1, 0.05);
  const Image out = translate(model, in);
  EXPECT_GT(ssim(out, tgt), 0.8);
}

TEST(Checkpoint, TranslationRoundTrip) {
  TempDir dir;
  const auto [in, tgt] = rendered_pair(32);
  TrainConfig t;
  NetworkSize size{8, 3, 8, 2, 0.5, true};
  GanModel model = make_translation_model(32, size, t);
  PairCache cache;
  cache.inputs.push_back(model.input_tensor(in));
  cache.targets.push_back(model.target_tensor(tgt));
  TrainLoopOptions opt;
  opt.steps = 3;
  opt.metrics_csv = dir / "m.csv";
  train_gan(model, cache, opt);
  model.save(dir / "a.ckpt", kTranslationKind);
  model.save(dir / "b.ckpt", kTranslationKind);
  EXPECT_EQ(hash_file(dir / "a.ckpt"), hash_file(dir / "b.ckpt"));

  GanModel restored = make_translation_model(32, size, t);
  restored.load(dir / "a.ckpt", kTranslationKind);
  EXPECT_EQ(restored.step(), 3);
  EXPECT_EQ(translate(restored, in, false), translate(model, in, false));

  GanModel other = make_translation_model(64, size, t);
  EXPECT_THROW(other.load(dir / "a.ckpt", kTranslationKind), ConfigError);
  EXPECT_THROW(restored.load(dir / "a.ckpt", kTextureKind), ConfigError);

  const auto csv = read_file_bytes(dir / "m.csv");
  const std::string text(csv.begin(), csv.end());
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,loss_D,loss_G_adv,loss_L1");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Translate, MethodBResizesInput) {
  TrainConfig t;
  t.method = Arrangement::kB;
  NetworkSize size{8, 3, 8, 2, 0.5, true};
  GanModel model = make_translation_model(32, size, t);
  const Image out = translate(model, Image(32, 64, {10, 20, 30}), false);
  EXPECT_EQ(out.width, 64);
  EXPECT_EQ(out.height, 32);
}
