#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "egobody/nn/checkpoint.hpp"
#include "egobody/nn/layers.hpp"
#include "egobody/nn/losses.hpp"
#include "egobody/nn/optim.hpp"
#include "test_util.hpp"

using namespace egobody;
using namespace egobody::nn;
using egobody::testing::TempDir;

namespace {

using D = double;

Tensor<D> random_tensor(Rng& rng, int n, int c, int h, int w, double scale = 1.0) {
  Tensor<D> t(n, c, h, w);
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

double dot(const Tensor<D>& a, const Tensor<D>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

// Checks d<r, layer(x)>/dx and d/dparams against central differences.
void check_layer_gradients(Layer<D>& layer, const Tensor<D>& x, Rng& rng, double tol = 1e-6) {
  std::vector<Param<D>*> ps;
  layer.collect(ps);
  for (auto* p : ps) init_normal(*p, rng, 0.1, 0.5);
  const Tensor<D> y0 = layer.forward(x, false);
  const Tensor<D> r = random_tensor(rng, y0.n, y0.c, y0.h, y0.w);
  zero_grads(ps);
  layer.forward(x, true);
  const Tensor<D> gx = layer.backward(r);
  auto objective = [&](const Tensor<D>& in) { return dot(r, layer.forward(in, false)); };
  const double h = 1e-6;
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t i = rng.index(x.size());
    Tensor<D> xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    const double fd = (objective(xp) - objective(xm)) / (2 * h);
    EXPECT_NEAR(gx.data[i], fd, tol * std::max(1.0, std::abs(fd))) << "input " << i;
  }
  for (auto* p : ps) {
    for (int trial = 0; trial < 6; ++trial) {
      const std::size_t i = rng.index(p->value.size());
      const double old = p->value.data[i];
      p->value.data[i] = old + h;
      const double fp = objective(x);
      p->value.data[i] = old - h;
      const double fm = objective(x);
      p->value.data[i] = old;
      const double fd = (fp - fm) / (2 * h);
      EXPECT_NEAR(p->grad.data[i], fd, tol * std::max(1.0, std::abs(fd))) << p->name << " " << i;
    }
  }
}

// Direct convolution, no im2col.
Tensor<D> naive_conv(const Tensor<D>& x, const Tensor<D>& w, const Tensor<D>& b, int stride, int pad) {
  const int k = w.h, cout = w.n;
  const int ho = (x.h + 2 * pad - k) / stride + 1, wo = (x.w + 2 * pad - k) / stride + 1;
  Tensor<D> y(x.n, cout, ho, wo);
  for (int i = 0; i < x.n; ++i)
    for (int co = 0; co < cout; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double s = b.data[co];
          for (int ci = 0; ci < x.c; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) s += w.at(co, ci, ky, kx) * x.at(i, ci, iy, ix);
              }
          y.at(i, co, oy, ox) = s;
        }
  return y;
}

}  // namespace

TEST(Conv, MatchesDirectConvolution) {
  Rng rng(1);
  Conv2d<D> conv("c", 3, 5, 4, 2, 1);
  std::vector<Param<D>*> ps;
  conv.collect(ps);
  for (auto* p : ps) init_normal(*p, rng, 0, 1);
  const Tensor<D> x = random_tensor(rng, 2, 3, 9, 7);
  const Tensor<D> y = conv.forward(x, false);
  const Tensor<D> ref = naive_conv(x, ps[0]->value, ps[1]->value, 2, 1);
  ASSERT_TRUE(y.same_shape(ref));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data[i], ref.data[i], 1e-12);
}

TEST(Conv, Gradients) {
  Rng rng(2);
  Conv2d<D> conv("c", 2, 3, 4, 2, 1);
  check_layer_gradients(conv, random_tensor(rng, 2, 2, 8, 6), rng);
  Conv2d<D> s1("s1", 3, 2, 3, 1, 1);
  check_layer_gradients(s1, random_tensor(rng, 1, 3, 5, 5), rng);
}

TEST(ConvTranspose, IsAdjointOfConv) {
  // <deconv(x), y> == <x, conv(y)> with shared weights and no bias.
  Rng rng(3);
  ConvTranspose2d<D> up("u", 4, 3, 4, 2, 1, false);
  Conv2d<D> down("d", 3, 4, 4, 2, 1, false);
  std::vector<Param<D>*> pu, pd;
  up.collect(pu);
  down.collect(pd);
  init_normal(*pu[0], rng, 0, 1);
  // deconv weight (cin=4, cout=3, k, k) equals conv weight (cout=4, cin=3, k, k)
  pd[0]->value.data = pu[0]->value.data;
  const Tensor<D> x = random_tensor(rng, 1, 4, 5, 6);
  const Tensor<D> up_x = up.forward(x, false);
  EXPECT_EQ(up_x.h, 10);
  EXPECT_EQ(up_x.w, 12);
  const Tensor<D> y = random_tensor(rng, 1, 3, 10, 12);
  EXPECT_NEAR(dot(up_x, y), dot(x, down.forward(y, false)), 1e-9);
}

TEST(ConvTranspose, Gradients) {
  Rng rng(4);
  ConvTranspose2d<D> up("u", 3, 2, 4, 2, 1);
  check_layer_gradients(up, random_tensor(rng, 2, 3, 4, 3), rng);
}

TEST(InstanceNorm, NormalizesAndGradients) {
  Rng rng(5);
  InstanceNorm2d<D> norm("n", 3);
  const Tensor<D> x = random_tensor(rng, 2, 3, 4, 5, 3.0);
  const Tensor<D> y = norm.forward(x, false);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c) {
      double m = 0, v = 0;
      for (int q = 0; q < 20; ++q) m += y.sample(i)[c * 20 + q];
      m /= 20;
      for (int q = 0; q < 20; ++q) v += std::pow(y.sample(i)[c * 20 + q] - m, 2);
      EXPECT_NEAR(m, 0, 1e-12);
      EXPECT_NEAR(v / 20, 1, 1e-5);
    }
  check_layer_gradients(norm, x, rng, 1e-5);
}

TEST(Layers, ActivationGradients) {
  Rng rng(6);
  LeakyRelu<D> lrelu(0.2);
  check_layer_gradients(lrelu, random_tensor(rng, 1, 2, 3, 3), rng);
  Tanh<D> tanh_layer;
  check_layer_gradients(tanh_layer, random_tensor(rng, 1, 2, 3, 3), rng);
  GlobalAvgPool<D> pool;
  check_layer_gradients(pool, random_tensor(rng, 2, 3, 4, 4), rng);
  Linear<D> lin("l", 6, 4);
  check_layer_gradients(lin, random_tensor(rng, 3, 6, 1, 1), rng);
}

TEST(Layers, SequentialRecordsRepeatedApplications) {
  Rng rng(7);
  Sequential<D> net;
  net.add<Linear<D>>("a", 4, 4);
  net.add<Tanh<D>>();
  std::vector<Param<D>*> ps;
  net.collect(ps);
  for (auto* p : ps) init_normal(*p, rng, 0, 0.5);
  // f(x) = net(net(x)); gradient via two recorded applications.
  const Tensor<D> x = random_tensor(rng, 1, 4, 1, 1);
  const Tensor<D> r = random_tensor(rng, 1, 4, 1, 1);
  zero_grads(ps);
  const Tensor<D> y = net.forward(net.forward(x, true), true);
  const Tensor<D> gx = net.backward(net.backward(r));
  const double h = 1e-6;
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor<D> xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    const double fd = (dot(r, net.forward(net.forward(xp, false), false)) - dot(r, net.forward(net.forward(xm, false), false))) / (2 * h);
    EXPECT_NEAR(gx.data[i], fd, 1e-7);
  }
  EXPECT_THROW(net.backward(r), std::logic_error);
  (void)y;
}

TEST(Layers, DropoutTogglesAndScales) {
  Dropout<D> drop(0.5, 9);
  const Tensor<D> x(1, 1, 20, 20, 1.0);
  const Tensor<D> y = drop.forward(x, false);
  int zeros = 0;
  for (double v : y.data) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    zeros += v == 0.0;
  }
  EXPECT_GT(zeros, 120);
  EXPECT_LT(zeros, 280);
  drop.set_active(false);
  EXPECT_EQ(drop.forward(x, false).data, x.data);
}

TEST(Layers, ConvRejectsWrongChannels) {
  Conv2d<D> conv("c", 3, 4, 4, 2, 1);
  EXPECT_THROW(conv.forward(Tensor<D>(1, 2, 8, 8), false), std::exception);
  EXPECT_THROW(conv.forward(Tensor<D>(1, 3, 1, 1), false), InvalidArgument);
}

// --- losses -----------------------------------------------------------------

TEST(CganLoss, HalfProbability) {
  const Tensor<D> zero(1, 1, 3, 3, 0.0);
  const auto l = cgan_loss(zero, zero);
  EXPECT_NEAR(l.loss_d, 2 * std::log(2.0), 1e-9);
  EXPECT_NEAR(l.loss_g_adv, std::log(2.0), 1e-9);
}

TEST(CganLoss, PerfectDiscriminator) {
  const auto l = cgan_loss(Tensor<D>(1, 1, 2, 2, 40.0), Tensor<D>(1, 1, 2, 2, -40.0));
  EXPECT_LT(l.loss_d, 1e-6);
  EXPECT_GT(l.loss_g_adv, 15.0);  // clamped at -log(1e-7)
  EXPECT_NEAR(l.loss_g_adv, -std::log(1e-7), 1e-9);
}

TEST(CganLoss, HandComputedTwoByTwo) {
  Tensor<D> real(1, 1, 2, 2), fake(1, 1, 2, 2);
  real.data = {0.3, -1.2, 2.0, 0.7};
  fake.data = {-0.5, 1.1, -2.2, 0.0};
  double d = 0, g = 0;
  for (int i = 0; i < 4; ++i) {
    const double sr = 1 / (1 + std::exp(-real.data[i])), sf = 1 / (1 + std::exp(-fake.data[i]));
    d += -std::log(sr) - std::log(1 - sf);
    g += -std::log(sf);
  }
  const auto l = cgan_loss(real, fake);
  EXPECT_NEAR(l.loss_d, d / 4, 1e-12);
  EXPECT_NEAR(l.loss_g_adv, g / 4, 1e-12);
}

TEST(CganLoss, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  const Tensor<D> real = random_tensor(rng, 1, 1, 3, 3), fake = random_tensor(rng, 1, 1, 3, 3);
  const auto l = cgan_loss(real, fake);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 9; ++i) {
    Tensor<D> fp = fake, fm = fake, rp = real, rm = real;
    fp.data[i] += h;
    fm.data[i] -= h;
    rp.data[i] += h;
    rm.data[i] -= h;
    EXPECT_NEAR(l.grad_d_fake.data[i], (cgan_loss(real, fp).loss_d - cgan_loss(real, fm).loss_d) / (2 * h), 1e-8);
    EXPECT_NEAR(l.grad_g_fake.data[i], (cgan_loss(real, fp).loss_g_adv - cgan_loss(real, fm).loss_g_adv) / (2 * h), 1e-8);
    EXPECT_NEAR(l.grad_d_real.data[i], (cgan_loss(rp, fake).loss_d - cgan_loss(rm, fake).loss_d) / (2 * h), 1e-8);
  }
}

TEST(CganLoss, LabelSwapSymmetry) {
  Rng rng(9);
  const Tensor<D> a = random_tensor(rng, 1, 1, 4, 4), b = random_tensor(rng, 1, 1, 4, 4);
  // Feeding real as fake and fake as real is the same as negating scores.
  Tensor<D> na = a * -1.0, nb = b * -1.0;
  EXPECT_NEAR(cgan_loss(a, b).loss_d, cgan_loss(nb, na).loss_d, 1e-12);
}

TEST(L1Loss, ClosedForms) {
  Rng rng(10);
  const Tensor<D> a = random_tensor(rng, 2, 3, 4, 4);
  EXPECT_EQ(l1_loss(a, a).value, 0.0);
  Tensor<D> b = a;
  for (auto& v : b.data) v += 0.25;
  EXPECT_NEAR(l1_loss(a, b).value, 0.25, 1e-12);
  EXPECT_THROW(l1_loss(a, Tensor<D>(1, 3, 4, 4)), InvalidArgument);
}

TEST(L1Loss, MatchesLoopOracle) {
  Rng rng(11);
  const Tensor<D> a = random_tensor(rng, 1, 3, 5, 5), b = random_tensor(rng, 1, 3, 5, 5);
  double s = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) s += std::abs(a.at(0, c, y, x) - b.at(0, c, y, x));
  EXPECT_NEAR(l1_loss(a, b).value, s / 75, 1e-6);
}

TEST(L1Loss, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  const Tensor<D> a = random_tensor(rng, 1, 3, 4, 4), b = random_tensor(rng, 1, 3, 4, 4);
  const auto l = l1_loss(a, b);
  const double h = 1e-7;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Tensor<D> p = a, m = a;
    p.data[i] += h;
    m.data[i] -= h;
    const double fd = (l1_loss(p, b).value - l1_loss(m, b).value) / (2 * h);
    EXPECT_NEAR(l.grad.data[i], fd, 1e-4 * std::abs(fd));
  }
}

// --- optimizer and checkpoint -------------------------------------------------

TEST(Adam, FirstStepMovesByLearningRate) {
  Param<D> p("w", 1, 1, 1, 3);
  p.value.data = {1.0, -2.0, 0.5};
  p.grad.data = {0.3, -4.0, 1e-3};
  Adam<D> opt({&p}, {0.01, 0.5, 0.999, 1e-8});
  opt.step();
  // After bias correction the first update is lr * g / (|g| + eps).
  EXPECT_NEAR(p.value.data[0], 1.0 - 0.01, 1e-7);
  EXPECT_NEAR(p.value.data[1], -2.0 + 0.01, 1e-7);
  EXPECT_NEAR(p.value.data[2], 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-9);
}

TEST(Adam, MinimizesQuadratic) {
  Param<D> p("w", 1, 1, 1, 2);
  p.value.data = {3.0, -1.5};
  Adam<D> opt({&p}, {0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 2000; ++i) {
    p.grad.data = {2 * (p.value.data[0] - 1), 2 * (p.value.data[1] + 2)};
    opt.step();
  }
  EXPECT_NEAR(p.value.data[0], 1.0, 1e-3);
  EXPECT_NEAR(p.value.data[1], -2.0, 1e-3);
}

TEST(Checkpoint, RoundTripAndStableBytes) {
  TempDir dir;
  Rng rng(13);
  Param<float> a("a", 1, 2, 3, 3), b("b", 1, 1, 1, 5);
  for (auto* p : {&a, &b}) {
    for (auto& v : p->value.data) v = static_cast<float>(rng.normal());
    for (auto& v : p->m.data) v = static_cast<float>(rng.normal());
  }
  kv::Document h;
  h.set("kind", "test");
  h.set("width", 64);
  save_checkpoint<float>(dir / "a.ckpt", h, {{"G", {&a, &b}}});
  save_checkpoint<float>(dir / "b.ckpt", h, {{"G", {&a, &b}}});
  EXPECT_EQ(hash_file(dir / "a.ckpt"), hash_file(dir / "b.ckpt"));

  Param<float> a2("a", 1, 2, 3, 3), b2("b", 1, 1, 1, 5);
  const kv::Document back = load_checkpoint<float>(dir / "a.ckpt", {{"G", {&a2, &b2}}});
  EXPECT_EQ(a2.value.data, a.value.data);
  EXPECT_EQ(b2.m.data, b.m.data);
  EXPECT_EQ(back.get_int("width"), 64);

  Param<float> wrong("a", 1, 2, 3, 4);
  EXPECT_THROW(load_checkpoint<float>(dir / "a.ckpt", {{"G", {&wrong, &b2}}}), ConfigError);
  EXPECT_THROW(load_checkpoint<double>(dir / "a.ckpt", {}), ConfigError);
  kv::Document expected;
  expected.set("width", 128);
  EXPECT_THROW(require_same_config(back, expected, "ckpt"), ConfigError);
  EXPECT_THROW(read_checkpoint_header(dir / "missing.ckpt"), MissingArtifact);
  write_file_bytes(dir / "junk.ckpt", "not a checkpoint");
  EXPECT_THROW(read_checkpoint_header(dir / "junk.ckpt"), ParseError);
}

TEST(Tensor, ImageRoundTrip) {
  Rng rng(14);
  Image img(7, 5);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
  EXPECT_EQ(tensor_to_image(image_to_tensor<float>(img)), img);
  EXPECT_EQ(tensor_to_image(image_to_tensor<double>(img)), img);
}

TEST(Tensor, ConcatSplitInverse) {
  Rng rng(15);
  const Tensor<D> a = random_tensor(rng, 2, 3, 2, 2), b = random_tensor(rng, 2, 1, 2, 2);
  const auto [a2, b2] = split_channels(concat_channels(a, b), 3);
  EXPECT_EQ(a2.data, a.data);
  EXPECT_EQ(b2.data, b.data);
}
