#pragma once

// Conditional GAN image-to-image model: generator, discriminator, their
// optimizers and the alternating training step. Shared by view translation
// and texture generation.

#include <filesystem>
#include <fstream>
#include <string>

#include "egobody/core/image.hpp"
#include "egobody/data/arrange.hpp"
#include "egobody/nn/checkpoint.hpp"
#include "egobody/nn/losses.hpp"
#include "egobody/nn/optim.hpp"
#include "egobody/translate/networks.hpp"

namespace egobody {

struct TrainConfig {
  double lambda_l1 = 100.0;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  int batch = 1;
  int max_steps = 2000;
  std::uint64_t seed = 0;
  int checkpoint_interval = 500;
  Arrangement method = Arrangement::kC;

  void validate() const {
    if (!(lambda_l1 >= 0) || !std::isfinite(lambda_l1)) throw ConfigError("lambda_l1 must be >= 0");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (!(lr_g > 0) || !(lr_d > 0)) throw ConfigError("learning rates must be > 0");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
  }
};

struct GanMetrics {
  long long step = 0;
  double loss_d = 0;
  double loss_g_adv = 0;
  double loss_l1 = 0;
};

/// Append-only CSV: step,loss_D,loss_G_adv,loss_L1.
class MetricsCsv {
 public:
  static constexpr const char* kHeader = "step,loss_D,loss_G_adv,loss_L1";

  explicit MetricsCsv(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot write metrics " + path.string());
    if (fresh) out_ << kHeader << "\n";
  }
  void append(const GanMetrics& m) {
    out_ << m.step << "," << kv::format_number(m.loss_d) << "," << kv::format_number(m.loss_g_adv) << ","
         << kv::format_number(m.loss_l1) << "\n";
    out_.flush();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

template <class T>
class Pix2Pix {
 public:
  Pix2Pix(const GeneratorConfig& g, const DiscriminatorConfig& d, const TrainConfig& t)
      : train_(t), gen_(g, derive_seed(t.seed, 0x47ULL)), disc_(d, derive_seed(t.seed, 0x44ULL)),
        opt_g_(gen_.params(), {t.lr_g}), opt_d_(disc_.params(), {t.lr_d}) {
    train_.validate();
    if (d.in_channels != g.in_channels + g.out_channels)
      throw ConfigError("discriminator input channels must equal generator input + output channels");
    gen_.reseed_dropout(derive_seed(t.seed, 0x64ULL));
  }

  UNetGenerator<T>& generator() { return gen_; }
  PatchDiscriminator<T>& discriminator() { return disc_; }
  const TrainConfig& train_config() const { return train_; }
  TrainConfig& train_config() { return train_; }
  long long step() const { return step_; }

  /// Input image (caller geometry) to generator tensor.
  nn::Tensor<T> input_tensor(const Image& img) const {
    const auto& c = gen_.config();
    if (img.width != c.in_w || img.height != c.in_h)
      throw InvalidArgument("input image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            ", model expects " + std::to_string(c.in_w) + "x" + std::to_string(c.in_h));
    return nn::image_to_tensor<T>(resize_bilinear(img, c.out_w, c.out_h));
  }

  nn::Tensor<T> target_tensor(const Image& img) const {
    const auto& c = gen_.config();
    if (img.width != c.out_w || img.height != c.out_h)
      throw InvalidArgument("target image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            ", model expects " + std::to_string(c.out_w) + "x" + std::to_string(c.out_h));
    return nn::image_to_tensor<T>(img);
  }

  /// Inference; dropout on keeps the stochastic term active.
  Image generate(const Image& input, bool dropout) {
    gen_.set_dropout(dropout);
    const nn::Tensor<T> y = gen_.forward(input_tensor(input), false);
    gen_.set_dropout(true);
    return nn::tensor_to_image(y);
  }

  /// Discriminator update on (real, detached fake). Returns loss_D.
  double discriminator_step(const nn::Tensor<T>& x, const nn::Tensor<T>& y, const nn::Tensor<T>& fake) {
    disc_.clear();
    opt_d_.zero_grad();
    const nn::Tensor<T> real_s = disc_.forward(x, y, true);
    const nn::Tensor<T> fake_s = disc_.forward(x, fake, true);
    const auto gl = nn::cgan_loss(real_s, fake_s);
    if (!std::isfinite(gl.loss_d)) throw DivergenceError("loss_D diverged at step " + std::to_string(step_));
    disc_.backward(gl.grad_d_fake, x.c);
    disc_.backward(gl.grad_d_real, x.c);
    opt_d_.step();
    return gl.loss_d;
  }

  /// Fills generator gradients for w_adv * loss_G_adv + w_l1 * loss_L1 at
  /// the current parameters. Returns {loss_G_adv, loss_L1}.
  std::pair<double, double> generator_gradients(const nn::Tensor<T>& x, const nn::Tensor<T>& y, double w_adv,
                                                double w_l1) {
    gen_.clear();
    disc_.clear();
    opt_g_.zero_grad();
    const nn::Tensor<T> fake = gen_.forward(x, true);
    return generator_gradients_from(x, y, fake, w_adv, w_l1);
  }

  GanMetrics train_step(const nn::Tensor<T>& x, const nn::Tensor<T>& y) {
    gen_.clear();
    const nn::Tensor<T> fake = gen_.forward(x, true);
    GanMetrics m;
    m.loss_d = discriminator_step(x, y, fake);
    disc_.clear();
    opt_g_.zero_grad();
    const auto [adv, l1] = generator_gradients_from(x, y, fake, 1.0, train_.lambda_l1);
    m.loss_g_adv = adv;
    m.loss_l1 = l1;
    opt_g_.step();
    opt_d_.zero_grad();
    m.step = ++step_;
    return m;
  }

  kv::Document config_document(const std::string& kind) const {
    kv::Document d;
    d.set("kind", kind);
    gen_.config().put(d, "generator.");
    disc_.config().put(d, "discriminator.");
    d.set("arrangement", arrangement_name(train_.method));
    return d;
  }

  void save(const std::filesystem::path& path, const std::string& kind) {
    kv::Document h = config_document(kind);
    h.set("step", static_cast<long long>(step_));
    h.set("opt_g_steps", opt_g_.steps());
    h.set("opt_d_steps", opt_d_.steps());
    h.set("lambda_l1", train_.lambda_l1);
    h.set("seed", std::to_string(train_.seed));
    nn::save_checkpoint<T>(path, h, {{"G", gen_.params()}, {"D", disc_.params()}});
  }

  /// Restores parameters; the checkpoint must match this model's configuration.
  void load(const std::filesystem::path& path, const std::string& kind) {
    const kv::Document h = nn::read_checkpoint_header(path);
    nn::require_same_config(h, config_document(kind), path.string());
    nn::load_checkpoint<T>(path, {{"G", gen_.params()}, {"D", disc_.params()}});
    step_ = static_cast<long long>(h.get_number("step"));
    opt_g_.set_steps(static_cast<long long>(h.get_number("opt_g_steps")));
    opt_d_.set_steps(static_cast<long long>(h.get_number("opt_d_steps")));
  }

 private:
  std::pair<double, double> generator_gradients_from(const nn::Tensor<T>& x, const nn::Tensor<T>& y,
                                                     const nn::Tensor<T>& fake, double w_adv, double w_l1) {
    const nn::Tensor<T> fake_s = disc_.forward(x, fake, true);
    const auto gl = nn::cgan_loss(fake_s, fake_s);
    const auto l1 = nn::l1_loss(fake, y);
    if (!std::isfinite(gl.loss_g_adv)) throw DivergenceError("loss_G_adv diverged at step " + std::to_string(step_));
    if (!std::isfinite(l1.value)) throw DivergenceError("loss_L1 diverged at step " + std::to_string(step_));
    nn::Tensor<T> g = disc_.backward(gl.grad_g_fake, x.c) * static_cast<T>(w_adv);
    g += l1.grad * static_cast<T>(w_l1);
    gen_.backward(g);
    return {gl.loss_g_adv, l1.value};
  }

  TrainConfig train_;
  UNetGenerator<T> gen_;
  PatchDiscriminator<T> disc_;
  nn::Adam<T> opt_g_, opt_d_;
  long long step_ = 0;
};

}  // namespace egobody
