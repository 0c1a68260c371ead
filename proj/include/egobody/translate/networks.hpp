#pragma once

// U-Net generator and PatchGAN discriminator.

#include <memory>
#include <string>
#include <vector>

#include "egobody/core/kvtext.hpp"
#include "egobody/nn/layers.hpp"

namespace egobody {

struct GeneratorConfig {
  int in_h = 256, in_w = 128;    ///< image fed by the caller
  int out_h = 256, out_w = 128;  ///< generated image; the input is resized to this
  int in_channels = 3, out_channels = 3;
  int base = 32;
  int depth = 5;
  int max_mult = 8;
  bool use_skip = true;
  double dropout = 0.5;

  int channels(int level) const { return base * std::min(1 << level, max_mult); }

  void validate() const {
    if (depth < 1 || depth > 10) throw ConfigError("generator depth must be in 1..10");
    if (base < 1 || max_mult < 1) throw ConfigError("generator base channels must be >= 1");
    if (in_h < 1 || in_w < 1) throw ConfigError("generator input size must be positive");
    const int d = 1 << depth;
    if (out_h % d != 0 || out_w % d != 0 || out_h < d || out_w < d)
      throw ConfigError("generator output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                        " must be divisible by 2^depth = " + std::to_string(d));
    if (dropout < 0 || dropout >= 1) throw ConfigError("generator dropout must be in [0, 1)");
  }

  void put(kv::Document& d, const std::string& p) const {
    d.set(p + "in_h", in_h);
    d.set(p + "in_w", in_w);
    d.set(p + "out_h", out_h);
    d.set(p + "out_w", out_w);
    d.set(p + "in_channels", in_channels);
    d.set(p + "out_channels", out_channels);
    d.set(p + "base", base);
    d.set(p + "depth", depth);
    d.set(p + "max_mult", max_mult);
    d.set(p + "use_skip", use_skip ? 1 : 0);
    d.set(p + "dropout", dropout);
  }
};

struct DiscriminatorConfig {
  int in_channels = 6;
  int base = 32;
  int layers = 3;  ///< stride-2 convolutions
  int max_mult = 8;

  int channels(int level) const { return base * std::min(1 << level, max_mult); }

  /// Receptive field of one output score, in input pixels.
  int receptive_field() const {
    int rf = 1;
    rf += 3 * 1 + 3 * 1;  // two stride-1 4x4 convolutions
    for (int i = 0; i < layers; ++i) rf = rf * 2 + 2;
    return rf;
  }

  void validate() const {
    if (layers < 1) throw ConfigError("discriminator layer count must be >= 1");
    if (base < 1 || max_mult < 1 || in_channels < 1) throw ConfigError("discriminator channels must be >= 1");
  }

  void put(kv::Document& d, const std::string& p) const {
    d.set(p + "in_channels", in_channels);
    d.set(p + "base", base);
    d.set(p + "layers", layers);
    d.set(p + "max_mult", max_mult);
  }
};

namespace detail {

template <class T>
void init_layers(std::vector<nn::Param<T>*> ps, std::uint64_t seed) {
  Rng rng(seed);
  for (auto* p : ps) {
    const std::string& n = p->name;
    if (n.ends_with(".weight")) nn::init_normal(*p, rng, 0.0, 0.02);
    else if (n.ends_with(".gamma")) nn::init_normal(*p, rng, 1.0, 0.02);
    else p->value.fill(T(0));
  }
}

}  // namespace detail

template <class T>
class UNetGenerator {
 public:
  UNetGenerator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.depth;
    for (int i = 0; i < d; ++i) {
      auto& blk = down_.emplace_back(std::make_unique<nn::Sequential<T>>());
      const int cin = i == 0 ? cfg_.in_channels : cfg_.channels(i - 1);
      blk->template add<nn::Conv2d<T>>("down" + std::to_string(i), cin, cfg_.channels(i), 4, 2, 1);
      if (i > 0 && i < d - 1) blk->template add<nn::InstanceNorm2d<T>>("down" + std::to_string(i) + ".norm", cfg_.channels(i));
      blk->template add<nn::LeakyRelu<T>>(0.2);
    }
    up_.resize(d);
    for (int i = d - 1; i >= 0; --i) {
      auto blk = std::make_unique<nn::Sequential<T>>();
      const int cin = i == d - 1 ? cfg_.channels(d - 1) : (cfg_.use_skip ? 2 : 1) * cfg_.channels(i);
      const int cout = i == 0 ? cfg_.out_channels : cfg_.channels(i - 1);
      const std::string name = "up" + std::to_string(i);
      blk->template add<nn::ConvTranspose2d<T>>(name, cin, cout, 4, 2, 1);
      if (i > 0) {
        blk->template add<nn::InstanceNorm2d<T>>(name + ".norm", cout);
        if (i >= d - 3 && cfg_.dropout > 0)
          dropouts_.push_back(&blk->template add<nn::Dropout<T>>(cfg_.dropout, derive_seed(seed, 0x64726f70ULL, i)));
        blk->template add<nn::LeakyRelu<T>>(0.0);
      } else {
        blk->template add<nn::Tanh<T>>();
      }
      up_[i] = std::move(blk);
    }
    detail::init_layers(params(), seed);
  }

  const GeneratorConfig& config() const { return cfg_; }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> ps;
    for (auto& b : down_) b->collect(ps);
    for (int i = cfg_.depth - 1; i >= 0; --i) up_[i]->collect(ps);
    return ps;
  }

  void set_dropout(bool on) {
    for (auto* d : dropouts_) d->set_active(on);
  }
  void reseed_dropout(std::uint64_t seed) {
    for (std::size_t i = 0; i < dropouts_.size(); ++i) dropouts_[i]->reseed(derive_seed(seed, i));
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool record) {
    if (x.c != cfg_.in_channels || x.h != cfg_.out_h || x.w != cfg_.out_w)
      throw InvalidArgument("generator expects " + std::to_string(cfg_.in_channels) + "x" + std::to_string(cfg_.out_h) +
                            "x" + std::to_string(cfg_.out_w) + " input, got " + x.shape_str());
    const int d = cfg_.depth;
    std::vector<nn::Tensor<T>> skips(d);
    nn::Tensor<T> h = x;
    for (int i = 0; i < d; ++i) {
      h = down_[i]->forward(h, record);
      skips[i] = h;
    }
    for (int i = d - 1; i >= 0; --i) {
      if (i < d - 1 && cfg_.use_skip) h = nn::concat_channels(h, skips[i]);
      h = up_[i]->forward(h, record);
    }
    return h;
  }

  /// Gradient w.r.t. the input; accumulates parameter gradients.
  nn::Tensor<T> backward(const nn::Tensor<T>& gy) {
    const int d = cfg_.depth;
    std::vector<nn::Tensor<T>> skip_grad(d);
    nn::Tensor<T> g = gy;
    for (int i = 0; i < d; ++i) {
      g = up_[i]->backward(g);
      if (i < d - 1 && cfg_.use_skip) {
        auto [a, b] = nn::split_channels(g, cfg_.channels(i));
        g = std::move(a);
        skip_grad[i] = std::move(b);
      }
    }
    for (int i = d - 1; i >= 0; --i) {
      if (!skip_grad[i].data.empty()) g += skip_grad[i];
      g = down_[i]->backward(g);
    }
    return g;
  }

  void clear() {
    for (auto& b : down_) b->clear();
    for (auto& b : up_) b->clear();
  }

 private:
  GeneratorConfig cfg_;
  std::vector<std::unique_ptr<nn::Sequential<T>>> down_, up_;
  std::vector<nn::Dropout<T>*> dropouts_;
};

template <class T>
class PatchDiscriminator {
 public:
  PatchDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const int n = cfg_.layers;
    net_.template add<nn::Conv2d<T>>("d0", cfg_.in_channels, cfg_.channels(0), 4, 2, 1);
    net_.template add<nn::LeakyRelu<T>>(0.2);
    for (int i = 1; i < n; ++i) {
      net_.template add<nn::Conv2d<T>>("d" + std::to_string(i), cfg_.channels(i - 1), cfg_.channels(i), 4, 2, 1);
      net_.template add<nn::InstanceNorm2d<T>>("d" + std::to_string(i) + ".norm", cfg_.channels(i));
      net_.template add<nn::LeakyRelu<T>>(0.2);
    }
    net_.template add<nn::Conv2d<T>>("d" + std::to_string(n), cfg_.channels(n - 1), cfg_.channels(n), 4, 1, 1);
    net_.template add<nn::InstanceNorm2d<T>>("d" + std::to_string(n) + ".norm", cfg_.channels(n));
    net_.template add<nn::LeakyRelu<T>>(0.2);
    net_.template add<nn::Conv2d<T>>("score", cfg_.channels(n), 1, 4, 1, 1);
    detail::init_layers(params(), seed);
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> ps;
    net_.collect(ps);
    return ps;
  }

  /// Patch scores (pre-sigmoid) for `condition` and `candidate` concatenated.
  nn::Tensor<T> forward(const nn::Tensor<T>& condition, const nn::Tensor<T>& candidate, bool record) {
    return net_.forward(nn::concat_channels(condition, candidate), record);
  }

  /// Gradient w.r.t. the candidate half of the input.
  nn::Tensor<T> backward(const nn::Tensor<T>& gscores, int condition_channels) {
    const nn::Tensor<T> g = net_.backward(gscores);
    return nn::split_channels(g, condition_channels).second;
  }

  void clear() { net_.clear(); }

 private:
  DiscriminatorConfig cfg_;
  nn::Sequential<T> net_;
};

}  // namespace egobody
