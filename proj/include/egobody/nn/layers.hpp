#pragma once

// Layers with explicit backward passes. A layer called with record=true
// pushes what it needs onto a stack; backward pops in reverse order, so a
// layer may be applied several times before the matching backward calls.

#include <Eigen/Core>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "egobody/nn/tensor.hpp"

namespace egobody::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using MapMat = Eigen::Map<Mat<T>>;
template <class T>
using CMapMat = Eigen::Map<const Mat<T>>;

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool record) = 0;
  virtual Tensor<T> backward(const Tensor<T>& gy) = 0;
  virtual void collect(std::vector<Param<T>*>&) {}
  virtual void clear() = 0;
};

/// Helper for the record stack.
template <class S>
S pop(std::vector<S>& stack, const char* who) {
  if (stack.empty()) throw std::logic_error(std::string(who) + ": backward without a recorded forward");
  S s = std::move(stack.back());
  stack.pop_back();
  return s;
}

struct ConvGeom {
  int cin, h, w, k, stride, pad, ho, wo;
  int kdim() const { return cin * k * k; }
  int positions() const { return ho * wo; }
};

inline ConvGeom conv_geom(int cin, int h, int w, int k, int stride, int pad) {
  if (h + 2 * pad < k || w + 2 * pad < k)
    throw InvalidArgument("convolution input " + std::to_string(h) + "x" + std::to_string(w) + " too small for kernel " +
                          std::to_string(k));
  return {cin, h, w, k, stride, pad, (h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1};
}

/// Columns (positions x kdim), column-major: entry (p, kidx).
template <class T>
void im2col(const T* x, const ConvGeom& g, Mat<T>& cols) {
  cols.resize(g.positions(), g.kdim());
  for (int ci = 0; ci < g.cin; ++ci)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        T* col = cols.data() + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.positions();
        const T* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* row = col + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(row, g.wo, T(0));
            continue;
          }
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < g.w) ? plane[iy * g.w + ix] : T(0);
          }
        }
      }
}

/// Adjoint of im2col: accumulates columns into x.
template <class T>
void col2im(const Mat<T>& cols, const ConvGeom& g, T* x) {
  for (int ci = 0; ci < g.cin; ++ci)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const T* col = cols.data() + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.positions();
        T* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* row = col + oy * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) plane[iy * g.w + ix] += row[ox];
          }
        }
      }
}

template <class T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::string name, int cin, int cout, int k, int stride, int pad, bool bias = true)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad), has_bias_(bias),
        weight_(name + ".weight", cout, cin, k, k), bias_(name + ".bias", 1, cout, 1, 1) {}

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    require(x.c == cin_, "conv: expected " + std::to_string(cin_) + " channels, got " + x.shape_str());
    const ConvGeom g = conv_geom(cin_, x.h, x.w, k_, stride_, pad_);
    Tensor<T> y(x.n, cout_, g.ho, g.wo);
    const CMapMat<T> wm(weight_.value.data.data(), g.kdim(), cout_);
    Mat<T> cols;
    for (int i = 0; i < x.n; ++i) {
      im2col(x.sample(i), g, cols);
      MapMat<T> out(y.sample(i), g.positions(), cout_);
      out.noalias() = cols * wm;
      if (has_bias_)
        for (int co = 0; co < cout_; ++co) out.col(co).array() += bias_.value.data[co];
    }
    if (record) inputs_.push_back(x);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    const Tensor<T> x = pop(inputs_, "conv");
    const ConvGeom g = conv_geom(cin_, x.h, x.w, k_, stride_, pad_);
    require(gy.n == x.n && gy.c == cout_ && gy.h == g.ho && gy.w == g.wo, "conv backward: gradient shape mismatch");
    Tensor<T> gx = Tensor<T>::like(x);
    const CMapMat<T> wm(weight_.value.data.data(), g.kdim(), cout_);
    MapMat<T> gw(weight_.grad.data.data(), g.kdim(), cout_);
    Mat<T> cols, gcols;
    for (int i = 0; i < x.n; ++i) {
      im2col(x.sample(i), g, cols);
      const CMapMat<T> go(gy.sample(i), g.positions(), cout_);
      gw.noalias() += cols.transpose() * go;
      if (has_bias_)
        for (int co = 0; co < cout_; ++co) bias_.grad.data[co] += go.col(co).sum();
      gcols.noalias() = go * wm.transpose();
      col2im(gcols, g, gx.sample(i));
    }
    return gx;
  }

  void collect(std::vector<Param<T>*>& ps) override {
    ps.push_back(&weight_);
    if (has_bias_) ps.push_back(&bias_);
  }
  void clear() override { inputs_.clear(); }

 private:
  int cin_, cout_, k_, stride_, pad_;
  bool has_bias_;
  Param<T> weight_, bias_;
  std::vector<Tensor<T>> inputs_;
};

/// Transposed convolution (the adjoint of Conv2d with cout -> cin).
/// Output size (h - 1) * stride - 2 * pad + k.
template <class T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(std::string name, int cin, int cout, int k, int stride, int pad, bool bias = true)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad), has_bias_(bias),
        weight_(name + ".weight", cin, cout, k, k), bias_(name + ".bias", 1, cout, 1, 1) {}

  ConvGeom out_geom(int h, int w) const {
    const int ho = (h - 1) * stride_ - 2 * pad_ + k_;
    const int wo = (w - 1) * stride_ - 2 * pad_ + k_;
    require(ho > 0 && wo > 0, "transposed conv: output would be empty");
    ConvGeom g = conv_geom(cout_, ho, wo, k_, stride_, pad_);
    require(g.ho == h && g.wo == w, "transposed conv: geometry does not invert");
    return g;
  }

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    require(x.c == cin_, "deconv: expected " + std::to_string(cin_) + " channels, got " + x.shape_str());
    const ConvGeom g = out_geom(x.h, x.w);
    Tensor<T> y(x.n, cout_, g.h, g.w);
    const CMapMat<T> wm(weight_.value.data.data(), g.kdim(), cin_);
    Mat<T> cols;
    for (int i = 0; i < x.n; ++i) {
      const CMapMat<T> xi(x.sample(i), g.positions(), cin_);
      cols.noalias() = xi * wm.transpose();
      col2im(cols, g, y.sample(i));
      if (has_bias_)
        for (int co = 0; co < cout_; ++co) {
          T* p = y.sample(i) + co * y.plane();
          for (std::size_t q = 0; q < y.plane(); ++q) p[q] += bias_.value.data[co];
        }
    }
    if (record) inputs_.push_back(x);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    const Tensor<T> x = pop(inputs_, "deconv");
    const ConvGeom g = out_geom(x.h, x.w);
    require(gy.n == x.n && gy.c == cout_ && gy.h == g.h && gy.w == g.w, "deconv backward: gradient shape mismatch");
    Tensor<T> gx = Tensor<T>::like(x);
    const CMapMat<T> wm(weight_.value.data.data(), g.kdim(), cin_);
    MapMat<T> gw(weight_.grad.data.data(), g.kdim(), cin_);
    Mat<T> gcols;
    for (int i = 0; i < x.n; ++i) {
      im2col(gy.sample(i), g, gcols);
      const CMapMat<T> xi(x.sample(i), g.positions(), cin_);
      MapMat<T> gxi(gx.sample(i), g.positions(), cin_);
      gxi.noalias() = gcols * wm;
      gw.noalias() += gcols.transpose() * xi;
      if (has_bias_)
        for (int co = 0; co < cout_; ++co) {
          const T* p = gy.sample(i) + co * gy.plane();
          T s(0);
          for (std::size_t q = 0; q < gy.plane(); ++q) s += p[q];
          bias_.grad.data[co] += s;
        }
    }
    return gx;
  }

  void collect(std::vector<Param<T>*>& ps) override {
    ps.push_back(&weight_);
    if (has_bias_) ps.push_back(&bias_);
  }
  void clear() override { inputs_.clear(); }

 private:
  int cin_, cout_, k_, stride_, pad_;
  bool has_bias_;
  Param<T> weight_, bias_;
  std::vector<Tensor<T>> inputs_;
};

/// Per-sample, per-channel normalization with learned scale and shift.
template <class T>
class InstanceNorm2d : public Layer<T> {
 public:
  InstanceNorm2d(std::string name, int c, double eps = 1e-5)
      : c_(c), eps_(eps), gamma_(name + ".gamma", 1, c, 1, 1), beta_(name + ".beta", 1, c, 1, 1) {
    gamma_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    require(x.c == c_, "instance norm: channel mismatch");
    const std::size_t m = x.plane();
    Tensor<T> xhat = Tensor<T>::like(x), y = Tensor<T>::like(x);
    std::vector<T> inv(static_cast<std::size_t>(x.n) * c_);
    for (int i = 0; i < x.n; ++i)
      for (int ch = 0; ch < c_; ++ch) {
        const T* p = x.sample(i) + ch * m;
        T mean(0);
        for (std::size_t q = 0; q < m; ++q) mean += p[q];
        mean /= static_cast<T>(m);
        T var(0);
        for (std::size_t q = 0; q < m; ++q) var += (p[q] - mean) * (p[q] - mean);
        var /= static_cast<T>(m);
        const T is = T(1) / std::sqrt(var + static_cast<T>(eps_));
        inv[static_cast<std::size_t>(i) * c_ + ch] = is;
        T* xh = xhat.sample(i) + ch * m;
        T* out = y.sample(i) + ch * m;
        for (std::size_t q = 0; q < m; ++q) {
          xh[q] = (p[q] - mean) * is;
          out[q] = gamma_.value.data[ch] * xh[q] + beta_.value.data[ch];
        }
      }
    if (record) records_.push_back({std::move(xhat), std::move(inv)});
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    auto [xhat, inv] = pop(records_, "instance norm");
    require(gy.same_shape(xhat), "instance norm backward: shape mismatch");
    const std::size_t m = gy.plane();
    Tensor<T> gx = Tensor<T>::like(gy);
    for (int i = 0; i < gy.n; ++i)
      for (int ch = 0; ch < c_; ++ch) {
        const T* g = gy.sample(i) + ch * m;
        const T* xh = xhat.sample(i) + ch * m;
        T sg(0), sgx(0);
        for (std::size_t q = 0; q < m; ++q) {
          sg += g[q];
          sgx += g[q] * xh[q];
        }
        gamma_.grad.data[ch] += sgx;
        beta_.grad.data[ch] += sg;
        const T gam = gamma_.value.data[ch];
        const T k = gam * inv[static_cast<std::size_t>(i) * c_ + ch] / static_cast<T>(m);
        T* out = gx.sample(i) + ch * m;
        for (std::size_t q = 0; q < m; ++q) out[q] = k * (static_cast<T>(m) * g[q] - sg - xh[q] * sgx);
      }
    return gx;
  }

  void collect(std::vector<Param<T>*>& ps) override {
    ps.push_back(&gamma_);
    ps.push_back(&beta_);
  }
  void clear() override { records_.clear(); }

 private:
  struct Record {
    Tensor<T> xhat;
    std::vector<T> inv;
  };
  int c_;
  double eps_;
  Param<T> gamma_, beta_;
  std::vector<Record> records_;
};

template <class T>
class LeakyRelu : public Layer<T> {
 public:
  explicit LeakyRelu(double slope = 0.2) : slope_(static_cast<T>(slope)) {}
  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = x;
    for (auto& v : y.data)
      if (v < T(0)) v *= slope_;
    if (record) inputs_.push_back(x);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    const Tensor<T> x = pop(inputs_, "leaky relu");
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (x.data[i] < T(0)) gx.data[i] *= slope_;
    return gx;
  }
  void clear() override { inputs_.clear(); }

 private:
  T slope_;
  std::vector<Tensor<T>> inputs_;
};

template <class T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = x;
    for (auto& v : y.data) v = std::tanh(v);
    if (record) outputs_.push_back(y);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    const Tensor<T> y = pop(outputs_, "tanh");
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] *= T(1) - y.data[i] * y.data[i];
    return gx;
  }
  void clear() override { outputs_.clear(); }

 private:
  std::vector<Tensor<T>> outputs_;
};

/// Inverted dropout. Inactive layers pass inputs through unchanged.
template <class T>
class Dropout : public Layer<T> {
 public:
  Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {}
  void set_active(bool a) { active_ = a; }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> mask;
    Tensor<T> y = x;
    if (active_ && p_ > 0) {
      mask = Tensor<T>::like(x);
      const T keep = static_cast<T>(1.0 / (1.0 - p_));
      for (std::size_t i = 0; i < y.size(); ++i) {
        mask.data[i] = rng_.uniform() < p_ ? T(0) : keep;
        y.data[i] *= mask.data[i];
      }
    }
    if (record) masks_.push_back(std::move(mask));
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    const Tensor<T> mask = pop(masks_, "dropout");
    Tensor<T> gx = gy;
    if (mask.size() == gx.size())
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] *= mask.data[i];
    return gx;
  }
  void clear() override { masks_.clear(); }

 private:
  double p_;
  Rng rng_;
  bool active_ = true;
  std::vector<Tensor<T>> masks_;
};

/// Fully connected layer on (N, in, 1, 1) tensors.
template <class T>
class Linear : public Layer<T> {
 public:
  Linear(std::string name, int in, int out) : in_(in), out_(out), weight_(name + ".weight", 1, 1, out, in), bias_(name + ".bias", 1, out, 1, 1) {}

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    require(static_cast<int>(x.sample_size()) == in_, "linear: expected " + std::to_string(in_) + " inputs, got " + x.shape_str());
    Tensor<T> y(x.n, out_, 1, 1);
    const CMapMat<T> xm(x.data.data(), in_, x.n);
    const CMapMat<T> wm(weight_.value.data.data(), in_, out_);
    MapMat<T> ym(y.data.data(), out_, x.n);
    ym.noalias() = wm.transpose() * xm;
    for (int i = 0; i < x.n; ++i)
      for (int o = 0; o < out_; ++o) ym(o, i) += bias_.value.data[o];
    if (record) inputs_.push_back(x);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    const Tensor<T> x = pop(inputs_, "linear");
    require(gy.n == x.n && static_cast<int>(gy.sample_size()) == out_, "linear backward: shape mismatch");
    Tensor<T> gx = Tensor<T>::like(x);
    const CMapMat<T> xm(x.data.data(), in_, x.n);
    const CMapMat<T> gm(gy.data.data(), out_, x.n);
    const CMapMat<T> wm(weight_.value.data.data(), in_, out_);
    MapMat<T> gw(weight_.grad.data.data(), in_, out_);
    gw.noalias() += xm * gm.transpose();
    for (int i = 0; i < x.n; ++i)
      for (int o = 0; o < out_; ++o) bias_.grad.data[o] += gm(o, i);
    MapMat<T> gxm(gx.data.data(), in_, x.n);
    gxm.noalias() = wm * gm;
    return gx;
  }

  void collect(std::vector<Param<T>*>& ps) override {
    ps.push_back(&weight_);
    ps.push_back(&bias_);
  }
  void clear() override { inputs_.clear(); }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int in_, out_;
  Param<T> weight_, bias_;
  std::vector<Tensor<T>> inputs_;
};

/// (N, C, H, W) -> (N, C, 1, 1).
template <class T>
class GlobalAvgPool : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y(x.n, x.c, 1, 1);
    for (int i = 0; i < x.n; ++i)
      for (int ch = 0; ch < x.c; ++ch) {
        const T* p = x.sample(i) + ch * x.plane();
        T s(0);
        for (std::size_t q = 0; q < x.plane(); ++q) s += p[q];
        y.at(i, ch, 0, 0) = s / static_cast<T>(x.plane());
      }
    if (record) shapes_.push_back({x.n, x.c, x.h, x.w});
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    const auto s = pop(shapes_, "avg pool");
    Tensor<T> gx(s[0], s[1], s[2], s[3]);
    for (int i = 0; i < gx.n; ++i)
      for (int ch = 0; ch < gx.c; ++ch) {
        const T g = gy.at(i, ch, 0, 0) / static_cast<T>(gx.plane());
        T* p = gx.sample(i) + ch * gx.plane();
        std::fill_n(p, gx.plane(), g);
      }
    return gx;
  }
  void clear() override { shapes_.clear(); }

 private:
  std::vector<std::array<int, 4>> shapes_;
};

template <class T>
class Sequential : public Layer<T> {
 public:
  template <class L, class... Args>
  L& add(Args&&... args) {
    auto p = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *p;
    layers_.push_back(std::move(p));
    return ref;
  }
  bool empty() const { return layers_.empty(); }

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = x;
    for (auto& l : layers_) y = l->forward(y, record);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> g = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  void collect(std::vector<Param<T>*>& ps) override {
    for (auto& l : layers_) l->collect(ps);
  }
  void clear() override {
    for (auto& l : layers_) l->clear();
  }
  template <class F>
  void each(F&& f) {
    for (auto& l : layers_) f(*l);
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace egobody::nn
