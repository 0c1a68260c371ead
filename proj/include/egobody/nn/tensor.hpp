#pragma once

// Dense NCHW tensors and trainable parameters.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "egobody/core/error.hpp"
#include "egobody/core/hash.hpp"
#include "egobody/core/image.hpp"
#include "egobody/core/random.hpp"

namespace egobody::nn {

template <class T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {
    require(n_ >= 0 && c_ >= 0 && h_ >= 0 && w_ >= 0, "tensor dimensions must be non-negative");
  }
  static Tensor like(const Tensor& o, T fill = T(0)) { return Tensor(o.n, o.c, o.h, o.w, fill); }

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  std::string shape_str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
  }

  T& at(int i, int ch, int y, int x) { return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x]; }
  T at(int i, int ch, int y, int x) const { return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x]; }
  T* sample(int i) { return data.data() + i * sample_size(); }
  const T* sample(int i) const { return data.data() + i * sample_size(); }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
  }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  Tensor& operator+=(const Tensor& o) {
    require(same_shape(o), "tensor add: shape mismatch " + shape_str() + " vs " + o.shape_str());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  Tensor operator*(T s) const {
    Tensor out = *this;
    for (auto& v : out.data) v *= s;
    return out;
  }
};

/// Concatenate along channels.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.n == b.n && a.h == b.h && a.w == b.w, "concat: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy_n(a.sample(i), a.sample_size(), out.sample(i));
    std::copy_n(b.sample(i), b.sample_size(), out.sample(i) + a.sample_size());
  }
  return out;
}

/// Inverse of concat_channels: first `ca` channels, then the rest.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int ca) {
  require(ca >= 0 && ca <= x.c, "split: bad channel count");
  Tensor<T> a(x.n, ca, x.h, x.w), b(x.n, x.c - ca, x.h, x.w);
  for (int i = 0; i < x.n; ++i) {
    std::copy_n(x.sample(i), a.sample_size(), a.sample(i));
    std::copy_n(x.sample(i) + a.sample_size(), b.sample_size(), b.sample(i));
  }
  return {a, b};
}

/// Stack single-sample tensors along the batch dimension.
template <class T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), "stack_batch: empty");
  Tensor<T> out(static_cast<int>(xs.size()), xs[0].c, xs[0].h, xs[0].w);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i].n == 1 && xs[i].c == out.c && xs[i].h == out.h && xs[i].w == out.w, "stack_batch: shape mismatch");
    std::copy_n(xs[i].data.data(), out.sample_size(), out.sample(static_cast<int>(i)));
  }
  return out;
}

template <class T>
Tensor<T> batch_item(const Tensor<T>& x, int i) {
  Tensor<T> out(1, x.c, x.h, x.w);
  std::copy_n(x.sample(i), x.sample_size(), out.data.data());
  return out;
}

/// 8-bit image to a 1x3xHxW tensor in [-1, 1].
template <class T>
Tensor<T> image_to_tensor(const Image& img) {
  Tensor<T> t(1, 3, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int ch = 0; ch < 3; ++ch) t.at(0, ch, y, x) = static_cast<T>(img.at(x, y)[ch]) / T(127.5) - T(1);
  return t;
}

/// Sample `i` of a 3-channel tensor in [-1, 1] back to 8 bits (clamped, rounded).
template <class T>
Image tensor_to_image(const Tensor<T>& t, int i = 0) {
  require(t.c == 3, "tensor_to_image: expected 3 channels");
  Image img(t.w, t.h);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::lround((static_cast<double>(t.at(i, ch, y, x)) + 1.0) * 127.5);
        img.at(x, y)[ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
  return img;
}

/// Trainable tensor with gradient and Adam moments.
template <class T>
struct Param {
  std::string name;
  Tensor<T> value, grad, m, v;

  Param() = default;
  Param(std::string nm, int n, int c, int h, int w)
      : name(std::move(nm)), value(n, c, h, w), grad(n, c, h, w), m(n, c, h, w), v(n, c, h, w) {}
  void zero_grad() { grad.fill(T(0)); }
};

template <class T>
void init_normal(Param<T>& p, Rng& rng, double mean, double stddev) {
  for (auto& x : p.value.data) x = static_cast<T>(rng.normal(mean, stddev));
}

/// Fingerprint of parameter values, for change detection.
template <class T>
std::uint64_t hash_params(const std::vector<Param<T>*>& ps) {
  Fnv1a h;
  for (const auto* p : ps) h.update(p->value.data.data(), p->value.size() * sizeof(T));
  return h.digest();
}

template <class T>
std::uint64_t hash_grads(const std::vector<Param<T>*>& ps) {
  Fnv1a h;
  for (const auto* p : ps) h.update(p->grad.data.data(), p->grad.size() * sizeof(T));
  return h.digest();
}

template <class T>
std::size_t count_params(const std::vector<Param<T>*>& ps) {
  std::size_t n = 0;
  for (const auto* p : ps) n += p->value.size();
  return n;
}

template <class T>
void zero_grads(const std::vector<Param<T>*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

}  // namespace egobody::nn
