#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "egobody/core/error.hpp"
#include "egobody/core/image.hpp"

namespace egobody {

/// Root-mean-square difference over all channels, in 8-bit units.
inline double rmse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidArgument("rmse: images differ in size");
  if (a.pixels.empty()) throw InvalidArgument("rmse: empty images");
  double s = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.pixels.size()));
}

/// ITU-R BT.601 luma.
inline std::vector<double> luma(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const auto* p = img.at(c, r);
      y[static_cast<std::size_t>(r) * img.width + c] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  return y;
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 255.0;
};

/// SSIM on luma with a Gaussian window, averaged over all valid window positions.
inline double ssim(const Image& a, const Image& b, const SsimOptions& opt = {}) {
  if (!a.same_shape(b)) throw InvalidArgument("ssim: images differ in size");
  const int n = opt.window;
  if (a.width < n || a.height < n)
    throw InvalidArgument("ssim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                          " smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");
  std::vector<double> g(n);
  double gs = 0;
  for (int i = 0; i < n; ++i) {
    const double d = i - (n - 1) / 2.0;
    g[i] = std::exp(-d * d / (2 * opt.sigma * opt.sigma));
    gs += g[i];
  }
  for (auto& v : g) v /= gs;

  const int w = a.width, h = a.height, ow = w - n + 1, oh = h - n + 1;
  const std::vector<double> x = luma(a), y = luma(b);
  // Separable filter: horizontal pass then vertical pass, valid region only.
  auto filter = [&](const std::vector<double>& src) {
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += g[k] * src[static_cast<std::size_t>(r) * w + c + k];
        tmp[static_cast<std::size_t>(r) * ow + c] = s;
      }
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += g[k] * tmp[static_cast<std::size_t>(r + k) * ow + c];
        out[static_cast<std::size_t>(r) * ow + c] = s;
      }
    return out;
  };
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter(x), my = filter(y), sxx = filter(xx), syy = filter(yy), sxy = filter(xy);
  const double c1 = (opt.k1 * opt.range) * (opt.k1 * opt.range);
  const double c2 = (opt.k2 * opt.range) * (opt.k2 * opt.range);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double va = sxx[i] - mx[i] * mx[i], vb = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mx.size());
}

/// RMS of per-joint Euclidean pixel distance over visible joints.
inline double joints_rmse(const Eigen::MatrixX2d& pred, const Eigen::MatrixX2d& gt, const std::vector<bool>& visible) {
  if (pred.rows() != gt.rows() || static_cast<Eigen::Index>(visible.size()) != gt.rows())
    throw InvalidArgument("joints_rmse: joint counts differ");
  double s = 0;
  int n = 0;
  for (Eigen::Index k = 0; k < gt.rows(); ++k) {
    if (!visible[k]) continue;
    s += (pred.row(k) - gt.row(k)).squaredNorm();
    ++n;
  }
  if (n == 0) throw InvalidArgument("joints_rmse: no visible joints");
  return std::sqrt(s / n);
}

}  // namespace egobody
