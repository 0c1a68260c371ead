#pragma once

// Adversarial and reconstruction losses with their gradients.

#include <cmath>

#include "egobody/nn/tensor.hpp"

namespace egobody::nn {

inline constexpr double kSigmoidClamp = 1e-7;

/// -log(sigmoid(s)) or -log(1 - sigmoid(s)) with sigmoid clamped to
/// [1e-7, 1 - 1e-7], and its derivative in s (zero where clamped).
struct LogTerm {
  double value;
  double grad;
};

inline LogTerm neg_log_sigmoid(double s, bool positive) {
  const double sig = 1.0 / (1.0 + std::exp(-s));
  const double p = positive ? sig : 1.0 - sig;
  if (p < kSigmoidClamp) return {-std::log(kSigmoidClamp), 0.0};
  if (p > 1.0 - kSigmoidClamp) return {-std::log(1.0 - kSigmoidClamp), 0.0};
  // d(-log p)/ds = -(1/p) dp/ds, dp/ds = +-sig(1-sig)
  const double dp = (positive ? 1.0 : -1.0) * sig * (1.0 - sig);
  return {-std::log(p), -dp / p};
}

template <class T>
struct GanLoss {
  double loss_d = 0;
  double loss_g_adv = 0;
  Tensor<T> grad_d_real;  ///< d loss_d / d real scores
  Tensor<T> grad_d_fake;  ///< d loss_d / d fake scores
  Tensor<T> grad_g_fake;  ///< d loss_g_adv / d fake scores
};

/// loss_D = -mean log s(real) - mean log(1 - s(fake));
/// loss_G_adv = -mean log s(fake).
template <class T>
GanLoss<T> cgan_loss(const Tensor<T>& real, const Tensor<T>& fake) {
  require(real.all_finite() && fake.all_finite(), "cgan_loss: non-finite scores");
  GanLoss<T> out;
  out.grad_d_real = Tensor<T>::like(real);
  out.grad_d_fake = Tensor<T>::like(fake);
  out.grad_g_fake = Tensor<T>::like(fake);
  const double nr = static_cast<double>(real.size()), nf = static_cast<double>(fake.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    const LogTerm t = neg_log_sigmoid(real.data[i], true);
    out.loss_d += t.value / nr;
    out.grad_d_real.data[i] = static_cast<T>(t.grad / nr);
  }
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const LogTerm d = neg_log_sigmoid(fake.data[i], false);
    out.loss_d += d.value / nf;
    out.grad_d_fake.data[i] = static_cast<T>(d.grad / nf);
    const LogTerm g = neg_log_sigmoid(fake.data[i], true);
    out.loss_g_adv += g.value / nf;
    out.grad_g_fake.data[i] = static_cast<T>(g.grad / nf);
  }
  return out;
}

template <class T>
struct L1Loss {
  double value = 0;
  Tensor<T> grad;  ///< d value / d generated
};

/// Mean absolute difference; the subgradient at equality is 0.
template <class T>
L1Loss<T> l1_loss(const Tensor<T>& generated, const Tensor<T>& target) {
  if (!generated.same_shape(target))
    throw InvalidArgument("l1_loss: shape mismatch " + generated.shape_str() + " vs " + target.shape_str());
  L1Loss<T> out;
  out.grad = Tensor<T>::like(generated);
  const double n = static_cast<double>(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const double d = static_cast<double>(generated.data[i]) - static_cast<double>(target.data[i]);
    out.value += std::abs(d);
    out.grad.data[i] = static_cast<T>((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n);
  }
  out.value /= n;
  return out;
}

}  // namespace egobody::nn
