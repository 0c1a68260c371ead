#pragma once

#include <cmath>
#include <vector>

#include "egobody/nn/tensor.hpp"

namespace egobody::nn {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, AdamOptions opt = {}) : params_(std::move(params)), opt_(opt) {}

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, t_);
    const double c2 = 1.0 - std::pow(opt_.beta2, t_);
    const T b1 = static_cast<T>(opt_.beta1), b2 = static_cast<T>(opt_.beta2);
    const T lr = static_cast<T>(opt_.lr * std::sqrt(c2) / c1);
    const T eps = static_cast<T>(opt_.eps * std::sqrt(c2));
    for (auto* p : params_) {
      auto& w = p->value.data;
      auto& g = p->grad.data;
      auto& m = p->m.data;
      auto& v = p->v.data;
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        w[i] -= lr * m[i] / (std::sqrt(v[i]) + eps);
      }
    }
  }

  void zero_grad() { zero_grads(params_); }
  long long steps() const { return t_; }
  void set_steps(long long t) { t_ = t; }
  AdamOptions& options() { return opt_; }

 private:
  std::vector<Param<T>*> params_;
  AdamOptions opt_;
  long long t_ = 0;
};

}  // namespace egobody::nn
