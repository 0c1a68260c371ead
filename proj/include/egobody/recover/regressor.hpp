#pragma once

// Image -> 85-parameter regressor with iterative error feedback, the pose
// prior discriminator and the alternating training step.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include "egobody/body/params_io.hpp"
#include "egobody/nn/checkpoint.hpp"
#include "egobody/nn/losses.hpp"
#include "egobody/nn/optim.hpp"
#include "egobody/recover/losses.hpp"
#include "egobody/translate/networks.hpp"

namespace egobody {

inline constexpr const char* kRecoveryKind = "mesh_recovery";

struct RegressorConfig {
  int resolution = 128;
  int base = 16;
  int depth = 5;
  int max_mult = 8;
  int feature = 256;
  int hidden = 256;
  int ief_iters = 3;

  int channels(int level) const { return base * std::min(1 << level, max_mult); }
  int grid() const { return resolution >> depth; }
  void validate() const {
    if (ief_iters < 1) throw ConfigError("ief_iters must be >= 1");
    if (base < 1 || depth < 1 || feature < 1 || hidden < 1 || max_mult < 1) throw ConfigError("regressor sizes must be positive");
    if (resolution < 1 || resolution % (1 << depth) != 0)
      throw ConfigError("regressor resolution " + std::to_string(resolution) + " must be divisible by 2^depth = " +
                        std::to_string(1 << depth));
  }
  void put(kv::Document& d, const std::string& p) const {
    d.set(p + "resolution", resolution);
    d.set(p + "base", base);
    d.set(p + "depth", depth);
    d.set(p + "max_mult", max_mult);
    d.set(p + "feature", feature);
    d.set(p + "hidden", hidden);
    d.set(p + "ief_iters", ief_iters);
  }
};

struct PriorConfig {
  int hidden = 128;
  void validate() const {
    if (hidden < 1) throw ConfigError("prior hidden size must be positive");
  }
  void put(kv::Document& d, const std::string& p) const { d.set(p + "hidden", hidden); }
};

struct RecoveryTrainConfig {
  double lambda = 60.0;
  bool use_3d = true;  ///< indicator on the 3D term
  Loss3dWeights weights_3d;
  double lr = 1e-4;
  double lr_prior = 1e-4;
  int batch = 8;
  int max_steps = 2000;
  int checkpoint_interval = 500;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(lr > 0) || !(lr_prior > 0)) throw ConfigError("learning rates must be > 0");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
    if (weights_3d.joints < 0 || weights_3d.params < 0) throw ConfigError("3D loss weights must be >= 0");
  }
};

struct RecoveryMetrics {
  long long step = 0;
  double loss_total = 0;
  double loss_reproj = 0;
  double loss_3d = 0;
  double loss_adv = 0;
  double loss_d_prior = 0;
  int vacuous = 0;  ///< samples without visible joints
};

class RecoveryCsv {
 public:
  static constexpr const char* kHeader = "step,loss_total,loss_reproj,loss_3D,loss_adv,loss_D_prior";

  explicit RecoveryCsv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot write metrics " + path.string());
    if (fresh) out_ << kHeader << "\n";
  }
  void append(const RecoveryMetrics& m) {
    out_ << m.step << "," << kv::format_number(m.loss_total) << "," << kv::format_number(m.loss_reproj) << ","
         << kv::format_number(m.loss_3d) << "," << kv::format_number(m.loss_adv) << ","
         << kv::format_number(m.loss_d_prior) << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

template <class T>
class MeshRegressor {
 public:
  MeshRegressor(const RegressorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    for (int i = 0; i < cfg_.depth; ++i) {
      const std::string n = "enc" + std::to_string(i);
      encoder_.template add<nn::Conv2d<T>>(n, i == 0 ? 3 : cfg_.channels(i - 1), cfg_.channels(i), 4, 2, 1);
      if (i > 0) encoder_.template add<nn::InstanceNorm2d<T>>(n + ".norm", cfg_.channels(i));
      encoder_.template add<nn::LeakyRelu<T>>(0.2);
    }
    encoder_.template add<nn::Linear<T>>("enc.fc", cfg_.channels(cfg_.depth - 1) * cfg_.grid() * cfg_.grid(), cfg_.feature);
    encoder_.template add<nn::LeakyRelu<T>>(0.2);
    head_.template add<nn::Linear<T>>("head.fc0", cfg_.feature + kThetaDim, cfg_.hidden);
    head_.template add<nn::LeakyRelu<T>>(0.2);
    head_.template add<nn::Linear<T>>("head.fc1", cfg_.hidden, cfg_.hidden);
    head_.template add<nn::LeakyRelu<T>>(0.2);
    out_ = &head_.template add<nn::Linear<T>>("head.out", cfg_.hidden, kThetaDim);
    detail::init_layers(params(), seed);
    for (auto& v : out_->weight().value.data) v *= T(0.1);
    mean_.setZero();
    mean_[kParamDim] = 1.0;
  }

  const RegressorConfig& config() const { return cfg_; }
  const ThetaVector<double>& mean() const { return mean_; }
  void set_mean(const ThetaVector<double>& m) { mean_ = m; }
  nn::Linear<T>& head_output() { return *out_; }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> ps;
    encoder_.collect(ps);
    head_.collect(ps);
    return ps;
  }

  /// (N, 3, R, R) -> (N, 85, 1, 1).
  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool record) {
    if (x.c != 3 || x.h != cfg_.resolution || x.w != cfg_.resolution)
      throw InvalidArgument("regressor expects [N,3," + std::to_string(cfg_.resolution) + "," +
                            std::to_string(cfg_.resolution) + "], got " + x.shape_str());
    const nn::Tensor<T> f = encoder_.forward(x, record);
    nn::Tensor<T> theta(x.n, kThetaDim, 1, 1);
    for (int i = 0; i < x.n; ++i)
      for (int k = 0; k < kThetaDim; ++k) theta.at(i, k, 0, 0) = static_cast<T>(mean_[k]);
    for (int it = 0; it < cfg_.ief_iters; ++it) theta += head_.forward(nn::concat_channels(f, theta), record);
    return theta;
  }

  void backward(const nn::Tensor<T>& gtheta) {
    nn::Tensor<T> g = gtheta;
    nn::Tensor<T> gf(g.n, cfg_.feature, 1, 1);
    for (int it = 0; it < cfg_.ief_iters; ++it) {
      const auto [a, b] = nn::split_channels(head_.backward(g), cfg_.feature);
      gf += a;
      g += b;
    }
    encoder_.backward(gf);
  }

  void clear() {
    encoder_.clear();
    head_.clear();
  }

 private:
  RegressorConfig cfg_;
  nn::Sequential<T> encoder_, head_;
  nn::Linear<T>* out_ = nullptr;
  ThetaVector<double> mean_;
};

template <class T>
class PriorDiscriminator {
 public:
  PriorDiscriminator(const PriorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    net_.template add<nn::Linear<T>>("prior.fc0", kPriorDim, cfg_.hidden);
    net_.template add<nn::LeakyRelu<T>>(0.2);
    net_.template add<nn::Linear<T>>("prior.fc1", cfg_.hidden, cfg_.hidden);
    net_.template add<nn::LeakyRelu<T>>(0.2);
    net_.template add<nn::Linear<T>>("prior.out", cfg_.hidden, 1);
    detail::init_layers(params(), seed);
  }
  const PriorConfig& config() const { return cfg_; }
  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> ps;
    net_.collect(ps);
    return ps;
  }
  nn::Tensor<T> forward(const nn::Tensor<T>& features, bool record) { return net_.forward(features, record); }
  nn::Tensor<T> backward(const nn::Tensor<T>& g) { return net_.backward(g); }
  void clear() { net_.clear(); }

  /// Features of parameter vectors as an (N, 217, 1, 1) batch.
  static nn::Tensor<T> features(const std::vector<ThetaVector<double>>& xs) {
    nn::Tensor<T> f(static_cast<int>(xs.size()), kPriorDim, 1, 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto v = prior_features<double>(xs[i]);
      for (int k = 0; k < kPriorDim; ++k) f.at(static_cast<int>(i), k, 0, 0) = static_cast<T>(v[k]);
    }
    return f;
  }

 private:
  PriorConfig cfg_;
  nn::Sequential<T> net_;
};

/// Per-term values of the regressor objective at one batch.
struct RecoveryTerms {
  double reproj = 0;
  double loss_3d = 0;
  double adv = 0;
  int vacuous = 0;
};

template <class T>
class MeshRecovery {
 public:
  MeshRecovery(const RegressorConfig& r, const PriorConfig& p, const RecoveryTrainConfig& t, JointShapeBasis basis)
      : train_(t), basis_(std::move(basis)), reg_(r, derive_seed(t.seed, 0x52ULL)), prior_(p, derive_seed(t.seed, 0x50ULL)),
        opt_r_(reg_.params(), {t.lr}), opt_p_(prior_.params(), {t.lr_prior}) {
    train_.validate();
  }

  MeshRegressor<T>& regressor() { return reg_; }
  PriorDiscriminator<T>& prior() { return prior_; }
  const JointShapeBasis& basis() const { return basis_; }
  const RecoveryTrainConfig& train_config() const { return train_; }
  RecoveryTrainConfig& train_config() { return train_; }
  long long step() const { return step_; }

  nn::Tensor<T> input_tensor(const Image& img) const {
    const int r = reg_.config().resolution;
    if (img.width != r || img.height != r)
      throw InvalidArgument("recovery input is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            ", model expects " + std::to_string(r) + "x" + std::to_string(r));
    return nn::image_to_tensor<T>(img);
  }

  /// Deterministic inference. The root rotation is returned in canonical range.
  ThetaFull recover(const Image& tp_front) {
    const nn::Tensor<T> y = reg_.forward(input_tensor(tp_front), false);
    ThetaFull f = ThetaFull::from_vector(row(y, 0));
    f.theta.template head<3>() = canonical_axis_angle(f.theta.template head<3>());
    return f;
  }

  /// One prior-discriminator update. Returns loss_D_prior.
  double prior_step(const std::vector<ThetaVector<double>>& real, const std::vector<ThetaVector<double>>& fake) {
    prior_.clear();
    opt_p_.zero_grad();
    const nn::Tensor<T> sr = prior_.forward(PriorDiscriminator<T>::features(real), true);
    const nn::Tensor<T> sf = prior_.forward(PriorDiscriminator<T>::features(fake), true);
    const auto gl = nn::cgan_loss(sr, sf);
    if (!std::isfinite(gl.loss_d)) throw DivergenceError("loss_D_prior diverged at step " + std::to_string(step_));
    prior_.backward(gl.grad_d_fake);
    prior_.backward(gl.grad_d_real);
    opt_p_.step();
    return gl.loss_d;
  }

  /// Prior score (logit) of one parameter vector.
  double prior_score(const ThetaVector<double>& x) {
    return static_cast<double>(prior_.forward(PriorDiscriminator<T>::features({x}), false).data[0]);
  }

  /// Fills regressor gradients of w_reproj * L_reproj + w_3d * L_3D + w_adv * L_adv.
  RecoveryTerms regressor_gradients(const nn::Tensor<T>& x, const std::vector<RecoveryTarget>& targets, double w_reproj,
                                    double w_3d, double w_adv) {
    reg_.clear();
    opt_r_.zero_grad();
    const nn::Tensor<T> y = reg_.forward(x, true);
    return gradients_from(y, targets, w_reproj, w_3d, w_adv);
  }

  /// Gradients of the configured objective without stepping.
  RecoveryTerms objective_gradients(const nn::Tensor<T>& x, const std::vector<RecoveryTarget>& targets) {
    return regressor_gradients(x, targets, train_.lambda, train_.use_3d ? train_.lambda : 0.0, 1.0);
  }

  /// Prior update on (real, current predictions), then the regressor update on
  /// lambda * (L_reproj + 1[3D] * L_3D) + L_adv.
  RecoveryMetrics train_step(const nn::Tensor<T>& x, const std::vector<RecoveryTarget>& targets,
                             const std::vector<ThetaVector<double>>& real) {
    reg_.clear();
    opt_r_.zero_grad();
    const nn::Tensor<T> y = reg_.forward(x, true);
    std::vector<ThetaVector<double>> fake;
    for (int i = 0; i < y.n; ++i) fake.push_back(row(y, i));
    RecoveryMetrics m;
    m.loss_d_prior = prior_step(real, fake);
    const double w3 = train_.use_3d ? train_.lambda : 0.0;
    const RecoveryTerms t = gradients_from(y, targets, train_.lambda, w3, 1.0);
    opt_r_.step();
    m.loss_reproj = t.reproj;
    m.loss_3d = t.loss_3d;
    m.loss_adv = t.adv;
    m.vacuous = t.vacuous;
    m.loss_total = train_.lambda * (t.reproj + (train_.use_3d ? t.loss_3d : 0.0)) + t.adv;
    m.step = ++step_;
    return m;
  }

  kv::Document config_document() const {
    kv::Document d;
    d.set("kind", kRecoveryKind);
    reg_.config().put(d, "regressor.");
    prior_.config().put(d, "prior.");
    return d;
  }

  void save(const std::filesystem::path& path) {
    kv::Document h = config_document();
    h.set("step", static_cast<long long>(step_));
    h.set("opt_r_steps", opt_r_.steps());
    h.set("opt_p_steps", opt_p_.steps());
    h.set("lambda", train_.lambda);
    h.set("use_3d", train_.use_3d ? 1 : 0);
    h.set("seed", std::to_string(train_.seed));
    const auto& mu = reg_.mean();
    h.set_list("mean", std::vector<double>(mu.data(), mu.data() + kThetaDim));
    nn::save_checkpoint<T>(path, h, {{"R", reg_.params()}, {"P", prior_.params()}});
  }

  void load(const std::filesystem::path& path) {
    const kv::Document h = nn::read_checkpoint_header(path);
    nn::require_same_config(h, config_document(), path.string());
    const auto mu = h.get_list("mean");
    if (mu.size() != kThetaDim) throw ParseError(path.string(), h.entry("mean").line, "mean must have 85 values");
    nn::load_checkpoint<T>(path, {{"R", reg_.params()}, {"P", prior_.params()}});
    reg_.set_mean(Eigen::Map<const ThetaVector<double>>(mu.data()));
    step_ = static_cast<long long>(h.get_number("step"));
    opt_r_.set_steps(static_cast<long long>(h.get_number("opt_r_steps")));
    opt_p_.set_steps(static_cast<long long>(h.get_number("opt_p_steps")));
  }

 private:
  static ThetaVector<double> row(const nn::Tensor<T>& y, int i) {
    ThetaVector<double> v;
    for (int k = 0; k < kThetaDim; ++k) v[k] = static_cast<double>(y.at(i, k, 0, 0));
    return v;
  }

  RecoveryTerms gradients_from(const nn::Tensor<T>& y, const std::vector<RecoveryTarget>& targets, double w_reproj,
                               double w_3d, double w_adv) {
    require(static_cast<int>(targets.size()) == y.n, "recovery batch: target count mismatch");
    const int n = y.n;
    RecoveryTerms terms;
    std::vector<ThetaVector<double>> xs;
    std::vector<Eigen::MatrixXd> jacs;
    nn::Tensor<T> feats(n, kPriorDim, 1, 1);
    std::vector<ThetaVector<double>> grads(n, ThetaVector<double>::Zero());
    for (int i = 0; i < n; ++i) {
      xs.push_back(row(y, i));
      const ValueGrad r = reproj_loss_grad(basis_, xs[i], targets[i]);
      terms.vacuous += r.vacuous;
      terms.reproj += r.value / n;
      grads[i] += w_reproj / n * r.grad;
      if (w_3d != 0.0) {
        const ValueGrad l = loss_3d_grad(basis_, xs[i], targets[i], train_.weights_3d);
        terms.loss_3d += l.value / n;
        grads[i] += w_3d / n * l.grad;
      }
      auto [f, jac] = prior_features_jacobian(xs[i]);
      for (int k = 0; k < kPriorDim; ++k) feats.at(i, k, 0, 0) = static_cast<T>(f[k]);
      jacs.push_back(std::move(jac));
    }
    prior_.clear();
    const nn::Tensor<T> scores = prior_.forward(feats, true);
    const auto gl = nn::cgan_loss(scores, scores);
    terms.adv = gl.loss_g_adv;
    const nn::Tensor<T> gfeat = prior_.backward(gl.grad_g_fake);
    opt_p_.zero_grad();
    if (!std::isfinite(terms.reproj)) throw DivergenceError("loss_reproj diverged at step " + std::to_string(step_));
    if (!std::isfinite(terms.loss_3d)) throw DivergenceError("loss_3D diverged at step " + std::to_string(step_));
    if (!std::isfinite(terms.adv)) throw DivergenceError("loss_adv diverged at step " + std::to_string(step_));
    nn::Tensor<T> gy(n, kThetaDim, 1, 1);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd gf(kPriorDim);
      for (int k = 0; k < kPriorDim; ++k) gf[k] = static_cast<double>(gfeat.at(i, k, 0, 0));
      grads[i] += w_adv * (jacs[i].transpose() * gf);
      for (int k = 0; k < kThetaDim; ++k) gy.at(i, k, 0, 0) = static_cast<T>(grads[i][k]);
    }
    reg_.backward(gy);
    return terms;
  }

  RecoveryTrainConfig train_;
  JointShapeBasis basis_;
  MeshRegressor<T> reg_;
  PriorDiscriminator<T> prior_;
  nn::Adam<T> opt_r_, opt_p_;
  long long step_ = 0;
};

/// Mean parameter vector of a set of targets; the regressor's starting estimate.
inline ThetaVector<double> mean_parameters(const std::vector<RecoveryTarget>& targets) {
  require(!targets.empty(), "mean_parameters: no targets");
  ThetaVector<double> m = ThetaVector<double>::Zero();
  for (const auto& t : targets) m += t.x;
  return m / static_cast<double>(targets.size());
}

/// Recovered parameters in frame-meta layout (beta, theta, joints3d) plus the camera.
inline kv::Document recovered_document(const ThetaFull& f, const BodyModelAsset& asset) {
  kv::Document d;
  d.set("format_version", 1);
  d.set("kind", "recovered_params");
  put_params(d, f.params());
  d.set_matrix("joints3d", forward(asset, f.params()).joints3d);
  d.set("cam_s", f.cam.s);
  d.set_list("cam_t", std::vector<double>{f.cam.t.x(), f.cam.t.y()});
  return d;
}

}  // namespace egobody
