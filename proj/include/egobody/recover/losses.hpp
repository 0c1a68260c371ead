#pragma once

// Parameter vector of the recovery regressor and its differentiable losses.
//
// The root rotation is expressed in a camera-facing frame: a body whose root
// rotation is identity faces the camera upright. Camera-frame joints are
// F * J(theta, beta) with F = diag(1, -1, -1), and the weak-perspective
// projection in normalized [-1, 1] image coordinates is s * (F J)_xy + t.

#include <unsupported/Eigen/AutoDiff>

#include "egobody/body/body_model.hpp"
#include "egobody/camera/rig.hpp"
#include "egobody/data/dataset.hpp"

namespace egobody {

inline constexpr int kThetaDim = kNumPose + kNumBetas + 3;      // 85
inline constexpr int kParamDim = kNumPose + kNumBetas;          // 82
inline constexpr int kPriorDim = 9 * (kNumJoints - 1) + kNumBetas;  // 217

template <class T>
using ThetaVector = Eigen::Matrix<T, kThetaDim, 1>;

struct ThetaFull {
  ThetaVec theta = ThetaVec::Zero();
  BetaVec beta = BetaVec::Zero();
  WeakPerspectiveCam cam;

  ThetaVector<double> to_vector() const {
    ThetaVector<double> x;
    x << theta, beta, cam.s, cam.t;
    return x;
  }
  static ThetaFull from_vector(const ThetaVector<double>& x) {
    ThetaFull f;
    f.theta = x.head<kNumPose>();
    f.beta = x.segment<kNumBetas>(kNumPose);
    f.cam.s = x[kParamDim];
    f.cam.t = x.tail<2>();
    return f;
  }
  BodyParams params() const {
    BodyParams p;
    p.theta = theta;
    p.beta = beta;
    return p;
  }
  void validate() const {
    if (!theta.allFinite() || !beta.allFinite()) throw ValidationError("finite", "recovered parameters are not finite");
    cam.validate();
  }
};

inline const Eigen::Matrix3d& camera_flip() {
  static const Eigen::Matrix3d f = Eigen::Vector3d(1, -1, -1).asDiagonal();
  return f;
}

/// Root rotation re-expressed relative to a camera (camera-to-world pose).
inline Eigen::Vector3d camera_facing_root(const Eigen::Vector3d& root, const Eigen::Matrix4d& cam_to_world) {
  const Eigen::Matrix3d r_wc = cam_to_world.block<3, 3>(0, 0).transpose();
  return log_rotation(camera_flip() * r_wc * rodrigues(root));
}

/// Supervision for one frame, all in the camera-facing frame.
struct RecoveryTarget {
  ThetaVector<double> x = ThetaVector<double>::Zero();  ///< ground-truth parameters and fitted camera
  Eigen::Matrix<double, kNumJoints, 2> joints2d = Eigen::Matrix<double, kNumJoints, 2>::Zero();  ///< normalized
  std::vector<bool> visible = std::vector<bool>(kNumJoints, true);
  JointMat joints3d = JointMat::Zero();  ///< root-aligned
  bool has_3d = true;
};

template <class T>
Eigen::Matrix<T, kNumJoints, 2> project_theta(const JointShapeBasis& basis, const ThetaVector<T>& x) {
  const Eigen::Matrix<T, kNumPose, 1> theta = x.template head<kNumPose>();
  const Eigen::Matrix<T, kNumBetas, 1> beta = x.template segment<kNumBetas>(kNumPose);
  const Eigen::Matrix<T, kNumJoints, 3> j = basis.posed_joints<T>(theta, beta);
  Eigen::Matrix<T, kNumJoints, 2> out;
  for (int k = 0; k < kNumJoints; ++k) {
    out(k, 0) = x[kParamDim] * j(k, 0) + x[kParamDim + 1];
    out(k, 1) = -x[kParamDim] * j(k, 1) + x[kParamDim + 2];
  }
  return out;
}

template <class T>
Eigen::Matrix<T, kNumJoints, 3> root_aligned_joints(const JointShapeBasis& basis, const ThetaVector<T>& x) {
  const Eigen::Matrix<T, kNumPose, 1> theta = x.template head<kNumPose>();
  const Eigen::Matrix<T, kNumBetas, 1> beta = x.template segment<kNumBetas>(kNumPose);
  Eigen::Matrix<T, kNumJoints, 3> j = basis.posed_joints<T>(theta, beta);
  const Eigen::Matrix<T, 1, 3> root = j.row(0);
  j.rowwise() -= root;
  return j;
}

inline RecoveryTarget make_recovery_target(const JointShapeBasis& basis, const FrameRecord& r, int width, int height) {
  RecoveryTarget t;
  ThetaVec theta = r.params.theta;
  theta.head<3>() = camera_facing_root(theta.head<3>(), r.tp_front_pose);
  t.visible = r.joints2d_tp_front.visible;
  t.joints2d = normalize_pixels(r.joints2d_tp_front.pixels, width, height);
  const JointMat j = basis.posed_joints<double>(theta, r.params.beta);
  Eigen::MatrixX3d cam_points = j * camera_flip();
  Eigen::VectorXd w(kNumJoints);
  for (int k = 0; k < kNumJoints; ++k) w[k] = t.visible[k] ? 1.0 : 0.0;
  if (w.sum() == 0) w.setOnes();
  const WeakPerspectiveCam cam = fit_weak_perspective(cam_points, t.joints2d, w);
  t.x << theta, r.params.beta, cam.s, cam.t;
  t.joints3d = root_aligned_joints<double>(basis, t.x);
  return t;
}

template <class T>
struct LossValue {
  T value = T(0);
  bool vacuous = false;  ///< no visible joints; value defined as 0
};

/// Mean over visible joints of the L1 distance in normalized image units.
template <class T>
LossValue<T> reproj_loss(const JointShapeBasis& basis, const ThetaVector<T>& x, const RecoveryTarget& gt) {
  using std::abs;
  LossValue<T> out;
  int n = 0;
  for (bool v : gt.visible) n += v;
  if (n == 0) {
    out.vacuous = true;
    return out;
  }
  const auto p = project_theta<T>(basis, x);
  for (int k = 0; k < kNumJoints; ++k) {
    if (!gt.visible[k]) continue;
    out.value += abs(p(k, 0) - T(gt.joints2d(k, 0))) + abs(p(k, 1) - T(gt.joints2d(k, 1)));
  }
  out.value /= T(n);
  return out;
}

struct Loss3dWeights {
  double joints = 1.0;
  double params = 1.0;
};

/// w.joints * MSE(root-aligned joints) + w.params * MSE(theta, beta).
template <class T>
T loss_3d(const JointShapeBasis& basis, const ThetaVector<T>& x, const RecoveryTarget& gt, const Loss3dWeights& w = {}) {
  if (!gt.has_3d) throw std::logic_error("loss_3d called without 3D ground truth");
  const auto j = root_aligned_joints<T>(basis, x);
  T joints(0), params(0);
  for (int k = 0; k < kNumJoints; ++k)
    for (int a = 0; a < 3; ++a) {
      const T d = j(k, a) - T(gt.joints3d(k, a));
      joints += d * d;
    }
  for (int i = 0; i < kParamDim; ++i) {
    const T d = x[i] - T(gt.x[i]);
    params += d * d;
  }
  return T(w.joints) * joints / T(3 * kNumJoints) + T(w.params) * params / T(kParamDim);
}

/// Prior discriminator input: the 23 non-root rotation matrices (row-major) and beta.
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, 1> prior_features(const ThetaVector<T>& x) {
  Eigen::Matrix<T, Eigen::Dynamic, 1> f(kPriorDim);
  for (int k = 1; k < kNumJoints; ++k) {
    const Mat3<T> r = rodrigues_t<T>(x.template segment<3>(3 * k));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) f[9 * (k - 1) + 3 * a + b] = r(a, b);
  }
  f.tail(kNumBetas) = x.template segment<kNumBetas>(kNumPose);
  return f;
}

using ThetaDual = Eigen::AutoDiffScalar<Eigen::Matrix<double, kThetaDim, 1>>;

inline ThetaVector<ThetaDual> seed_dual(const ThetaVector<double>& x) {
  ThetaVector<ThetaDual> d;
  for (int i = 0; i < kThetaDim; ++i) d[i] = ThetaDual(x[i], kThetaDim, i);
  return d;
}

struct ValueGrad {
  double value = 0;
  ThetaVector<double> grad = ThetaVector<double>::Zero();
  bool vacuous = false;
};

inline ValueGrad reproj_loss_grad(const JointShapeBasis& basis, const ThetaVector<double>& x, const RecoveryTarget& gt) {
  const auto l = reproj_loss<ThetaDual>(basis, seed_dual(x), gt);
  ValueGrad out;
  out.vacuous = l.vacuous;
  if (l.vacuous) return out;
  out.value = l.value.value();
  out.grad = l.value.derivatives();
  return out;
}

inline ValueGrad loss_3d_grad(const JointShapeBasis& basis, const ThetaVector<double>& x, const RecoveryTarget& gt,
                              const Loss3dWeights& w = {}) {
  const ThetaDual l = loss_3d<ThetaDual>(basis, seed_dual(x), gt, w);
  return {l.value(), l.derivatives(), false};
}

/// Features and their Jacobian with respect to the 85 parameters.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> prior_features_jacobian(const ThetaVector<double>& x) {
  const auto f = prior_features<ThetaDual>(seed_dual(x));
  Eigen::VectorXd v(kPriorDim);
  Eigen::MatrixXd jac(kPriorDim, kThetaDim);
  for (int i = 0; i < kPriorDim; ++i) {
    v[i] = f[i].value();
    jac.row(i) = f[i].derivatives().transpose();
  }
  return {v, jac};
}

}  // namespace egobody
