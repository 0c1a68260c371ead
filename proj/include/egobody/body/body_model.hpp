#pragma once

// SMPL-compatible forward model: linear shape blendshapes, joint regression,
// forward kinematics over a 24-joint tree and linear blend skinning.
//
// Layout conventions (all Eigen, column-major unless noted):
//   template_vertices  V x 3
//   shape_dirs         3V x 10   row 3*v + c holds coordinate c of vertex v
//   pose_dirs          3V x 207  or empty (treated as all-zero)
//   joint_regressor    24 x V
//   skin_weights       V x 24
//   faces              F x 3
//   uv_coords          V x 2

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "egobody/body/rotation.hpp"
#include "egobody/core/error.hpp"
#include "egobody/core/hash.hpp"

namespace egobody {

inline constexpr int kNumJoints = 24;
inline constexpr int kNumBetas = 10;
inline constexpr int kNumPose = 3 * kNumJoints;           // 72
inline constexpr int kNumPoseBlend = 9 * (kNumJoints - 1);  // 207

using BetaVec = Eigen::Matrix<double, kNumBetas, 1>;
using ThetaVec = Eigen::Matrix<double, kNumPose, 1>;
using JointMat = Eigen::Matrix<double, kNumJoints, 3>;
using Parents = std::array<int, kNumJoints>;
using Transforms = std::vector<Eigen::Matrix4d>;

/// SMPL joint order.
inline constexpr std::array<const char*, kNumJoints> kJointNames = {
    "pelvis",     "left_hip",       "right_hip",      "spine1",      "left_knee",   "right_knee",
    "spine2",     "left_ankle",     "right_ankle",    "spine3",      "left_foot",   "right_foot",
    "neck",       "left_collar",    "right_collar",   "head",        "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",    "left_wrist",     "right_wrist", "left_hand",   "right_hand"};

inline constexpr Parents kSmplParents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

namespace joint {
inline constexpr int kPelvis = 0, kLeftHip = 1, kRightHip = 2, kSpine1 = 3, kLeftKnee = 4, kRightKnee = 5,
                     kSpine2 = 6, kLeftAnkle = 7, kRightAnkle = 8, kSpine3 = 9, kLeftFoot = 10, kRightFoot = 11,
                     kNeck = 12, kLeftCollar = 13, kRightCollar = 14, kHead = 15, kLeftShoulder = 16,
                     kRightShoulder = 17, kLeftElbow = 18, kRightElbow = 19, kLeftWrist = 20, kRightWrist = 21,
                     kLeftHand = 22, kRightHand = 23;
}

/// Shape (10) and pose (72, axis-angle per joint, joint 0 = global orientation).
struct BodyParams {
  BetaVec beta = BetaVec::Zero();
  ThetaVec theta = ThetaVec::Zero();

  Eigen::Vector3d joint_rotation(int j) const { return theta.segment<3>(3 * j); }

  /// Finite entries and every joint triplet within the canonical |w| <= pi range.
  void validate() const {
    if (!beta.allFinite() || !theta.allFinite()) throw ValidationError("body_params.finite", "non-finite parameter");
    for (int j = 0; j < kNumJoints; ++j)
      if (theta.segment<3>(3 * j).norm() > std::numbers::pi + 1e-6)
        throw ValidationError("body_params.axis_angle_range",
                              "joint " + std::to_string(j) + " rotation exceeds pi");
  }

  bool operator==(const BodyParams& o) const { return beta == o.beta && theta == o.theta; }
};

struct BodyModelAsset {
  Eigen::MatrixX3d template_vertices;
  Eigen::MatrixXd shape_dirs;
  Eigen::MatrixXd pose_dirs;
  Eigen::MatrixXd joint_regressor;
  Parents parents = kSmplParents;
  Eigen::MatrixXd skin_weights;
  Eigen::MatrixX3i faces;
  Eigen::MatrixX2d uv_coords;

  int num_vertices() const { return static_cast<int>(template_vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }

  /// Throws ValidationError naming the first broken invariant.
  void validate() const {
    const Eigen::Index v = template_vertices.rows();
    if (!template_vertices.allFinite()) throw ValidationError("template_vertices", "non-finite vertex");
    if (shape_dirs.rows() != 3 * v || shape_dirs.cols() != kNumBetas)
      throw ValidationError("shape_dirs", "expected shape 3V x 10");
    if (pose_dirs.size() != 0 && (pose_dirs.rows() != 3 * v || pose_dirs.cols() != kNumPoseBlend))
      throw ValidationError("pose_dirs", "expected shape 3V x 207 or empty");
    if (joint_regressor.rows() != kNumJoints || joint_regressor.cols() != v)
      throw ValidationError("joint_regressor", "expected shape 24 x V");
    for (Eigen::Index j = 0; j < kNumJoints; ++j)
      if (std::abs(joint_regressor.row(j).sum() - 1.0) > 1e-6)
        throw ValidationError("joint_regressor", "row " + std::to_string(j) + " does not sum to 1");
    if (parents[0] != -1) throw ValidationError("parents", "joint 0 must be the root");
    for (int j = 1; j < kNumJoints; ++j)
      if (parents[j] < 0 || parents[j] >= j)
        throw ValidationError("parents", "parents[" + std::to_string(j) + "] must be in [0, " + std::to_string(j) + ")");
    if (skin_weights.rows() != v || skin_weights.cols() != kNumJoints)
      throw ValidationError("skin_weights", "expected shape V x 24");
    for (Eigen::Index i = 0; i < v; ++i) {
      if ((skin_weights.row(i).array() < 0.0).any())
        throw ValidationError("skin_weights", "negative weight at vertex " + std::to_string(i));
      if (std::abs(skin_weights.row(i).sum() - 1.0) > 1e-6)
        throw ValidationError("skin_weights", "row " + std::to_string(i) + " does not sum to 1");
    }
    if (faces.size() && (faces.minCoeff() < 0 || faces.maxCoeff() >= v))
      throw ValidationError("faces", "vertex index out of range");
    if (uv_coords.rows() != v) throw ValidationError("uv_coords", "expected one UV per vertex");
    if (uv_coords.size() && (uv_coords.minCoeff() < 0.0 || uv_coords.maxCoeff() > 1.0))
      throw ValidationError("uv_coords", "UV outside [0, 1]");
  }

  std::uint64_t hash() const {
    Fnv1a h;
    auto add = [&h](const auto& m) { h.update(m.data(), static_cast<std::size_t>(m.size()) * sizeof(*m.data())); };
    add(template_vertices);
    add(shape_dirs);
    add(pose_dirs);
    add(joint_regressor);
    h.update(parents.data(), sizeof(parents));
    add(skin_weights);
    add(faces);
    add(uv_coords);
    return h.digest();
  }
};

/// Posed output of `forward`. Meshes built by hand (renderer tests) may leave
/// the skeleton fields empty.
struct MeshAsset {
  Eigen::MatrixX3d vertices;
  Eigen::MatrixX3i faces;
  Eigen::MatrixX2d uv_coords;
  Eigen::MatrixX3d joints3d;
  Transforms joint_transforms;
  Parents parents = kSmplParents;
  std::shared_ptr<const Eigen::MatrixXd> skin_weights;
  std::shared_ptr<const Eigen::MatrixXd> joint_regressor;
};

// --- operations -------------------------------------------------------------

inline Eigen::MatrixX3d shape_blend(const BodyModelAsset& asset, const Eigen::VectorXd& beta) {
  require(beta.size() == kNumBetas, "shape_blend: beta must have 10 entries");
  require(asset.shape_dirs.rows() == 3 * asset.template_vertices.rows() && asset.shape_dirs.cols() == kNumBetas,
          "shape_blend: shape_dirs has the wrong shape");
  const Eigen::VectorXd offsets = asset.shape_dirs * beta;
  Eigen::MatrixX3d out = asset.template_vertices;
  for (Eigen::Index v = 0; v < out.rows(); ++v) out.row(v) += offsets.segment<3>(3 * v).transpose();
  return out;
}

inline JointMat joint_locations(const BodyModelAsset& asset, const Eigen::MatrixX3d& shaped) {
  require(asset.joint_regressor.rows() == kNumJoints, "joint_locations: regressor must have 24 rows");
  require(asset.joint_regressor.cols() == shaped.rows(), "joint_locations: regressor/vertex count mismatch");
  JointMat j = asset.joint_regressor * shaped;
  require(j.allFinite(), "joint_locations: non-finite result");
  return j;
}

inline void check_tree(const Parents& parents) {
  if (parents[0] != -1) throw InvalidArgument("kinematic tree: joint 0 must be the root");
  for (int j = 1; j < kNumJoints; ++j)
    if (parents[j] < 0 || parents[j] >= j)
      throw InvalidArgument("kinematic tree: parents[" + std::to_string(j) + "] = " + std::to_string(parents[j]) +
                            " is not an earlier joint (cycle or bad root)");
}

/// World transforms G_k. Generic scalar so recovery losses can differentiate
/// joint positions w.r.t. pose and shape.
template <class T>
std::array<Eigen::Matrix<T, 4, 4>, kNumJoints> forward_kinematics_t(const Eigen::Matrix<T, kNumJoints, 3>& joints,
                                                                   const Parents& parents,
                                                                   const Eigen::Matrix<T, kNumPose, 1>& theta) {
  std::array<Eigen::Matrix<T, 4, 4>, kNumJoints> g;
  for (int k = 0; k < kNumJoints; ++k) {
    Eigen::Matrix<T, 4, 4> local = Eigen::Matrix<T, 4, 4>::Identity();
    local.template block<3, 3>(0, 0) = rodrigues_t<T>(theta.template segment<3>(3 * k));
    if (k == 0) {
      local.template block<3, 1>(0, 3) = joints.row(0).transpose();
      g[0] = local;
    } else {
      const int p = parents[k];
      local.template block<3, 1>(0, 3) = (joints.row(k) - joints.row(p)).transpose();
      g[k] = g[p] * local;
    }
  }
  return g;
}

inline Transforms forward_kinematics(const JointMat& joints, const Parents& parents, const ThetaVec& theta) {
  check_tree(parents);
  if (!theta.allFinite() || !joints.allFinite()) throw InvalidArgument("forward_kinematics: non-finite input");
  const auto g = forward_kinematics_t<double>(joints, parents, theta);
  return Transforms(g.begin(), g.end());
}

/// Local rotation of every joint recovered from world transforms.
inline std::array<Eigen::Matrix3d, kNumJoints> local_rotations(const Transforms& g, const Parents& parents) {
  std::array<Eigen::Matrix3d, kNumJoints> r;
  for (int k = 0; k < kNumJoints; ++k) {
    const Eigen::Matrix3d world = g[k].block<3, 3>(0, 0);
    r[k] = k == 0 ? world : Eigen::Matrix3d(g[parents[k]].block<3, 3>(0, 0).transpose() * world);
  }
  return r;
}

/// Pose blendshape offsets sum_n (vec(R_n) - vec(I)) * pose_dirs[:, n] over the 23 non-root joints.
inline Eigen::VectorXd pose_blend_offsets(const BodyModelAsset& asset, const std::array<Eigen::Matrix3d, kNumJoints>& rot) {
  Eigen::VectorXd feature(kNumPoseBlend);
  for (int k = 1; k < kNumJoints; ++k) {
    const Eigen::Matrix3d d = rot[k] - Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) feature[9 * (k - 1) + 3 * r + c] = d(r, c);
  }
  return asset.pose_dirs * feature;
}

/// Linear blend skinning: v' = sum_k w_k (G_k G_k,rest^-1) v. Rest joints are
/// regressed from `shaped`; when pose_dirs is present the pose-corrective
/// offsets are added to `shaped` before skinning.
inline Eigen::MatrixX3d skin(const BodyModelAsset& asset, const Eigen::MatrixX3d& shaped, const Transforms& transforms) {
  require(static_cast<int>(transforms.size()) == kNumJoints, "skin: expected 24 transforms");
  require(asset.skin_weights.rows() == shaped.rows() && asset.skin_weights.cols() == kNumJoints,
          "skin: skin_weights shape mismatch");
  const JointMat rest = joint_locations(asset, shaped);
  Eigen::MatrixX3d base = shaped;
  if (asset.pose_dirs.size() != 0) {
    const Eigen::VectorXd off = pose_blend_offsets(asset, local_rotations(transforms, asset.parents));
    for (Eigen::Index v = 0; v < base.rows(); ++v) base.row(v) += off.segment<3>(3 * v).transpose();
  }
  // A_k = G_k * [I | -j_k]
  std::array<Eigen::Matrix<double, 3, 4>, kNumJoints> a;
  for (int k = 0; k < kNumJoints; ++k) {
    const Eigen::Matrix3d r = transforms[k].block<3, 3>(0, 0);
    a[k].block<3, 3>(0, 0) = r;
    a[k].col(3) = transforms[k].block<3, 1>(0, 3) - r * rest.row(k).transpose();
  }
  Eigen::MatrixX3d out(base.rows(), 3);
  for (Eigen::Index v = 0; v < base.rows(); ++v) {
    Eigen::Matrix<double, 3, 4> blended = Eigen::Matrix<double, 3, 4>::Zero();
    for (int k = 0; k < kNumJoints; ++k) {
      const double w = asset.skin_weights(v, k);
      if (w != 0.0) blended += w * a[k];
    }
    out.row(v) = (blended.block<3, 3>(0, 0) * base.row(v).transpose() + blended.col(3)).transpose();
  }
  return out;
}

/// shape_blend -> joint_locations -> forward_kinematics -> skin.
inline MeshAsset forward(const BodyModelAsset& asset, const BodyParams& params) {
  const Eigen::MatrixX3d shaped = shape_blend(asset, params.beta);
  const JointMat joints = joint_locations(asset, shaped);
  MeshAsset mesh;
  mesh.joint_transforms = forward_kinematics(joints, asset.parents, params.theta);
  mesh.vertices = skin(asset, shaped, mesh.joint_transforms);
  mesh.faces = asset.faces;
  mesh.uv_coords = asset.uv_coords;
  mesh.joints3d.resize(kNumJoints, 3);
  for (int k = 0; k < kNumJoints; ++k) mesh.joints3d.row(k) = mesh.joint_transforms[k].block<3, 1>(0, 3).transpose();
  mesh.parents = asset.parents;
  mesh.skin_weights = std::make_shared<const Eigen::MatrixXd>(asset.skin_weights);
  mesh.joint_regressor = std::make_shared<const Eigen::MatrixXd>(asset.joint_regressor);
  return mesh;
}

/// Joint positions as an affine function of beta: J(beta) = rest + sum_i beta_i * dirs[i].
/// Lets the recovery losses evaluate posed joints without touching vertices.
struct JointShapeBasis {
  JointMat rest;
  std::array<JointMat, kNumBetas> dirs;
  Parents parents = kSmplParents;

  static JointShapeBasis from_asset(const BodyModelAsset& asset) {
    JointShapeBasis b;
    b.rest = asset.joint_regressor * asset.template_vertices;
    const Eigen::Index v = asset.template_vertices.rows();
    for (int i = 0; i < kNumBetas; ++i) {
      Eigen::MatrixX3d d(v, 3);
      for (Eigen::Index r = 0; r < v; ++r) d.row(r) = asset.shape_dirs.col(i).segment<3>(3 * r).transpose();
      b.dirs[i] = asset.joint_regressor * d;
    }
    b.parents = asset.parents;
    return b;
  }

  template <class T>
  Eigen::Matrix<T, kNumJoints, 3> shaped_joints(const Eigen::Matrix<T, kNumBetas, 1>& beta) const {
    Eigen::Matrix<T, kNumJoints, 3> j = rest.template cast<T>();
    for (int i = 0; i < kNumBetas; ++i) j += beta[i] * dirs[i].template cast<T>();
    return j;
  }

  /// Posed joint positions (24 x 3).
  template <class T>
  Eigen::Matrix<T, kNumJoints, 3> posed_joints(const Eigen::Matrix<T, kNumPose, 1>& theta,
                                               const Eigen::Matrix<T, kNumBetas, 1>& beta) const {
    const auto g = forward_kinematics_t<T>(shaped_joints<T>(beta), parents, theta);
    Eigen::Matrix<T, kNumJoints, 3> out;
    for (int k = 0; k < kNumJoints; ++k) out.row(k) = g[k].template block<3, 1>(0, 3).transpose();
    return out;
  }
};

}  // namespace egobody
