#pragma once

// Procedural motion: random keyframes inside per-joint limits, slerped.

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "egobody/body/body_model.hpp"
#include "egobody/body/rotation.hpp"
#include "egobody/core/error.hpp"
#include "egobody/core/kvtext.hpp"
#include "egobody/core/random.hpp"

namespace egobody {

enum class MotionStyle { kWalk, kBox, kJump, kDance, kIdle };

inline const std::array<std::string, 5>& motion_style_names() {
  static const std::array<std::string, 5> names = {"walk", "box", "jump", "dance", "idle"};
  return names;
}

inline MotionStyle parse_motion_style(const std::string& s) {
  const auto& n = motion_style_names();
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n[i] == s) return static_cast<MotionStyle>(i);
  throw InvalidArgument("unknown motion style '" + s + "' (expected walk, box, jump, dance or idle)");
}

inline const std::string& motion_style_name(MotionStyle s) { return motion_style_names()[static_cast<int>(s)]; }

/// Axis-angle component bounds [lo, hi] per joint, radians, in the joint's
/// parent frame (y up, +x toward the body's left, +z forward).
struct JointLimit {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
};

// Knees hinge about x (0..2.4, positive folds the shin back); elbows hinge
// about y (0..2.6 magnitude, signs mirror left/right); shoulders lower the
// arm with negative z on the left and positive z on the right.
inline const std::array<JointLimit, kNumJoints>& joint_limits() {
  using V = Eigen::Vector3d;
  static const std::array<JointLimit, kNumJoints> table = {{
      {V(-0.3, -std::numbers::pi, -0.3), V(0.3, std::numbers::pi, 0.3)},  //  0 pelvis (global)
      {V(-1.6, -0.5, -0.3), V(0.6, 0.5, 0.8)},                            //  1 left_hip
      {V(-1.6, -0.5, -0.8), V(0.6, 0.5, 0.3)},                            //  2 right_hip
      {V(-0.3, -0.4, -0.3), V(0.5, 0.4, 0.3)},                            //  3 spine1
      {V(0.0, -0.1, -0.1), V(2.4, 0.1, 0.1)},                             //  4 left_knee
      {V(0.0, -0.1, -0.1), V(2.4, 0.1, 0.1)},                             //  5 right_knee
      {V(-0.2, -0.3, -0.2), V(0.3, 0.3, 0.2)},                            //  6 spine2
      {V(-0.6, -0.3, -0.3), V(0.8, 0.3, 0.3)},                            //  7 left_ankle
      {V(-0.6, -0.3, -0.3), V(0.8, 0.3, 0.3)},                            //  8 right_ankle
      {V(-0.2, -0.3, -0.2), V(0.3, 0.3, 0.2)},                            //  9 spine3
      {V(-0.3, -0.1, -0.1), V(0.3, 0.1, 0.1)},                            // 10 left_foot
      {V(-0.3, -0.1, -0.1), V(0.3, 0.1, 0.1)},                            // 11 right_foot
      {V(-0.4, -0.6, -0.3), V(0.5, 0.6, 0.3)},                            // 12 neck
      {V(-0.2, -0.3, -0.3), V(0.2, 0.3, 0.3)},                            // 13 left_collar
      {V(-0.2, -0.3, -0.3), V(0.2, 0.3, 0.3)},                            // 14 right_collar
      {V(-0.4, -0.7, -0.3), V(0.4, 0.7, 0.3)},                            // 15 head
      {V(-0.8, -1.2, -1.45), V(0.8, 1.0, 1.0)},                           // 16 left_shoulder
      {V(-0.8, -1.0, -1.0), V(0.8, 1.2, 1.45)},                           // 17 right_shoulder
      {V(-0.5, -2.6, -0.1), V(0.5, 0.0, 0.1)},                            // 18 left_elbow
      {V(-0.5, 0.0, -0.1), V(0.5, 2.6, 0.1)},                             // 19 right_elbow
      {V(-0.6, -0.3, -0.8), V(0.6, 0.3, 0.8)},                            // 20 left_wrist
      {V(-0.6, -0.3, -0.8), V(0.6, 0.3, 0.8)},                            // 21 right_wrist
      {V(-0.2, -0.2, -0.2), V(0.2, 0.2, 0.2)},                            // 22 left_hand
      {V(-0.2, -0.2, -0.2), V(0.2, 0.2, 0.2)},                            // 23 right_hand
  }};
  return table;
}

inline bool within_limits(const BodyParams& p, double slack = 1e-9) {
  const auto& lim = joint_limits();
  for (int j = 1; j < kNumJoints; ++j) {
    const Eigen::Vector3d w = p.theta.segment<3>(3 * j);
    if ((w - lim[j].lo).minCoeff() < -slack || (lim[j].hi - w).minCoeff() < -slack) return false;
  }
  return true;
}

/// Per-joint keyframe distribution for one style: component center and
/// spread (fraction of the half range).
struct StylePreset {
  std::array<Eigen::Vector3d, kNumJoints> center;
  std::array<double, kNumJoints> spread;
  double root_tilt = 0.1;
  double root_turn = 0.4;
};

inline StylePreset style_preset(MotionStyle style) {
  StylePreset s;
  for (int j = 0; j < kNumJoints; ++j) {
    s.center[j] = Eigen::Vector3d::Zero();
    s.spread[j] = 0.15;
  }
  // Arms hang by default.
  s.center[joint::kLeftShoulder] = Eigen::Vector3d(0, 0, -1.2);
  s.center[joint::kRightShoulder] = Eigen::Vector3d(0, 0, 1.2);
  auto set = [&](std::initializer_list<int> joints, double spread) {
    for (int j : joints) s.spread[j] = spread;
  };
  const auto legs = {joint::kLeftHip, joint::kRightHip, joint::kLeftKnee, joint::kRightKnee, joint::kLeftAnkle,
                     joint::kRightAnkle};
  const auto arms = {joint::kLeftShoulder, joint::kRightShoulder, joint::kLeftElbow, joint::kRightElbow,
                     joint::kLeftWrist, joint::kRightWrist};
  switch (style) {
    case MotionStyle::kWalk:
      set(legs, 0.5);
      set(arms, 0.3);
      s.center[joint::kLeftKnee].x() = s.center[joint::kRightKnee].x() = 0.5;
      break;
    case MotionStyle::kBox:
      set(arms, 0.8);
      set(legs, 0.2);
      set({joint::kSpine1, joint::kSpine2, joint::kSpine3}, 0.5);
      s.center[joint::kLeftShoulder] = Eigen::Vector3d(0, -0.6, -0.6);
      s.center[joint::kRightShoulder] = Eigen::Vector3d(0, 0.6, 0.6);
      s.center[joint::kLeftElbow].y() = -1.6;
      s.center[joint::kRightElbow].y() = 1.6;
      break;
    case MotionStyle::kJump:
      set(legs, 0.8);
      set(arms, 0.6);
      s.center[joint::kLeftHip].x() = s.center[joint::kRightHip].x() = -0.5;
      s.center[joint::kLeftKnee].x() = s.center[joint::kRightKnee].x() = 1.0;
      s.root_tilt = 0.25;
      break;
    case MotionStyle::kDance:
      for (int j = 1; j < kNumJoints; ++j) s.spread[j] = 0.55;
      s.root_turn = 1.0;
      break;
    case MotionStyle::kIdle:
      for (int j = 1; j < kNumJoints; ++j) s.spread[j] = 0.08;
      s.root_turn = 0.1;
      s.root_tilt = 0.03;
      break;
  }
  return s;
}

struct MotionOptions {
  int keyframe_spacing = 20;  ///< frames between keyframes
  double beta_clip = 2.5;
};

inline Eigen::Vector3d slerp_axis_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double t) {
  const Eigen::Quaterniond qa(rodrigues(a)), qb(rodrigues(b));
  return log_rotation(qa.slerp(t, qb).toRotationMatrix());
}

/// Smooth pose sequence for one style; beta is drawn once and shared.
inline std::vector<BodyParams> sample_pose_sequence(std::uint64_t seed, int n_frames, MotionStyle style,
                                                    const MotionOptions& opt = {}) {
  if (n_frames < 1) throw InvalidArgument("sample_pose_sequence: n_frames must be >= 1");
  require(opt.keyframe_spacing >= 1, "sample_pose_sequence: keyframe_spacing must be >= 1");
  Rng rng(derive_seed(seed, 0x6d6f74696f6eULL, static_cast<std::uint64_t>(style)));
  const StylePreset preset = style_preset(style);
  const auto& lim = joint_limits();

  BetaVec beta;
  for (int i = 0; i < kNumBetas; ++i) beta[i] = std::clamp(rng.normal(), -opt.beta_clip, opt.beta_clip);

  const int n_keys = (n_frames - 1 + opt.keyframe_spacing - 1) / opt.keyframe_spacing + 1;
  std::vector<ThetaVec> keys(n_keys);
  double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  for (int k = 0; k < n_keys; ++k) {
    ThetaVec& th = keys[k];
    if (k > 0) yaw += rng.uniform(-preset.root_turn, preset.root_turn);
    const double pitch = rng.uniform(-preset.root_tilt, preset.root_tilt);
    const double roll = rng.uniform(-preset.root_tilt, preset.root_tilt);
    const Eigen::Matrix3d root = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
                                  Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()) *
                                  Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()))
                                     .toRotationMatrix();
    th.head<3>() = log_rotation(root);
    for (int j = 1; j < kNumJoints; ++j) {
      for (int c = 0; c < 3; ++c) {
        const double half = 0.5 * (lim[j].hi[c] - lim[j].lo[c]);
        const double v = preset.center[j][c] + rng.uniform(-1.0, 1.0) * preset.spread[j] * half;
        th[3 * j + c] = std::clamp(v, lim[j].lo[c], lim[j].hi[c]);
      }
    }
  }

  std::vector<BodyParams> seq(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const int k = i / opt.keyframe_spacing;
    const double t = static_cast<double>(i % opt.keyframe_spacing) / opt.keyframe_spacing;
    seq[i].beta = beta;
    if (t == 0.0) {
      seq[i].theta = keys[k];
      continue;
    }
    for (int j = 0; j < kNumJoints; ++j)
      seq[i].theta.segment<3>(3 * j) = slerp_axis_angle(keys[k].segment<3>(3 * j), keys[k + 1].segment<3>(3 * j), t);
  }
  return seq;
}

/// Largest geodesic change of any joint rotation between consecutive frames.
inline double max_joint_step(const std::vector<BodyParams>& seq) {
  double m = 0;
  for (std::size_t i = 1; i < seq.size(); ++i)
    for (int j = 0; j < kNumJoints; ++j)
      m = std::max(m, rotation_distance(rodrigues(seq[i - 1].joint_rotation(j)), rodrigues(seq[i].joint_rotation(j))));
  return m;
}

// --- pose sequence files ----------------------------------------------------

inline void save_pose_sequence(const std::filesystem::path& path, const std::vector<BodyParams>& seq) {
  kv::Document doc;
  doc.set("format_version", 1);
  doc.set("kind", "pose_sequence");
  doc.set("frames", static_cast<int>(seq.size()));
  Eigen::MatrixXd theta(seq.size(), kNumPose), beta(seq.size(), kNumBetas);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    theta.row(i) = seq[i].theta.transpose();
    beta.row(i) = seq[i].beta.transpose();
  }
  doc.set_matrix("theta", theta);
  doc.set_matrix("beta", beta);
  doc.save(path);
}

/// Reads theta per frame; beta rows are optional.
inline std::vector<BodyParams> load_pose_sequence(const std::filesystem::path& path) {
  const kv::Document doc = kv::Document::load(path);
  const int n = doc.get_int("frames");
  if (n < 1) throw ParseError(path.string(), 0, "pose sequence must have at least one frame");
  const Eigen::MatrixXd theta = doc.get_eigen("theta", n, kNumPose);
  const Eigen::MatrixXd beta = doc.has("beta") ? doc.get_eigen("beta", n, kNumBetas) : Eigen::MatrixXd::Zero(n, kNumBetas);
  std::vector<BodyParams> seq(n);
  for (int i = 0; i < n; ++i) {
    seq[i].theta = theta.row(i).transpose();
    seq[i].beta = beta.row(i).transpose();
    seq[i].validate();
  }
  return seq;
}

}  // namespace egobody
