#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "egobody/body/body_model.hpp"
#include "egobody/core/error.hpp"

namespace egobody {

/// How a camera follows its attachment joint.
enum class AttachMode {
  kRigid,    ///< full joint rotation and translation
  kYawOnly,  ///< joint translation plus heading about the world y axis
};

/// Camera frame is OpenCV style: x right, y down, z along the optical axis.
/// local_rotation columns are those axes expressed in the attachment frame.
struct CameraSpec {
  std::string name;
  int attach_joint = 0;
  Eigen::Vector3d local_offset = Eigen::Vector3d::Zero();
  Eigen::Matrix3d local_rotation = Eigen::Matrix3d::Identity();
  double fov_deg = 60.0;  ///< vertical
  int width = 256;
  int height = 256;
  AttachMode mode = AttachMode::kRigid;

  void validate() const {
    if (attach_joint < 0 || attach_joint >= kNumJoints)
      throw ValidationError("attach_joint", name + ": joint index " + std::to_string(attach_joint) + " out of range");
    if (!(fov_deg > 10.0 && fov_deg < 175.0)) throw ValidationError("fov", name + ": fov must lie in (10, 175) degrees");
    if (width <= 0 || height <= 0) throw ValidationError("resolution", name + ": resolution must be positive");
    if (!local_offset.allFinite()) throw ValidationError("local_offset", name + ": non-finite offset");
    if ((local_rotation.transpose() * local_rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        local_rotation.determinant() < 0)
      throw ValidationError("local_rotation", name + ": rotation is not orthonormal");
  }
};

struct WeakPerspectiveCam {
  double s = 1.0;
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  void validate() const {
    if (!(s > 0) || !std::isfinite(s)) throw ValidationError("scale", "weak-perspective scale must be positive");
    if (!t.allFinite()) throw ValidationError("translation", "weak-perspective translation must be finite");
  }
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

/// Camera axes for a given viewing direction, with image-up following `up`.
inline Eigen::Matrix3d look_rotation(const Eigen::Vector3d& forward, const Eigen::Vector3d& up = Eigen::Vector3d::UnitY()) {
  const Eigen::Vector3d z = forward.normalized();
  Eigen::Vector3d y = -(up - up.dot(z) * z);
  require(y.norm() > 1e-9, "look direction parallel to up vector");
  y.normalize();
  Eigen::Matrix3d r;
  r.col(0) = y.cross(z);
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

/// View along `heading` (horizontal) pitched down by `pitch_deg`.
inline Eigen::Matrix3d pitched_rotation(const Eigen::Vector3d& heading, double pitch_deg) {
  const double p = deg2rad(pitch_deg);
  const Eigen::Vector3d f = std::cos(p) * heading.normalized() - std::sin(p) * Eigen::Vector3d::UnitY();
  return look_rotation(f);
}

struct RigOptions {
  int resolution = 256;
  double ego_fov_deg = 110.0;
  double tp_fov_deg = 50.0;
  double tp_distance = 2.5;
  double tp_height = 0.3;
  double tp_aim_height = 1.06;  ///< world height the third-person cameras look at, rest pose
  AttachMode tp_mode = AttachMode::kYawOnly;
};

/// Four cameras in order: ego_front, ego_back, tp_front, tp_back.
inline std::vector<CameraSpec> rig_default(const RigOptions& opt = {}) {
  const double pelvis_y = 0.95;
  std::vector<CameraSpec> rig(4);

  rig[0].name = "ego_front";
  rig[0].attach_joint = joint::kHead;
  rig[0].local_offset = {0.0, -0.10, 0.12};
  rig[0].local_rotation = pitched_rotation(Eigen::Vector3d::UnitZ(), 60.0);
  rig[0].fov_deg = opt.ego_fov_deg;

  rig[1].name = "ego_back";
  rig[1].attach_joint = joint::kHead;
  rig[1].local_offset = {0.0, -0.02, -0.10};
  rig[1].local_rotation = pitched_rotation(-Eigen::Vector3d::UnitZ(), 45.0);
  rig[1].fov_deg = opt.ego_fov_deg;

  for (int side = 0; side < 2; ++side) {
    CameraSpec& c = rig[2 + side];
    const double sign = side == 0 ? 1.0 : -1.0;
    c.name = side == 0 ? "tp_front" : "tp_back";
    c.attach_joint = joint::kPelvis;
    c.local_offset = {0.0, opt.tp_height, sign * opt.tp_distance};
    const Eigen::Vector3d aim(0.0, opt.tp_aim_height - pelvis_y, 0.0);
    c.local_rotation = look_rotation(aim - c.local_offset);
    c.fov_deg = opt.tp_fov_deg;
    c.mode = opt.tp_mode;
  }
  for (auto& c : rig) {
    c.width = c.height = opt.resolution;
    c.validate();
  }
  return rig;
}

/// Heading about world y, read from the joint's lateral axis so that flips
/// about that axis keep the heading; falls back to the forward axis when the
/// lateral axis is near vertical.
inline Eigen::Matrix3d yaw_of(const Eigen::Matrix3d& r) {
  Eigen::Vector3d h(-r(2, 0), 0.0, r(0, 0));
  if (h.norm() < 0.1) h = Eigen::Vector3d(r(0, 2), 0.0, r(2, 2));
  if (h.norm() < 1e-9) h = Eigen::Vector3d::UnitZ();
  h.normalize();
  Eigen::Matrix3d y = Eigen::Matrix3d::Identity();
  y(0, 0) = h.z();
  y(0, 2) = h.x();
  y(2, 0) = -h.x();
  y(2, 2) = h.z();
  return y;
}

/// Frame the camera is rigidly attached to.
inline Eigen::Matrix4d attachment_frame(const CameraSpec& spec, const Transforms& g) {
  if (spec.attach_joint < 0 || spec.attach_joint >= static_cast<int>(g.size()))
    throw InvalidArgument("camera " + spec.name + ": invalid attach joint " + std::to_string(spec.attach_joint));
  Eigen::Matrix4d a = g[spec.attach_joint];
  if (spec.mode == AttachMode::kYawOnly) a.block<3, 3>(0, 0) = yaw_of(a.block<3, 3>(0, 0));
  return a;
}

/// Camera-to-world pose.
inline Eigen::Matrix4d camera_world_pose(const CameraSpec& spec, const Transforms& g) {
  Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
  local.block<3, 3>(0, 0) = spec.local_rotation;
  local.block<3, 1>(0, 3) = spec.local_offset;
  return attachment_frame(spec, g) * local;
}

inline Eigen::Matrix4d invert_rigid(const Eigen::Matrix4d& m) {
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  inv.block<3, 3>(0, 0) = m.block<3, 3>(0, 0).transpose();
  inv.block<3, 1>(0, 3) = -m.block<3, 3>(0, 0).transpose() * m.block<3, 1>(0, 3);
  return inv;
}

inline double focal_length(double fov_deg, int height) { return 0.5 * height / std::tan(0.5 * deg2rad(fov_deg)); }

struct PinholeProjection {
  Eigen::MatrixX2d pixels;  ///< continuous coords; pixel (i, j) covers [i, i+1) x [j, j+1)
  Eigen::VectorXd depth;    ///< camera z; <= 0 means behind the camera
};

inline PinholeProjection project_pinhole(const Eigen::MatrixX3d& points, const Eigen::Matrix4d& cam_to_world, double fov_deg,
                                         int width, int height) {
  const Eigen::Matrix4d w2c = invert_rigid(cam_to_world);
  const double f = focal_length(fov_deg, height);
  PinholeProjection out;
  out.pixels.resize(points.rows(), 2);
  out.depth.resize(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::Vector3d pc = w2c.block<3, 3>(0, 0) * points.row(i).transpose() + w2c.block<3, 1>(0, 3);
    out.depth[i] = pc.z();
    out.pixels(i, 0) = f * pc.x() / pc.z() + 0.5 * width;
    out.pixels(i, 1) = f * pc.y() / pc.z() + 0.5 * height;
  }
  return out;
}

inline PinholeProjection project_pinhole(const Eigen::MatrixX3d& points, const Eigen::Matrix4d& cam_to_world, const CameraSpec& spec) {
  return project_pinhole(points, cam_to_world, spec.fov_deg, spec.width, spec.height);
}

/// x = s * drop_z(R X) + t.
inline Eigen::MatrixX2d project_weak_perspective(const Eigen::MatrixX3d& points, const WeakPerspectiveCam& cam,
                                                 const Eigen::Matrix3d& root_rotation = Eigen::Matrix3d::Identity()) {
  const Eigen::MatrixX3d rotated = points * root_rotation.transpose();
  return (cam.s * rotated.leftCols<2>()).rowwise() + cam.t.transpose();
}

/// Least-squares (s, t) mapping the xy of `points` onto `image`, over rows
/// with positive weight.
inline WeakPerspectiveCam fit_weak_perspective(const Eigen::MatrixX3d& points, const Eigen::MatrixX2d& image,
                                               const Eigen::VectorXd& weights = {}) {
  require(points.rows() == image.rows(), "fit_weak_perspective: row count mismatch");
  const Eigen::Index n = points.rows();
  Eigen::VectorXd w = weights.size() ? weights : Eigen::VectorXd::Ones(n);
  require(w.size() == n, "fit_weak_perspective: weight count mismatch");
  const double wsum = w.sum();
  require(wsum > 0, "fit_weak_perspective: no weighted points");
  const Eigen::Vector2d xm = (points.leftCols<2>().transpose() * w) / wsum;
  const Eigen::Vector2d ym = (image.transpose() * w) / wsum;
  double num = 0, den = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d xc = points.row(i).head<2>().transpose() - xm;
    const Eigen::Vector2d yc = image.row(i).transpose() - ym;
    num += w[i] * xc.dot(yc);
    den += w[i] * xc.squaredNorm();
  }
  WeakPerspectiveCam cam;
  cam.s = den > 0 ? std::max(num / den, 1e-6) : 1.0;
  cam.t = ym - cam.s * xm;
  return cam;
}

/// Pixel coordinates to the normalized frame [-1, 1] x [-1, 1] (y down).
inline Eigen::MatrixX2d normalize_pixels(const Eigen::MatrixX2d& px, int width, int height) {
  Eigen::MatrixX2d n(px.rows(), 2);
  n.col(0) = (px.col(0).array() - 0.5 * width) / (0.5 * width);
  n.col(1) = (px.col(1).array() - 0.5 * height) / (0.5 * height);
  return n;
}

inline Eigen::MatrixX2d denormalize_pixels(const Eigen::MatrixX2d& n, int width, int height) {
  Eigen::MatrixX2d px(n.rows(), 2);
  px.col(0) = n.col(0).array() * (0.5 * width) + 0.5 * width;
  px.col(1) = n.col(1).array() * (0.5 * height) + 0.5 * height;
  return px;
}

}  // namespace egobody
