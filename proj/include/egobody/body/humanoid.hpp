#pragma once

// Built-in low-poly humanoid with the SMPL joint topology, so the pipeline
// runs without licensed model files.
//
// The body is a set of capsules ("parts"), one per bone. Every part is an
// 8-row x 11-column grid (the 11th column duplicates the seam so UVs stay
// continuous). Row 2 sits on the start joint and row 5 on the end joint;
// each joint's regressor row is the uniform average of the 10 distinct
// vertices of one such ring, so the regressed joint is exactly the ring
// center. Each part owns one cell of a 5 x 4 UV atlas.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "egobody/body/body_model.hpp"
#include "egobody/core/random.hpp"

namespace egobody {

enum class SurfaceRegion { kSkin, kHair, kShirt, kPants, kShoe };

struct HumanoidPart {
  std::string name;
  int owner;        // joint whose transform moves the middle of the part
  int start_joint;  // ring at the start sits on this joint
  int end_joint;    // ring at the end sits on this joint (-1: free end)
  double radius;
  SurfaceRegion region;
};

struct UvCell {
  double u0, v0, u1, v1;  // inclusive bounds in UV space
};

namespace humanoid_layout {

inline constexpr int kRows = 8;
inline constexpr int kColumns = 10;  // distinct columns; +1 seam duplicate
inline constexpr int kRingStride = kColumns + 1;
inline constexpr int kVertsPerPart = kRows * kRingStride;
inline constexpr int kAtlasCols = 5;
inline constexpr int kAtlasRows = 4;
inline constexpr double kUvMargin = 0.012;

/// Rest joint positions in meters; y up, the body faces +z, +x is the body's left.
inline JointMat rest_joints() {
  JointMat j;
  j << 0.0, 0.95, 0.0,   //  0 pelvis
      0.09, 0.87, 0.0,   //  1 left_hip
      -0.09, 0.87, 0.0,  //  2 right_hip
      0.0, 1.06, 0.0,    //  3 spine1
      0.10, 0.50, 0.01,  //  4 left_knee
      -0.10, 0.50, 0.01,   //  5 right_knee
      0.0, 1.18, 0.0,      //  6 spine2
      0.10, 0.09, -0.01,   //  7 left_ankle
      -0.10, 0.09, -0.01,  //  8 right_ankle
      0.0, 1.30, 0.0,      //  9 spine3
      0.10, 0.03, 0.11,    // 10 left_foot
      -0.10, 0.03, 0.11,   // 11 right_foot
      0.0, 1.48, 0.0,      // 12 neck
      0.07, 1.41, 0.0,     // 13 left_collar
      -0.07, 1.41, 0.0,    // 14 right_collar
      0.0, 1.57, 0.01,     // 15 head
      0.18, 1.41, 0.0,     // 16 left_shoulder
      -0.18, 1.41, 0.0,    // 17 right_shoulder
      0.44, 1.41, 0.0,     // 18 left_elbow
      -0.44, 1.41, 0.0,    // 19 right_elbow
      0.68, 1.41, 0.0,     // 20 left_wrist
      -0.68, 1.41, 0.0,    // 21 right_wrist
      0.76, 1.41, 0.0,     // 22 left_hand
      -0.76, 1.41, 0.0;    // 23 right_hand
  return j;
}

/// Top of the head part (the only free end).
inline Eigen::Vector3d head_top() { return {0.0, 1.61, 0.01}; }

inline std::vector<HumanoidPart> parts() {
  using R = SurfaceRegion;
  return {
      {"pelvis", 0, 0, 3, 0.15, R::kPants},
      {"spine1", 3, 3, 6, 0.14, R::kShirt},
      {"spine2", 6, 6, 9, 0.15, R::kShirt},
      {"spine3", 9, 9, 12, 0.155, R::kShirt},
      {"neck", 12, 12, 15, 0.05, R::kSkin},
      {"head", 15, 15, -1, 0.095, R::kHair},
      {"left_collar", 13, 13, 16, 0.06, R::kShirt},
      {"right_collar", 14, 14, 17, 0.06, R::kShirt},
      {"left_upper_arm", 16, 16, 18, 0.05, R::kShirt},
      {"right_upper_arm", 17, 17, 19, 0.05, R::kShirt},
      {"left_forearm", 18, 18, 20, 0.04, R::kSkin},
      {"right_forearm", 19, 19, 21, 0.04, R::kSkin},
      {"left_hand", 20, 20, 22, 0.035, R::kSkin},
      {"right_hand", 21, 21, 23, 0.035, R::kSkin},
      {"left_thigh", 1, 1, 4, 0.075, R::kPants},
      {"right_thigh", 2, 2, 5, 0.075, R::kPants},
      {"left_shin", 4, 4, 7, 0.055, R::kPants},
      {"right_shin", 5, 5, 8, 0.055, R::kPants},
      {"left_foot", 7, 7, 10, 0.045, R::kShoe},
      {"right_foot", 8, 8, 11, 0.045, R::kShoe},
  };
}

inline UvCell cell(int part_index) {
  const int col = part_index % kAtlasCols;
  const int row = part_index / kAtlasCols;  // row 0 is the top of the texture
  const double w = 1.0 / kAtlasCols;
  const double h = 1.0 / kAtlasRows;
  return {col * w, 1.0 - (row + 1) * h, (col + 1) * w, 1.0 - row * h};
}

/// Axial offset (fraction of radius or bone length) and radius scale per row.
struct RowProfile {
  double t;       // position along the bone in meters, relative to start
  double radius;  // ring radius in meters
};

/// Capsule rings along the bone; end caps are ellipsoidal with height `cap`.
inline std::array<RowProfile, kRows> row_profile(double length, double r, double cap) {
  const double c = std::numbers::sqrt2 / 2;
  return {{{-cap, 0.0},
           {-c * cap, c * r},
           {0.0, r},
           {length / 3, r},
           {2 * length / 3, r},
           {length, r},
           {length + c * cap, c * r},
           {length + cap, 0.0}}};
}

inline double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3 - 2 * x);
}

}  // namespace humanoid_layout

/// Deterministic for a seed. Seed 0 yields the canonical proportions; other
/// seeds scale limb and torso proportions by up to +-4%.
inline BodyModelAsset make_procedural_humanoid(std::uint64_t seed = 0) {
  namespace L = humanoid_layout;
  JointMat joints = L::rest_joints();
  Eigen::Vector3d head_top = L::head_top();
  if (seed != 0) {
    Rng rng(derive_seed(seed, 0x68756d616e6f6964ULL));
    const double leg = 1.0 + rng.uniform(-0.04, 0.04);
    const double arm = 1.0 + rng.uniform(-0.04, 0.04);
    const double torso = 1.0 + rng.uniform(-0.04, 0.04);
    const double width = 1.0 + rng.uniform(-0.04, 0.04);
    const double hip_y = joints(joint::kLeftHip, 1);
    JointMat scaled = joints;
    for (int k = 0; k < kNumJoints; ++k) {
      Eigen::Vector3d p = joints.row(k).transpose();
      if (p.y() < hip_y + 1e-9) {
        p.y() = hip_y - (hip_y - p.y()) * leg;
      } else {
        p.y() = hip_y + (p.y() - hip_y) * torso;
        const double shoulder = joints(joint::kLeftCollar, 0);
        if (std::abs(p.x()) > shoulder) p.x() = std::copysign(shoulder + (std::abs(p.x()) - shoulder) * arm, p.x());
      }
      p.x() *= width;
      scaled.row(k) = p.transpose();
    }
    // Feet keep touching y = 0 after the leg scaling.
    head_top.y() = hip_y + (head_top.y() - hip_y) * torso;
    joints = scaled;
  }

  const auto parts = L::parts();
  const int n_parts = static_cast<int>(parts.size());
  const int n_verts = n_parts * L::kVertsPerPart;

  BodyModelAsset asset;
  asset.parents = kSmplParents;
  asset.template_vertices.resize(n_verts, 3);
  asset.uv_coords.resize(n_verts, 2);
  asset.skin_weights = Eigen::MatrixXd::Zero(n_verts, kNumJoints);
  asset.shape_dirs = Eigen::MatrixXd::Zero(3 * n_verts, kNumBetas);
  asset.joint_regressor = Eigen::MatrixXd::Zero(kNumJoints, n_verts);
  asset.faces.resize(static_cast<Eigen::Index>(n_parts) * (L::kRows - 1) * L::kColumns * 2, 3);

  std::array<bool, kNumJoints> regressed{};
  Eigen::Index face = 0;
  for (int p = 0; p < n_parts; ++p) {
    const HumanoidPart& part = parts[p];
    const Eigen::Vector3d start = joints.row(part.start_joint).transpose();
    const Eigen::Vector3d end = part.end_joint >= 0 ? Eigen::Vector3d(joints.row(part.end_joint).transpose()) : head_top;
    const double length = (end - start).norm();
    const Eigen::Vector3d axis = (end - start) / length;
    // Seam faces away from the body's front (-z) for vertical parts.
    const Eigen::Vector3d ref = std::abs(axis.z()) < 0.9 ? Eigen::Vector3d(0, 0, -1) : Eigen::Vector3d(0, 1, 0);
    const Eigen::Vector3d e1 = (ref - ref.dot(axis) * axis).normalized();
    const Eigen::Vector3d e2 = axis.cross(e1);
    const bool is_head = part.name == "head";
    const auto rows = L::row_profile(length, part.radius, is_head ? part.radius : std::min(part.radius, 0.4 * length));
    const UvCell uv = L::cell(p);
    const int parent = asset.parents[part.owner];
    const double blend = 0.3 * length;
    const bool is_torso = p <= 3;
    const bool is_arm = part.name.find("collar") != std::string::npos || part.name.find("arm") != std::string::npos ||
                        part.name.find("hand") != std::string::npos;
    const bool is_limb = part.name.find("arm") != std::string::npos || part.name.find("thigh") != std::string::npos ||
                         part.name.find("shin") != std::string::npos;

    const int base = p * L::kVertsPerPart;
    for (int r = 0; r < L::kRows; ++r) {
      for (int c = 0; c <= L::kColumns; ++c) {
        const int v = base + r * L::kRingStride + c;
        const double phi = 2.0 * std::numbers::pi * (c % L::kColumns) / L::kColumns;
        const Eigen::Vector3d radial = std::cos(phi) * e1 + std::sin(phi) * e2;
        const Eigen::Vector3d center = start + rows[r].t * axis;
        const Eigen::Vector3d pos = center + rows[r].radius * radial;
        asset.template_vertices.row(v) = pos.transpose();
        asset.uv_coords(v, 0) = uv.u0 + L::kUvMargin + (uv.u1 - uv.u0 - 2 * L::kUvMargin) * c / L::kColumns;
        asset.uv_coords(v, 1) = uv.v0 + L::kUvMargin + (uv.v1 - uv.v0 - 2 * L::kUvMargin) * r / (L::kRows - 1);

        // Skin weights: half-and-half on a joint ring, fading to the owner
        // over 30% of the bone on each side.
        const double t = rows[r].t;
        double w_parent = 0.0, w_end = 0.0;
        if (parent >= 0) w_parent = 0.5 * L::smoothstep((blend - t) / blend);
        if (part.end_joint >= 0) w_end = 0.5 * L::smoothstep((t - (length - blend)) / blend);
        if (parent >= 0) asset.skin_weights(v, parent) += w_parent;
        if (part.end_joint >= 0) asset.skin_weights(v, part.end_joint) += w_end;
        asset.skin_weights(v, part.owner) += 1.0 - w_parent - w_end;

        // Shape directions: fixed displacement fields evaluated at rest.
        Eigen::Matrix<double, 3, kNumBetas> d = Eigen::Matrix<double, 3, kNumBetas>::Zero();
        const Eigen::Vector3d radial_off = pos - center;
        d(1, 0) = 0.045 * pos.y();                                         // overall height
        if (is_torso) d.col(1) = 0.12 * Eigen::Vector3d(radial_off.x(), 0, radial_off.z());  // girth
        if (is_arm) d(0, 2) = 0.06 * (pos.x() - std::copysign(0.07, pos.x()));  // arm length
        d(1, 3) = 0.05 * std::min(pos.y(), joints(joint::kLeftHip, 1));  // leg length
        if (is_torso && radial_off.z() > 0)
          d(2, 4) = 0.3 * radial_off.z() * std::exp(-std::pow((pos.y() - 1.05) / 0.15, 2));  // belly
        if (pos.y() > 1.30 && (is_arm || p == 3))
          d(0, 5) = 0.025 * std::copysign(L::smoothstep(std::abs(pos.x()) / 0.15), pos.x());  // shoulder width
        if (is_head) d.col(6) = 0.12 * (pos - Eigen::Vector3d(0, joints(joint::kHead, 1) + 0.04, joints(joint::kHead, 2)));
        if (pos.y() < 1.0) d(0, 7) = 0.15 * pos.x() * std::clamp((1.0 - pos.y()) / 0.2, 0.0, 1.0);  // hip width
        d(1, 8) = 0.06 * std::clamp(pos.y() - joints(0, 1), 0.0, 0.55);  // torso length
        if (is_limb) d.col(9) = 0.15 * radial_off;                       // limb thickness
        for (int i = 0; i < kNumBetas; ++i) asset.shape_dirs.block<3, 1>(3 * v, i) = d.col(i);
      }
    }

    auto ring_regressor = [&](int joint_index, int row) {
      if (joint_index < 0 || regressed[joint_index]) return;
      for (int c = 0; c < L::kColumns; ++c)
        asset.joint_regressor(joint_index, base + row * L::kRingStride + c) = 1.0 / L::kColumns;
      regressed[joint_index] = true;
    };
    ring_regressor(part.start_joint, 2);

    for (int r = 0; r + 1 < L::kRows; ++r) {
      for (int c = 0; c < L::kColumns; ++c) {
        const int a = base + r * L::kRingStride + c;
        const int b = a + 1;
        const int d = a + L::kRingStride;
        const int e = d + 1;
        asset.faces.row(face++) << a, b, e;
        asset.faces.row(face++) << a, e, d;
      }
    }
  }
  // Leaf joints (hands, feet) have no part starting at them: use the end ring.
  for (int p = 0; p < n_parts; ++p)
    if (parts[p].end_joint >= 0 && !regressed[parts[p].end_joint]) {
      const int base = p * L::kVertsPerPart;
      for (int c = 0; c < L::kColumns; ++c)
        asset.joint_regressor(parts[p].end_joint, base + 5 * L::kRingStride + c) = 1.0 / L::kColumns;
      regressed[parts[p].end_joint] = true;
    }
  return asset;
}

/// UV-atlas region of each surface class, used to paint and inspect textures.
inline SurfaceRegion region_of_part(int part_index) { return humanoid_layout::parts().at(part_index).region; }

}  // namespace egobody
