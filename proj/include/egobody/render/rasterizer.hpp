#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "egobody/body/body_model.hpp"
#include "egobody/camera/rig.hpp"
#include "egobody/core/image.hpp"

namespace egobody {

/// Square RGB texture, side a power of two. Row 0 is v = 1.
struct TextureMap {
  Image image;

  TextureMap() = default;
  explicit TextureMap(Image img) : image(std::move(img)) { validate(); }
  static TextureMap solid(int size, Rgb c) { return TextureMap(Image(size, size, c)); }

  int size() const { return image.width; }

  void validate() const {
    const int t = image.width;
    if (t <= 0 || image.height != t) throw ValidationError("texture", "texture must be square");
    if ((t & (t - 1)) != 0) throw ValidationError("texture", "texture side must be a power of two");
  }

  Rgb sample_nearest(double u, double v) const {
    const int t = size();
    const int x = std::clamp(static_cast<int>(std::floor(u * t)), 0, t - 1);
    const int y = std::clamp(static_cast<int>(std::floor((1.0 - v) * t)), 0, t - 1);
    return image.rgb(x, y);
  }

  Rgb sample_bilinear(double u, double v) const {
    const int t = size();
    const double fx = std::clamp(u * t - 0.5, 0.0, t - 1.0);
    const double fy = std::clamp((1.0 - v) * t - 0.5, 0.0, t - 1.0);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, t - 1), y1 = std::min(y0 + 1, t - 1);
    const double ax = fx - x0, ay = fy - y0;
    Rgb out;
    for (int c = 0; c < 3; ++c) {
      const double top = (1 - ax) * image.at(x0, y0)[c] + ax * image.at(x1, y0)[c];
      const double bot = (1 - ax) * image.at(x0, y1)[c] + ax * image.at(x1, y1)[c];
      out[c] = static_cast<std::uint8_t>(std::lround((1 - ay) * top + ay * bot));
    }
    return out;
  }
};

enum class TextureSampling { kNearest, kBilinear };

struct RenderOptions {
  Rgb background{128, 128, 128};
  TextureSampling sampling = TextureSampling::kNearest;
  double near_plane = 0.01;
};

struct RenderResult {
  Image image;
  std::vector<double> depth;  ///< camera z per pixel, +inf where empty
  std::vector<int> face;      ///< frontmost face per pixel, -1 where empty

  double depth_at(int x, int y) const { return depth[static_cast<std::size_t>(y) * image.width + x]; }
  int face_at(int x, int y) const { return face[static_cast<std::size_t>(y) * image.width + x]; }
};

inline RenderResult rasterize(const MeshAsset& mesh, const TextureMap& texture, const CameraSpec& spec,
                              const Eigen::Matrix4d& cam_to_world, const RenderOptions& opt = {}) {
  const int w = spec.width, h = spec.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  RenderResult out{Image(w, h, opt.background), std::vector<double>(n, std::numeric_limits<double>::infinity()),
                   std::vector<int>(n, -1)};
  if (mesh.faces.rows() == 0) return out;
  require(mesh.uv_coords.rows() == mesh.vertices.rows(), "rasterize: uv count must match vertex count");
  texture.validate();

  const PinholeProjection proj = project_pinhole(mesh.vertices, cam_to_world, spec);
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
    const double z0 = proj.depth[i0], z1 = proj.depth[i1], z2 = proj.depth[i2];
    if (z0 < opt.near_plane || z1 < opt.near_plane || z2 < opt.near_plane) continue;
    const double x0 = proj.pixels(i0, 0), y0 = proj.pixels(i0, 1);
    const double x1 = proj.pixels(i1, 0), y1 = proj.pixels(i1, 1);
    const double x2 = proj.pixels(i2, 0), y2 = proj.pixels(i2, 1);
    const double area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (area == 0.0 || !std::isfinite(area)) continue;
    const double inv_area = 1.0 / area;

    const int xmin = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}) - 0.5)));
    const int xmax = std::min(w - 1, static_cast<int>(std::ceil(std::max({x0, x1, x2}) - 0.5)));
    const int ymin = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}) - 0.5)));
    const int ymax = std::min(h - 1, static_cast<int>(std::ceil(std::max({y0, y1, y2}) - 0.5)));
    if (xmin > xmax || ymin > ymax) continue;

    const Eigen::Vector2d uv0 = mesh.uv_coords.row(i0), uv1 = mesh.uv_coords.row(i1), uv2 = mesh.uv_coords.row(i2);
    for (int py = ymin; py <= ymax; ++py) {
      const double cy = py + 0.5;
      for (int px = xmin; px <= xmax; ++px) {
        const double cx = px + 0.5;
        const double b0 = ((x1 - cx) * (y2 - cy) - (x2 - cx) * (y1 - cy)) * inv_area;
        const double b1 = ((x2 - cx) * (y0 - cy) - (x0 - cx) * (y2 - cy)) * inv_area;
        const double b2 = 1.0 - b0 - b1;
        if (b0 < 0 || b1 < 0 || b2 < 0) continue;
        const double w0 = b0 / z0, w1 = b1 / z1, w2 = b2 / z2;
        const double z = 1.0 / (w0 + w1 + w2);
        const std::size_t idx = static_cast<std::size_t>(py) * w + px;
        if (!(z < out.depth[idx])) continue;
        out.depth[idx] = z;
        out.face[idx] = static_cast<int>(f);
        const Eigen::Vector2d uv = (w0 * uv0 + w1 * uv1 + w2 * uv2) * z;
        out.image.set(px, py, opt.sampling == TextureSampling::kNearest ? texture.sample_nearest(uv.x(), uv.y())
                                                                         : texture.sample_bilinear(uv.x(), uv.y()));
      }
    }
  }
  return out;
}

struct Joints2D {
  Eigen::MatrixX2d pixels;
  Eigen::VectorXd depth;
  std::vector<bool> visible;

  int visible_count() const { return static_cast<int>(std::count(visible.begin(), visible.end(), true)); }
};

/// Joint that dominates each face (summed skin weights of its corners), or
/// empty when the mesh has no usable skin weights.
inline std::vector<int> face_owners(const MeshAsset& mesh) {
  std::vector<int> owner;
  const auto& w = mesh.skin_weights;
  if (!w || w->rows() != mesh.vertices.rows()) return owner;
  owner.resize(mesh.faces.rows());
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    const Eigen::RowVectorXd sum = w->row(mesh.faces(f, 0)) + w->row(mesh.faces(f, 1)) + w->row(mesh.faces(f, 2));
    Eigen::Index k;
    sum.maxCoeff(&k);
    owner[f] = static_cast<int>(k);
  }
  return owner;
}

struct VisibilityOptions {
  double tolerance = 0.05;  ///< meters between joint depth and depth buffer
  bool own_surface = true;  ///< surface of the joint or an adjacent joint never occludes it
};

/// Projects joints3d and tests each against the depth buffer at its pixel.
/// A joint is visible when it is in front of the camera, inside the image,
/// and either within `tolerance` of the depth buffer or covered by its own
/// body segment.
inline Joints2D render_joints2d(const MeshAsset& mesh, const CameraSpec& spec, const Eigen::Matrix4d& cam_to_world,
                                const RenderResult& render, const VisibilityOptions& opt = {}) {
  require(render.image.width == spec.width && render.image.height == spec.height,
          "render_joints2d: depth buffer size does not match camera");
  const PinholeProjection proj = project_pinhole(mesh.joints3d, cam_to_world, spec);
  const std::vector<int> owner = opt.own_surface ? face_owners(mesh) : std::vector<int>{};
  const auto adjacent = [&](int a, int b) {
    const int n = static_cast<int>(mesh.parents.size());
    return a == b || (a < n && mesh.parents[a] == b) || (b < n && mesh.parents[b] == a);
  };
  Joints2D out{proj.pixels, proj.depth, std::vector<bool>(mesh.joints3d.rows(), false)};
  for (Eigen::Index k = 0; k < mesh.joints3d.rows(); ++k) {
    if (!(proj.depth[k] > 0)) continue;
    const double px = proj.pixels(k, 0), py = proj.pixels(k, 1);
    if (!(px >= 0 && px < spec.width && py >= 0 && py < spec.height)) continue;
    const int ix = static_cast<int>(px), iy = static_cast<int>(py);
    if (proj.depth[k] <= render.depth_at(ix, iy) + opt.tolerance) {
      out.visible[k] = true;
    } else if (!owner.empty()) {
      const int f = render.face_at(ix, iy);
      out.visible[k] = f >= 0 && adjacent(static_cast<int>(k), owner[f]);
    }
  }
  return out;
}

inline Joints2D render_joints2d(const MeshAsset& mesh, const CameraSpec& spec, const Eigen::Matrix4d& cam_to_world,
                                const VisibilityOptions& opt = {}) {
  const RenderResult r = rasterize(mesh, TextureMap::solid(1, {0, 0, 0}), spec, cam_to_world);
  return render_joints2d(mesh, spec, cam_to_world, r, opt);
}

}  // namespace egobody
