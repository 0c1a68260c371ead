#pragma once

// Wavefront OBJ export/import plus the skeleton sidecar.
//
// export_mesh(mesh, dir, stem) writes
//   <stem>.obj           v / vt / f records, 1-indexed, v and vt share indices
//   <stem>.mtl           only when a texture file name is given
//   <stem>.skeleton.txt  kv text: format_version 1, parents, rest_joints,
//                        skin_weights, and joint_regressor / shape_dirs when known
//
// load_model_asset(obj) reads the OBJ and the sidecar next to it and validates
// every BodyModelAsset invariant.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "egobody/body/body_model.hpp"
#include "egobody/core/error.hpp"
#include "egobody/core/kvtext.hpp"

namespace egobody {

inline constexpr int kSidecarFormatVersion = 1;

struct ObjData {
  Eigen::MatrixX3d vertices;
  Eigen::MatrixX2d uv_coords;
  Eigen::MatrixX3i faces;
};

/// <stem>.skeleton.txt next to the OBJ, or a plain skeleton.txt in the same
/// directory when only that exists.
inline std::filesystem::path sidecar_path(const std::filesystem::path& obj) {
  auto p = obj;
  p.replace_extension(".skeleton.txt");
  if (!std::filesystem::exists(p)) {
    const auto plain = obj.parent_path() / "skeleton.txt";
    if (std::filesystem::exists(plain)) return plain;
  }
  return p;
}

inline std::string obj_text(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX2d& uv, const Eigen::MatrixX3i& faces,
                            const std::string& mtl_file = {}) {
  require(uv.rows() == 0 || uv.rows() == vertices.rows(), "obj: need one UV per vertex");
  std::string out = "# egobody mesh\n";
  if (!mtl_file.empty()) out += "mtllib " + mtl_file + "\nusemtl body\n";
  char buf[160];
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", vertices(i, 0), vertices(i, 1), vertices(i, 2));
    out += buf;
  }
  for (Eigen::Index i = 0; i < uv.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "vt %.17g %.17g\n", uv(i, 0), uv(i, 1));
    out += buf;
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    if (uv.rows())
      std::snprintf(buf, sizeof(buf), "f %d/%d %d/%d %d/%d\n", faces(f, 0) + 1, faces(f, 0) + 1, faces(f, 1) + 1,
                    faces(f, 1) + 1, faces(f, 2) + 1, faces(f, 2) + 1);
    else
      std::snprintf(buf, sizeof(buf), "f %d %d %d\n", faces(f, 0) + 1, faces(f, 1) + 1, faces(f, 2) + 1);
    out += buf;
  }
  return out;
}

/// Parses v / vt / f records. Polygons are fan-triangulated. When vt indices
/// differ from v indices, the UV of the last corner referencing a vertex wins.
inline ObjData parse_obj(const std::string& text, const std::string& file = "<obj>") {
  std::vector<Eigen::Vector3d> v;
  std::vector<Eigen::Vector2d> vt;
  std::vector<Eigen::Vector3i> f;
  std::vector<std::pair<int, int>> corner_uv;  // (vertex, uv) assignments
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto number = [&](std::istringstream& ls, const char* what) {
    std::string tok;
    if (!(ls >> tok)) throw ParseError(file, lineno, std::string("missing ") + what);
    return kv::parse_number(tok, file, lineno);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      const double x = number(ls, "x"), y = number(ls, "y"), z = number(ls, "z");
      v.emplace_back(x, y, z);
    } else if (tag == "vt") {
      const double a = number(ls, "u"), b = number(ls, "v");
      vt.emplace_back(a, b);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        auto parse_index = [&](const std::string& s, std::size_t count) {
          int i = 0;
          try {
            std::size_t used = 0;
            i = std::stoi(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
          } catch (const std::exception&) {
            throw ParseError(file, lineno, "bad face index '" + s + "'");
          }
          if (i < 0) i = static_cast<int>(count) + i + 1;
          if (i < 1 || i > static_cast<int>(count)) throw ParseError(file, lineno, "face index out of range: " + s);
          return i - 1;
        };
        const int vi = parse_index(tok.substr(0, slash), v.size());
        idx.push_back(vi);
        if (slash != std::string::npos) {
          const auto rest = tok.substr(slash + 1);
          const auto uv_tok = rest.substr(0, rest.find('/'));
          if (!uv_tok.empty()) corner_uv.emplace_back(vi, parse_index(uv_tok, vt.size()));
        }
      }
      if (idx.size() < 3) throw ParseError(file, lineno, "face needs at least 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) f.emplace_back(idx[0], idx[k], idx[k + 1]);
    }
    // mtllib / usemtl / o / g / s and other records are ignored.
  }
  ObjData out;
  out.vertices.resize(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) out.vertices.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  out.faces.resize(static_cast<Eigen::Index>(f.size()), 3);
  for (std::size_t i = 0; i < f.size(); ++i) out.faces.row(static_cast<Eigen::Index>(i)) = f[i].transpose();
  out.uv_coords = Eigen::MatrixX2d::Zero(static_cast<Eigen::Index>(v.size()), 2);
  if (!vt.empty()) {
    if (corner_uv.empty() && vt.size() == v.size()) {
      for (std::size_t i = 0; i < vt.size(); ++i) out.uv_coords.row(static_cast<Eigen::Index>(i)) = vt[i].transpose();
    } else {
      for (auto [vi, ti] : corner_uv) out.uv_coords.row(vi) = vt[static_cast<std::size_t>(ti)].transpose();
    }
  }
  return out;
}

inline ObjData load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str(), path.string());
}

namespace detail {
inline std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return out;
}
inline Eigen::MatrixXd from_entry(const kv::Entry& e) {
  Eigen::MatrixXd m(e.rows, e.cols);
  for (int r = 0; r < e.rows; ++r)
    for (int c = 0; c < e.cols; ++c) m(r, c) = e.values[static_cast<std::size_t>(r) * e.cols + c];
  return m;
}
}  // namespace detail

struct SidecarContents {
  const Eigen::MatrixXd* joint_regressor = nullptr;
  const Eigen::MatrixXd* shape_dirs = nullptr;
  const Eigen::MatrixXd* pose_dirs = nullptr;
};

inline kv::Document skeleton_sidecar(const Parents& parents, const Eigen::MatrixX3d& rest_joints,
                                     const Eigen::MatrixXd& skin_weights, const SidecarContents& extra = {}) {
  kv::Document doc;
  doc.set("format_version", kSidecarFormatVersion);
  doc.set("kind", "skeleton");
  doc.set("num_joints", kNumJoints);
  doc.set("num_vertices", static_cast<int>(skin_weights.rows()));
  doc.set_list("parents", parents);
  doc.set_matrix("rest_joints", static_cast<int>(rest_joints.rows()), 3, detail::row_major(rest_joints));
  doc.set_matrix("skin_weights", static_cast<int>(skin_weights.rows()), static_cast<int>(skin_weights.cols()),
                 detail::row_major(skin_weights));
  if (extra.joint_regressor)
    doc.set_matrix("joint_regressor", static_cast<int>(extra.joint_regressor->rows()),
                   static_cast<int>(extra.joint_regressor->cols()), detail::row_major(*extra.joint_regressor));
  if (extra.shape_dirs)
    doc.set_matrix("shape_dirs", static_cast<int>(extra.shape_dirs->rows()), static_cast<int>(extra.shape_dirs->cols()),
                   detail::row_major(*extra.shape_dirs));
  if (extra.pose_dirs && extra.pose_dirs->size())
    doc.set_matrix("pose_dirs", static_cast<int>(extra.pose_dirs->rows()), static_cast<int>(extra.pose_dirs->cols()),
                   detail::row_major(*extra.pose_dirs));
  return doc;
}

inline std::string mtl_text(const std::string& texture_file) {
  return "# egobody material\nnewmtl body\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nillum 1\nmap_Kd " + texture_file + "\n";
}

/// Writes <dir>/<stem>.obj, the skeleton sidecar (default <stem>.skeleton.txt)
/// and, when `texture_file` is non-empty, <stem>.mtl referencing it. Returns
/// the OBJ path.
inline std::filesystem::path export_mesh(const MeshAsset& mesh, const std::filesystem::path& dir,
                                         const std::string& stem, const std::string& texture_file = {},
                                         const std::string& skeleton_file = {}) {
  std::filesystem::create_directories(dir);
  const std::string mtl = texture_file.empty() ? std::string{} : stem + ".mtl";
  const auto obj_path = dir / (stem + ".obj");
  write_file_bytes(obj_path, obj_text(mesh.vertices, mesh.uv_coords, mesh.faces, mtl));
  if (!mtl.empty()) write_file_bytes(dir / mtl, mtl_text(texture_file));
  if (mesh.skin_weights && mesh.joints3d.rows() == kNumJoints) {
    SidecarContents extra;
    extra.joint_regressor = mesh.joint_regressor.get();
    skeleton_sidecar(mesh.parents, mesh.joints3d, *mesh.skin_weights, extra)
        .save(skeleton_file.empty() ? dir / (stem + ".skeleton.txt") : dir / skeleton_file);
  }
  return obj_path;
}

/// Exports the template of a full asset; the sidecar carries every tensor so
/// load_model_asset reproduces the asset.
inline std::filesystem::path export_model_asset(const BodyModelAsset& asset, const std::filesystem::path& dir,
                                                const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto obj_path = dir / (stem + ".obj");
  write_file_bytes(obj_path, obj_text(asset.template_vertices, asset.uv_coords, asset.faces));
  const JointMat rest = asset.joint_regressor * asset.template_vertices;
  SidecarContents extra{&asset.joint_regressor, &asset.shape_dirs, &asset.pose_dirs};
  skeleton_sidecar(asset.parents, rest, asset.skin_weights, extra).save(dir / (stem + ".skeleton.txt"));
  return obj_path;
}

/// Loads OBJ + sidecar. Missing shape_dirs load as zero; a missing
/// joint_regressor is a validation error. All invariants are checked.
inline BodyModelAsset load_model_asset(const std::filesystem::path& obj_path) {
  const ObjData obj = load_obj(obj_path);
  const auto side = sidecar_path(obj_path);
  if (!std::filesystem::exists(side)) throw ValidationError("sidecar", "missing skeleton file " + side.string());
  const kv::Document doc = kv::Document::load(side);
  const int version = doc.get_int("format_version");
  if (version != kSidecarFormatVersion)
    throw ValidationError("format_version", "unsupported sidecar version " + std::to_string(version));
  const auto v = static_cast<int>(obj.vertices.rows());

  BodyModelAsset asset;
  asset.template_vertices = obj.vertices;
  asset.uv_coords = obj.uv_coords;
  asset.faces = obj.faces;
  const auto parents = doc.get_list("parents");
  if (parents.size() != kNumJoints) throw ValidationError("parents", "expected 24 entries");
  for (int j = 0; j < kNumJoints; ++j) asset.parents[j] = static_cast<int>(parents[j]);
  const auto& w = doc.get_matrix("skin_weights");
  if (w.rows != v || w.cols != kNumJoints)
    throw ValidationError("skin_weights", "sidecar skin_weights shape does not match the OBJ vertex count");
  asset.skin_weights = detail::from_entry(w);
  if (!doc.has("joint_regressor")) throw ValidationError("joint_regressor", "sidecar has no joint_regressor");
  asset.joint_regressor = detail::from_entry(doc.get_matrix("joint_regressor"));
  asset.shape_dirs = doc.has("shape_dirs") ? detail::from_entry(doc.get_matrix("shape_dirs"))
                                           : Eigen::MatrixXd::Zero(3 * v, kNumBetas);
  if (doc.has("pose_dirs")) asset.pose_dirs = detail::from_entry(doc.get_matrix("pose_dirs"));
  asset.validate();
  return asset;
}

}  // namespace egobody
