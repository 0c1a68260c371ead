#pragma once

// Loader for SMPL model archives converted to NumPy .npz (np.savez or
// np.savez_compressed). Recognised arrays:
//
//   v_template     V x 3       float
//   shapedirs      V x 3 x S   float (first 10 components are used; S >= 10)
//   posedirs       V x 3 x 207 float (optional)
//   J_regressor    24 x V      float
//   kintree_table  2 x 24      int   (row 0 holds parents; root may be -1 or 2^32-1)
//   weights        V x 24      float
//   f              F x 3       int
//   vt             V x 2       float (optional; zeros when absent)

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "egobody/body/body_model.hpp"
#include "egobody/core/error.hpp"
#include "egobody/core/hash.hpp"

namespace egobody {

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;  // converted to double, C order
  std::size_t size() const { return data.size(); }
};

namespace npz_detail {

inline std::uint32_t u32(const unsigned char* p) { return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24); }
inline std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
inline std::uint64_t u64(const unsigned char* p) { return u32(p) | (std::uint64_t(u32(p + 4)) << 32); }

inline NpyArray parse_npy(const std::vector<unsigned char>& buf, const std::string& name) {
  if (buf.size() < 10 || std::memcmp(buf.data(), "\x93NUMPY", 6) != 0)
    throw ValidationError("npz", name + " is not an .npy array");
  const int major = buf[6];
  std::size_t header_len = 0, off = 0;
  if (major == 1) {
    header_len = u16(buf.data() + 8);
    off = 10;
  } else {
    header_len = u32(buf.data() + 8);
    off = 12;
  }
  if (off + header_len > buf.size()) throw ValidationError("npz", name + ": truncated header");
  const std::string header(reinterpret_cast<const char*>(buf.data() + off), header_len);
  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr':\\s*'([<>|=])([a-z])(\\d+)'")))
    throw ValidationError("npz", name + ": cannot read dtype");
  const char order = m[1].str()[0];
  const char kind = m[2].str()[0];
  const int width = std::stoi(m[3].str());
  if (order == '>') throw ValidationError("npz", name + ": big-endian arrays are not supported");
  if (std::regex_search(header, std::regex("'fortran_order':\\s*True")))
    throw ValidationError("npz", name + ": Fortran-ordered arrays are not supported");
  if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)")))
    throw ValidationError("npz", name + ": cannot read shape");
  NpyArray arr;
  std::size_t count = 1;
  const std::string dims = m[1].str();
  const std::regex digits("\\d+");
  for (std::sregex_iterator it(dims.begin(), dims.end(), digits), end; it != end; ++it) {
    arr.shape.push_back(std::stoull(it->str()));
    count *= arr.shape.back();
  }
  const unsigned char* p = buf.data() + off + header_len;
  if (static_cast<std::size_t>(p - buf.data()) + count * width > buf.size())
    throw ValidationError("npz", name + ": truncated data");
  arr.data.resize(count);
  for (std::size_t i = 0; i < count; ++i, p += width) {
    double v = 0;
    if (kind == 'f' && width == 8) {
      std::memcpy(&v, p, 8);
    } else if (kind == 'f' && width == 4) {
      float f;
      std::memcpy(&f, p, 4);
      v = f;
    } else if (kind == 'i' && width == 4) {
      std::int32_t x;
      std::memcpy(&x, p, 4);
      v = x;
    } else if (kind == 'i' && width == 8) {
      std::int64_t x;
      std::memcpy(&x, p, 8);
      v = static_cast<double>(x);
    } else if (kind == 'u' && width == 4) {
      v = u32(p);
    } else if (kind == 'u' && width == 8) {
      v = static_cast<double>(u64(p));
    } else {
      throw ValidationError("npz", name + ": unsupported dtype " + m.str());
    }
    arr.data[i] = v;
  }
  return arr;
}

inline std::vector<unsigned char> inflate_raw(const unsigned char* src, std::size_t n, std::size_t expected) {
  std::vector<unsigned char> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw std::runtime_error("zlib init failed");
  zs.next_in = const_cast<unsigned char*>(src);
  zs.avail_in = static_cast<uInt>(n);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw ValidationError("npz", "corrupt deflate stream");
  return out;
}

}  // namespace npz_detail

/// Reads every array in an .npz (ZIP with stored or deflated members).
inline std::map<std::string, NpyArray> load_npz(const std::filesystem::path& path) {
  using namespace npz_detail;
  const auto raw = read_file_bytes(path);
  const auto* b = reinterpret_cast<const unsigned char*>(raw.data());
  const std::size_t n = raw.size();
  // End-of-central-directory record.
  std::size_t eocd = std::string::npos;
  for (std::size_t i = n >= 22 ? n - 22 : 0; i + 4 <= n; --i) {
    if (u32(b + i) == 0x06054b50) {
      eocd = i;
      break;
    }
    if (i == 0) break;
  }
  if (eocd == std::string::npos) throw ValidationError("npz", path.string() + " is not a ZIP archive");
  std::uint64_t entries = u16(b + eocd + 10);
  std::uint64_t cd_offset = u32(b + eocd + 16);
  if (cd_offset == 0xffffffffULL || entries == 0xffff) {
    // Zip64 end-of-central-directory locator precedes the EOCD.
    if (eocd < 20 || u32(b + eocd - 20) != 0x07064b50) throw ValidationError("npz", "missing zip64 locator");
    const std::uint64_t z64 = u64(b + eocd - 20 + 8);
    entries = u64(b + z64 + 32);
    cd_offset = u64(b + z64 + 48);
  }
  std::map<std::string, NpyArray> out;
  std::size_t p = cd_offset;
  for (std::uint64_t e = 0; e < entries; ++e) {
    if (p + 46 > n || u32(b + p) != 0x02014b50) throw ValidationError("npz", "corrupt central directory");
    const std::uint16_t method = u16(b + p + 10);
    std::uint64_t csize = u32(b + p + 20);
    std::uint64_t usize = u32(b + p + 24);
    const std::uint16_t name_len = u16(b + p + 28);
    const std::uint16_t extra_len = u16(b + p + 30);
    const std::uint16_t comment_len = u16(b + p + 32);
    std::uint64_t local = u32(b + p + 42);
    std::string name(reinterpret_cast<const char*>(b + p + 46), name_len);
    // Zip64 extended information extra field.
    for (std::size_t x = p + 46 + name_len; x + 4 <= p + 46 + name_len + extra_len;) {
      const std::uint16_t id = u16(b + x);
      const std::uint16_t len = u16(b + x + 2);
      if (id == 0x0001) {
        std::size_t q = x + 4;
        if (usize == 0xffffffffULL) usize = u64(b + q), q += 8;
        if (csize == 0xffffffffULL) csize = u64(b + q), q += 8;
        if (local == 0xffffffffULL) local = u64(b + q);
      }
      x += 4 + len;
    }
    p += 46 + name_len + extra_len + comment_len;
    if (local + 30 > n || u32(b + local) != 0x04034b50) throw ValidationError("npz", "corrupt local header");
    const std::size_t data = local + 30 + u16(b + local + 26) + u16(b + local + 28);
    if (data + csize > n) throw ValidationError("npz", "truncated member " + name);
    std::vector<unsigned char> member;
    if (method == 0)
      member.assign(b + data, b + data + csize);
    else if (method == 8)
      member = inflate_raw(b + data, csize, usize);
    else
      throw ValidationError("npz", "unsupported compression method in " + name);
    if (name.size() > 4 && name.substr(name.size() - 4) == ".npy") name.resize(name.size() - 4);
    out.emplace(name, parse_npy(member, name));
  }
  return out;
}

/// Builds a BodyModelAsset from SMPL arrays and validates it.
inline BodyModelAsset load_smpl_npz(const std::filesystem::path& path) {
  const auto arrays = load_npz(path);
  auto get = [&](const std::string& key) -> const NpyArray& {
    auto it = arrays.find(key);
    if (it == arrays.end()) throw ValidationError(key, "missing array '" + key + "' in " + path.string());
    return it->second;
  };
  const NpyArray& vt = get("v_template");
  if (vt.shape.size() != 2 || vt.shape[1] != 3) throw ValidationError("v_template", "expected V x 3");
  const auto v = static_cast<Eigen::Index>(vt.shape[0]);
  BodyModelAsset a;
  a.template_vertices.resize(v, 3);
  for (Eigen::Index i = 0; i < v; ++i)
    for (int c = 0; c < 3; ++c) a.template_vertices(i, c) = vt.data[static_cast<std::size_t>(i * 3 + c)];

  const NpyArray& sd = get("shapedirs");
  if (sd.shape.size() != 3 || static_cast<Eigen::Index>(sd.shape[0]) != v || sd.shape[1] != 3 || sd.shape[2] < kNumBetas)
    throw ValidationError("shape_dirs", "expected V x 3 x S with S >= 10");
  a.shape_dirs.resize(3 * v, kNumBetas);
  for (Eigen::Index i = 0; i < v; ++i)
    for (int c = 0; c < 3; ++c)
      for (int s = 0; s < kNumBetas; ++s)
        a.shape_dirs(3 * i + c, s) = sd.data[(static_cast<std::size_t>(i) * 3 + c) * sd.shape[2] + s];

  if (arrays.count("posedirs")) {
    const NpyArray& pd = get("posedirs");
    if (pd.shape.size() != 3 || static_cast<Eigen::Index>(pd.shape[0]) != v || pd.shape[1] != 3 ||
        pd.shape[2] != static_cast<std::size_t>(kNumPoseBlend))
      throw ValidationError("pose_dirs", "expected V x 3 x 207");
    a.pose_dirs.resize(3 * v, kNumPoseBlend);
    for (Eigen::Index i = 0; i < v; ++i)
      for (int c = 0; c < 3; ++c)
        for (int s = 0; s < kNumPoseBlend; ++s)
          a.pose_dirs(3 * i + c, s) = pd.data[(static_cast<std::size_t>(i) * 3 + c) * kNumPoseBlend + s];
  }

  const NpyArray& jr = get("J_regressor");
  if (jr.shape.size() != 2 || jr.shape[0] != kNumJoints || static_cast<Eigen::Index>(jr.shape[1]) != v)
    throw ValidationError("joint_regressor", "expected 24 x V");
  a.joint_regressor.resize(kNumJoints, v);
  for (int j = 0; j < kNumJoints; ++j)
    for (Eigen::Index i = 0; i < v; ++i) a.joint_regressor(j, i) = jr.data[static_cast<std::size_t>(j * v + i)];

  const NpyArray& kt = get("kintree_table");
  if (kt.shape.size() != 2 || kt.shape[0] != 2 || kt.shape[1] != kNumJoints)
    throw ValidationError("parents", "kintree_table must be 2 x 24");
  for (int j = 0; j < kNumJoints; ++j) {
    const double p = kt.data[static_cast<std::size_t>(j)];
    a.parents[j] = (p < 0 || p >= 4294967295.0) ? -1 : static_cast<int>(p);
  }

  const NpyArray& w = get("weights");
  if (w.shape.size() != 2 || static_cast<Eigen::Index>(w.shape[0]) != v || w.shape[1] != kNumJoints)
    throw ValidationError("skin_weights", "expected V x 24");
  a.skin_weights.resize(v, kNumJoints);
  for (Eigen::Index i = 0; i < v; ++i)
    for (int j = 0; j < kNumJoints; ++j) a.skin_weights(i, j) = w.data[static_cast<std::size_t>(i * kNumJoints + j)];

  const NpyArray& f = get("f");
  if (f.shape.size() != 2 || f.shape[1] != 3) throw ValidationError("faces", "expected F x 3");
  a.faces.resize(static_cast<Eigen::Index>(f.shape[0]), 3);
  for (Eigen::Index i = 0; i < a.faces.rows(); ++i)
    for (int c = 0; c < 3; ++c) a.faces(i, c) = static_cast<int>(f.data[static_cast<std::size_t>(i * 3 + c)]);

  a.uv_coords = Eigen::MatrixX2d::Zero(v, 2);
  if (arrays.count("vt")) {
    const NpyArray& uv = get("vt");
    if (uv.shape.size() != 2 || static_cast<Eigen::Index>(uv.shape[0]) != v || uv.shape[1] != 2)
      throw ValidationError("uv_coords", "vt must be V x 2 (per-vertex UVs)");
    for (Eigen::Index i = 0; i < v; ++i)
      for (int c = 0; c < 2; ++c) a.uv_coords(i, c) = uv.data[static_cast<std::size_t>(i * 2 + c)];
  }
  a.validate();
  return a;
}

}  // namespace egobody
