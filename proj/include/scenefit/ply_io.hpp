#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"

namespace scenefit {

namespace detail {

struct PlyProperty {
  std::string name;
  int byte_size = 0;    // scalar size in the binary layout
  bool is_float = false;  // float32
  bool is_double = false; // float64
};

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> properties;  // of the vertex element, in order
  std::streampos body_start;
};

inline int ply_scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32") return 4;
  if (type == "float" || type == "float32") return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

/// Parses the header up to end_header. Only the leading vertex element is
/// honored; trailing elements (faces etc.) are ignored by the loaders.
inline PlyHeader parse_ply_header(std::istream& in, const std::string& path) {
  const std::string ctx = path + ": malformed header";
  PlyHeader hdr;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ctx + " (empty file)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "ply", ctx + " (missing ply magic)");
  bool have_format = false;
  bool in_vertex = false;
  bool seen_vertex = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word) || word == "comment" || word == "obj_info") continue;
    if (word == "format") {
      std::string fmt, version;
      require(static_cast<bool>(ls >> fmt >> version), ctx + " (bad format line)");
      if (fmt == "ascii") hdr.binary = false;
      else if (fmt == "binary_little_endian") hdr.binary = true;
      else throw Error(ctx + " (unsupported format " + fmt + ")");
      have_format = true;
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      require(static_cast<bool>(ls >> name >> count), ctx + " (bad element line)");
      if (name == "vertex") {
        require(!seen_vertex, ctx + " (duplicate vertex element)");
        seen_vertex = true;
        in_vertex = true;
        hdr.vertex_count = count;
      } else {
        // A non-vertex element before the vertices would shift the binary
        // layout in ways this loader does not model.
        require(seen_vertex, ctx + " (vertex element must come first)");
        in_vertex = false;
      }
    } else if (word == "property") {
      if (!in_vertex) continue;
      std::string type;
      require(static_cast<bool>(ls >> type), ctx + " (bad property line)");
      require(type != "list", ctx + " (list property on vertex element)");
      PlyProperty prop;
      prop.byte_size = ply_scalar_size(type);
      require(prop.byte_size > 0, ctx + " (unknown property type " + type + ")");
      prop.is_float = (type == "float" || type == "float32");
      prop.is_double = (type == "double" || type == "float64");
      require(static_cast<bool>(ls >> prop.name), ctx + " (unnamed property)");
      hdr.properties.push_back(prop);
    } else if (word == "end_header") {
      require(have_format, ctx + " (missing format line)");
      require(seen_vertex, ctx + " (missing vertex element)");
      hdr.body_start = in.tellg();
      return hdr;
    } else {
      throw Error(ctx + " (unknown keyword " + word + ")");
    }
  }
  throw Error(ctx + " (missing end_header)");
}

}  // namespace detail

/// Reads a PLY point cloud: ASCII or binary-little-endian, vertex element
/// first, x/y/z stored as float32 or float64 in any property positions.
/// Extra scalar vertex properties and trailing elements are ignored.
inline PointCloud load_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open file");
  const detail::PlyHeader hdr = detail::parse_ply_header(in, path);

  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < hdr.properties.size(); ++i) {
    const detail::PlyProperty& p = hdr.properties[i];
    if (p.name == "x") ix = static_cast<int>(i);
    else if (p.name == "y") iy = static_cast<int>(i);
    else if (p.name == "z") iz = static_cast<int>(i);
    if (p.name == "x" || p.name == "y" || p.name == "z")
      require(p.is_float || p.is_double,
              path + ": malformed header (coordinate " + p.name + " is not float)");
  }
  require(ix >= 0 && iy >= 0 && iz >= 0, path + ": malformed header (missing x/y/z)");

  PointCloud out;
  out.points.resize(hdr.vertex_count);
  if (hdr.binary) {
    std::size_t stride = 0;
    std::vector<std::size_t> offset(hdr.properties.size());
    for (std::size_t i = 0; i < hdr.properties.size(); ++i) {
      offset[i] = stride;
      stride += hdr.properties[i].byte_size;
    }
    std::vector<char> row(stride);
    for (std::size_t v = 0; v < hdr.vertex_count; ++v) {
      in.read(row.data(), static_cast<std::streamsize>(stride));
      require(in.gcount() == static_cast<std::streamsize>(stride),
              path + ": element count mismatch");
      const int idx[3] = {ix, iy, iz};
      for (int d = 0; d < 3; ++d) {
        const detail::PlyProperty& p = hdr.properties[idx[d]];
        double value = 0.0;
        if (p.is_double) {
          std::memcpy(&value, row.data() + offset[idx[d]], 8);
        } else {
          float f = 0.0f;
          std::memcpy(&f, row.data() + offset[idx[d]], 4);
          value = f;
        }
        out.points[v][d] = value;
      }
    }
  } else {
    for (std::size_t v = 0; v < hdr.vertex_count; ++v) {
      std::vector<double> fields(hdr.properties.size());
      for (std::size_t i = 0; i < hdr.properties.size(); ++i)
        require(static_cast<bool>(in >> fields[i]), path + ": element count mismatch");
      out.points[v] = Vec3(fields[ix], fields[iy], fields[iz]);
    }
  }
  for (std::size_t v = 0; v < hdr.vertex_count; ++v)
    require(out.points[v].allFinite(),
            path + ": non-finite coordinate at vertex " + std::to_string(v));
  return out;
}

/// Writes a binary-little-endian PLY with double x/y/z. Lossless for finite
/// clouds; the writer refuses non-finite coordinates. The file is written to
/// a temporary sibling and renamed so readers never see a partial file.
inline void save_point_cloud(const PointCloud& cloud, const std::string& path) {
  for (std::size_t i = 0; i < cloud.size(); ++i)
    require(cloud.points[i].allFinite(),
            path + ": non-finite coordinate at vertex " + std::to_string(i));
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), tmp + ": cannot open file for writing");
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << cloud.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "end_header\n";
    for (const Vec3& p : cloud.points) {
      double xyz[3] = {p.x(), p.y(), p.z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    require(out.good(), tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, path + ": rename failed (" + ec.message() + ")");
}

}  // namespace scenefit
