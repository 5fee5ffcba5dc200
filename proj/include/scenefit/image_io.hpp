#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scenefit/camera.hpp"
#include "scenefit/error.hpp"
#include "scenefit/mask.hpp"

namespace scenefit {

namespace detail {

/// Reads one whitespace-delimited netpbm header token, skipping '#' comments.
inline std::string pnm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  require(!tok.empty(), path + ": truncated header");
  return tok;
}

inline int pnm_int(std::istream& in, const std::string& path, const char* field) {
  const std::string tok = pnm_token(in, path);
  try {
    std::size_t used = 0;
    const int value = std::stoi(tok, &used);
    require(used == tok.size() && value > 0,
            path + ": invalid " + field + " '" + tok + "'");
    return value;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(path + ": invalid " + std::string(field) + " '" + tok + "'");
  }
}

inline void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), tmp + ": cannot open file for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, path + ": rename failed (" + ec.message() + ")");
}

}  // namespace detail

/// Loads a binary PGM (P5, maxval 255); values > 127 select the pixel.
inline InstanceMask load_mask_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open file");
  require(detail::pnm_token(in, path) == "P5", path + ": not a P5 PGM");
  const int w = detail::pnm_int(in, path, "width");
  const int h = detail::pnm_int(in, path, "height");
  const int maxval = detail::pnm_int(in, path, "maxval");
  require(maxval == 255, path + ": unsupported maxval (expected 255)");
  // The header ends with exactly one whitespace byte, already consumed by
  // pnm_int's delimiter read.
  InstanceMask mask(w, h);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(in.gcount() == static_cast<std::streamsize>(raw.size()),
          path + ": pixel data truncated");
  for (std::size_t i = 0; i < raw.size(); ++i) mask.bits[i] = raw[i] > 127 ? 1 : 0;
  return mask;
}

inline void save_mask_pgm(const InstanceMask& mask, const std::string& path) {
  require(mask.width > 0 && mask.height > 0, path + ": empty mask");
  std::string bytes = "P5\n" + std::to_string(mask.width) + " " +
                      std::to_string(mask.height) + "\n255\n";
  bytes.reserve(bytes.size() + mask.bits.size());
  for (std::uint8_t b : mask.bits) bytes.push_back(b ? char(255) : char(0));
  detail::atomic_write_bytes(path, bytes);
}

namespace detail {

/// Shared PFM raster reader. PFM stores float32 rows bottom-to-top; a
/// negative scale marks little-endian data (the only variant written or
/// accepted here). channels = 1 ("Pf") or 3 ("PF").
inline std::vector<float> load_pfm_raster(const std::string& path, int channels,
                                          int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open file");
  const std::string magic = pnm_token(in, path);
  const char* expected = channels == 1 ? "Pf" : "PF";
  require(magic == expected,
          path + ": not a " + std::string(expected) + " PFM (got " + magic + ")");
  width = pnm_int(in, path, "width");
  height = pnm_int(in, path, "height");
  const std::string scale_tok = pnm_token(in, path);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw Error(path + ": invalid scale '" + scale_tok + "'");
  }
  require(scale < 0.0, path + ": big-endian PFM is not supported");
  std::vector<float> raster(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(raster.data()),
          static_cast<std::streamsize>(raster.size() * sizeof(float)));
  require(in.gcount() == static_cast<std::streamsize>(raster.size() * sizeof(float)),
          path + ": pixel data truncated");
  return raster;
}

inline void save_pfm_raster(const std::string& path, int channels, int width,
                            int height, const std::vector<float>& raster) {
  std::string bytes = std::string(channels == 1 ? "Pf" : "PF") + "\n" +
                      std::to_string(width) + " " + std::to_string(height) +
                      "\n-1.0\n";
  const std::size_t data_size = raster.size() * sizeof(float);
  const std::size_t header_size = bytes.size();
  bytes.resize(header_size + data_size);
  std::memcpy(bytes.data() + header_size, raster.data(), data_size);
  atomic_write_bytes(path, bytes);
}

}  // namespace detail

/// Loads a single-channel PFM as a depth map; non-positive or non-finite
/// samples become invalid pixels.
inline DepthMap load_depth_pfm(const std::string& path) {
  int w = 0, h = 0;
  const std::vector<float> raster = detail::load_pfm_raster(path, 1, w, h);
  DepthMap depth(w, h);
  for (int v = 0; v < h; ++v) {
    const int src_row = h - 1 - v;  // PFM rows run bottom-to-top
    for (int u = 0; u < w; ++u) {
      const float d = raster[static_cast<std::size_t>(src_row) * w + u];
      if (std::isfinite(d) && d > 0.0f) {
        depth.values[depth.idx(u, v)] = d;
        depth.valid[depth.idx(u, v)] = 1;
      }
    }
  }
  return depth;
}

inline void save_depth_pfm(const DepthMap& depth, const std::string& path) {
  require(depth.width > 0 && depth.height > 0, path + ": empty depth map");
  std::vector<float> raster(static_cast<std::size_t>(depth.width) * depth.height, 0.0f);
  for (int v = 0; v < depth.height; ++v) {
    const int dst_row = depth.height - 1 - v;
    for (int u = 0; u < depth.width; ++u) {
      const std::size_t i = depth.idx(u, v);
      raster[static_cast<std::size_t>(dst_row) * depth.width + u] =
          depth.valid[i] ? static_cast<float>(depth.values[i]) : 0.0f;
    }
  }
  detail::save_pfm_raster(path, 1, depth.width, depth.height, raster);
}

/// Loads a 3-channel PFM as a pointmap (x, y, z per pixel); entries with
/// non-finite coordinates or z <= 0 become invalid pixels.
inline Pointmap load_pointmap_pfm(const std::string& path) {
  int w = 0, h = 0;
  const std::vector<float> raster = detail::load_pfm_raster(path, 3, w, h);
  Pointmap pm(w, h);
  for (int v = 0; v < h; ++v) {
    const int src_row = h - 1 - v;
    for (int u = 0; u < w; ++u) {
      const std::size_t s = (static_cast<std::size_t>(src_row) * w + u) * 3;
      const Vec3 p(raster[s], raster[s + 1], raster[s + 2]);
      if (p.allFinite() && p.z() > 0.0) {
        pm.points[pm.idx(u, v)] = p;
        pm.valid[pm.idx(u, v)] = 1;
      }
    }
  }
  return pm;
}

inline void save_pointmap_pfm(const Pointmap& pm, const std::string& path) {
  require(pm.width > 0 && pm.height > 0, path + ": empty pointmap");
  std::vector<float> raster(static_cast<std::size_t>(pm.width) * pm.height * 3, 0.0f);
  for (int v = 0; v < pm.height; ++v) {
    const int dst_row = pm.height - 1 - v;
    for (int u = 0; u < pm.width; ++u) {
      const std::size_t i = pm.idx(u, v);
      const std::size_t s = (static_cast<std::size_t>(dst_row) * pm.width + u) * 3;
      if (pm.valid[i]) {
        raster[s] = static_cast<float>(pm.points[i].x());
        raster[s + 1] = static_cast<float>(pm.points[i].y());
        raster[s + 2] = static_cast<float>(pm.points[i].z());
      }
    }
  }
  detail::save_pfm_raster(path, 3, pm.width, pm.height, raster);
}

/// Reads only the dimensions of a PGM or PFM header (for validation without
/// loading pixels).
inline void peek_raster_dims(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open file");
  const std::string magic = detail::pnm_token(in, path);
  require(magic == "P5" || magic == "Pf" || magic == "PF",
          path + ": unknown raster format " + magic);
  width = detail::pnm_int(in, path, "width");
  height = detail::pnm_int(in, path, "height");
}

}  // namespace scenefit
