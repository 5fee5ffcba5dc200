#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenefit/camera.hpp"
#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/image_io.hpp"
#include "scenefit/mask.hpp"

namespace scenefit {

/// One detected instance: identity, confidence, box, mask file, and the
/// ordered candidate-model files competing for it.
struct DetectionRecord {
  std::string instance_id;
  std::string label;
  double confidence = 0.0;
  double bbox[4] = {0, 0, 0, 0};  // x_min, y_min, x_max, y_max in pixels
  std::string mask_path;                // resolved
  std::vector<std::string> candidate_paths;  // resolved, ordered
};

/// A fully validated scene job. Paths are resolved against the manifest's
/// directory; exactly one of depth_path / pointmap_path is non-empty. The
/// object is immutable after load.
struct SceneManifest {
  std::string depth_path;
  std::string pointmap_path;
  bool has_intrinsics = false;
  PinholeIntrinsics intrinsics;  // valid only when has_intrinsics
  double confidence_threshold = 0.5;
  std::vector<DetectionRecord> detections;
  int width = 0;   // scene raster dimensions, from the geometry source
  int height = 0;
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base_dir,
                                const std::string& rel) {
  return (base_dir / rel).lexically_normal().string();
}

inline void require_file(const std::string& path, const std::string& role) {
  require(std::filesystem::is_regular_file(path), role + " file missing: " + path);
}

}  // namespace detail

/// Parses and fully validates a scene manifest (JSON; grammar documented in
/// docs/manifest_format.md). All referenced files must exist, the geometry
/// source must be unique, every bbox must sit inside the image, and every
/// mask must match the scene dimensions.
inline SceneManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), path + ": cannot open file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": malformed field (" + e.what() + ")");
  }
  const std::filesystem::path base_dir = std::filesystem::path(path).parent_path();

  SceneManifest m;
  try {
    const bool has_depth = doc.contains("depth_path");
    const bool has_pointmap = doc.contains("pointmap_path");
    require(has_depth != has_pointmap, path + ": exactly one geometry source");
    if (has_depth)
      m.depth_path = detail::resolve_path(base_dir, doc.at("depth_path").get<std::string>());
    else
      m.pointmap_path =
          detail::resolve_path(base_dir, doc.at("pointmap_path").get<std::string>());

    m.confidence_threshold = doc.value("confidence_threshold", 0.5);
    require(m.confidence_threshold >= 0.0 && m.confidence_threshold <= 1.0,
            path + ": confidence_threshold outside [0, 1]");

    const std::string geom = has_depth ? m.depth_path : m.pointmap_path;
    detail::require_file(geom, "geometry");
    peek_raster_dims(geom, m.width, m.height);

    if (doc.contains("intrinsics")) {
      const auto& j = doc.at("intrinsics");
      m.intrinsics.focal = j.at("focal").get<double>();
      m.intrinsics.cx = j.value("cx", m.width / 2.0);
      m.intrinsics.cy = j.value("cy", m.height / 2.0);
      m.intrinsics.width = m.width;
      m.intrinsics.height = m.height;
      require_intrinsics(m.intrinsics);
      m.has_intrinsics = true;
    }

    for (const auto& j : doc.value("detections", nlohmann::json::array())) {
      DetectionRecord rec;
      rec.instance_id = j.at("instance_id").get<std::string>();
      rec.label = j.value("label", std::string());
      rec.confidence = j.at("confidence").get<double>();
      require(rec.confidence >= 0.0 && rec.confidence <= 1.0,
              path + ": detection " + rec.instance_id + ": confidence outside [0, 1]");
      const auto& bbox = j.at("bbox");
      require(bbox.is_array() && bbox.size() == 4,
              path + ": detection " + rec.instance_id + ": bbox must have 4 entries");
      for (int i = 0; i < 4; ++i) rec.bbox[i] = bbox.at(i).get<double>();
      require(rec.bbox[0] < rec.bbox[2] && rec.bbox[1] < rec.bbox[3],
              path + ": detection " + rec.instance_id + ": bbox min must be below max");
      require(rec.bbox[0] >= 0.0 && rec.bbox[1] >= 0.0 && rec.bbox[2] <= m.width &&
                  rec.bbox[3] <= m.height,
              path + ": detection " + rec.instance_id + ": bbox out of bounds");

      rec.mask_path = detail::resolve_path(base_dir, j.at("mask_path").get<std::string>());
      detail::require_file(rec.mask_path, "mask");
      int mw = 0, mh = 0;
      peek_raster_dims(rec.mask_path, mw, mh);
      require(mw == m.width && mh == m.height,
              rec.mask_path + ": dimension mismatch with scene geometry");

      const auto& cands = j.at("candidate_paths");
      require(cands.is_array() && !cands.empty(),
              path + ": detection " + rec.instance_id + ": candidate_paths empty");
      for (const auto& c : cands) {
        rec.candidate_paths.push_back(
            detail::resolve_path(base_dir, c.get<std::string>()));
        detail::require_file(rec.candidate_paths.back(), "candidate");
      }
      m.detections.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": malformed field (" + e.what() + ")");
  }
  return m;
}

/// Keeps detections whose confidence strictly exceeds the threshold,
/// preserving manifest order. Idempotent; an empty result is legal.
inline std::vector<DetectionRecord> filter_detections(const SceneManifest& m) {
  std::vector<DetectionRecord> kept;
  for (const DetectionRecord& rec : m.detections)
    if (rec.confidence > m.confidence_threshold) kept.push_back(rec);
  return kept;
}

/// Collects pointmap entries where the mask bit is set and the pixel is
/// valid, in row-major order.
inline PointCloud extract_instance_cloud(const Pointmap& pm, const InstanceMask& mask) {
  require(pm.width == mask.width && pm.height == mask.height,
          "mask dimension mismatch with pointmap");
  PointCloud out;
  for (std::size_t i = 0; i < pm.points.size(); ++i)
    if (mask.bits[i] && pm.valid[i]) out.points.push_back(pm.points[i]);
  require(!out.empty(), "empty instance");
  return out;
}

}  // namespace scenefit
