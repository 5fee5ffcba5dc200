#pragma once

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scenefit/camera.hpp"
#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/optimizer.hpp"
#include "scenefit/selection.hpp"
#include "scenefit/synth.hpp"
#include "scenefit/version.hpp"

namespace scenefit {

/// One optimized instance as it appears in a scene layout file.
struct InstanceResult {
  std::string instance_id;
  std::string label;
  int chosen = 0;  // candidate index used
  LayoutParams params;
  double loss3d = 0.0;
  double loss2d = 0.0;
  double fscore3d = 0.0;  // threshold 0.01, scene units
  double fscore2d = 0.0;  // threshold 1.00, pixels
};

/// Serialized scene output: camera, seed, and every instance's pose. All
/// fields except the generated-at header line are deterministic.
struct SceneLayout {
  PinholeIntrinsics cam;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::vector<InstanceResult> instances;
};

namespace detail {

/// Doubles print as %.17g: the shortest form that round-trips exactly, so
/// deterministic runs produce byte-identical files.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// The generated-at comment is the single non-deterministic line in any
/// report; byte-level comparisons drop it and nothing else. Trace and
/// sidecar files omit it entirely: they are contractually bit-identical
/// across reruns.
inline void write_report_header(std::ostream& out, const char* kind,
                                bool with_timestamp = true) {
  out << "# scenefit " << kind << " v1\n";
  if (with_timestamp) out << "# generated-at " << timestamp_utc() << "\n";
}

inline void atomic_write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), tmp + ": cannot open file for writing");
    out << text;
    require(out.good(), tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, path + ": rename failed (" + ec.message() + ")");
}

/// Line-oriented reader for the report formats: skips '#' comments, yields
/// whitespace-separated tokens per line.
class ReportReader {
public:
  ReportReader(const std::string& path) : path_(path), in_(path) {
    require(in_.good(), path + ": cannot open file");
  }

  bool next_line(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      tokens.clear();
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(path_ + ": " + why);
  }

  double to_double(const std::string& tok) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      require(used == tok.size(), path_ + ": bad number '" + tok + "'");
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(path_ + ": bad number '" + tok + "'");
    }
  }

private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace detail

/// Layout file: camera + seed header, then one block per instance.
inline void save_layout(const SceneLayout& layout, const std::string& path) {
  std::ostringstream out;
  detail::write_report_header(out, "layout");
  out << "version " << layout.version << "\n";
  out << "seed " << layout.seed << "\n";
  out << "camera " << detail::fmt(layout.cam.focal) << " " << detail::fmt(layout.cam.cx)
      << " " << detail::fmt(layout.cam.cy) << " " << layout.cam.width << " "
      << layout.cam.height << "\n";
  for (const InstanceResult& r : layout.instances) {
    out << "instance " << r.instance_id << "\n";
    out << "  label " << r.label << "\n";
    out << "  chosen " << r.chosen << "\n";
    out << "  params " << detail::fmt(r.params.t.x()) << " " << detail::fmt(r.params.t.y())
        << " " << detail::fmt(r.params.t.z()) << " " << detail::fmt(r.params.r.rx) << " "
        << detail::fmt(r.params.r.ry) << " " << detail::fmt(r.params.r.rz) << " "
        << detail::fmt(r.params.s) << "\n";
    out << "  loss " << detail::fmt(r.loss3d) << " " << detail::fmt(r.loss2d) << "\n";
    out << "  fscore " << detail::fmt(r.fscore3d) << " " << detail::fmt(r.fscore2d) << "\n";
  }
  detail::atomic_write_text(path, out.str());
}

inline SceneLayout load_layout(const std::string& path) {
  detail::ReportReader rd(path);
  SceneLayout layout;
  std::vector<std::string> t;
  InstanceResult* cur = nullptr;
  bool have_camera = false;
  while (rd.next_line(t)) {
    if (t[0] == "version" && t.size() == 2) {
      layout.version = t[1];
    } else if (t[0] == "seed" && t.size() == 2) {
      layout.seed = std::stoull(t[1]);
    } else if (t[0] == "camera" && t.size() == 6) {
      layout.cam.focal = rd.to_double(t[1]);
      layout.cam.cx = rd.to_double(t[2]);
      layout.cam.cy = rd.to_double(t[3]);
      layout.cam.width = static_cast<int>(rd.to_double(t[4]));
      layout.cam.height = static_cast<int>(rd.to_double(t[5]));
      have_camera = true;
    } else if (t[0] == "instance" && t.size() == 2) {
      for (const InstanceResult& r : layout.instances)
        require(r.instance_id != t[1], path + ": duplicate instance " + t[1]);
      layout.instances.emplace_back();
      cur = &layout.instances.back();
      cur->instance_id = t[1];
    } else if (cur && t[0] == "label" && t.size() >= 2) {
      cur->label = t[1];
    } else if (cur && t[0] == "chosen" && t.size() == 2) {
      cur->chosen = static_cast<int>(rd.to_double(t[1]));
    } else if (cur && t[0] == "params" && t.size() == 8) {
      cur->params.t = Vec3(rd.to_double(t[1]), rd.to_double(t[2]), rd.to_double(t[3]));
      cur->params.r = EulerRotation{rd.to_double(t[4]), rd.to_double(t[5]),
                                    rd.to_double(t[6])};
      cur->params.s = rd.to_double(t[7]);
    } else if (cur && t[0] == "loss" && t.size() == 3) {
      cur->loss3d = rd.to_double(t[1]);
      cur->loss2d = rd.to_double(t[2]);
    } else if (cur && t[0] == "fscore" && t.size() == 3) {
      cur->fscore3d = rd.to_double(t[1]);
      cur->fscore2d = rd.to_double(t[2]);
    } else {
      rd.fail("unrecognized line starting '" + t[0] + "'");
    }
  }
  require(have_camera, path + ": missing camera line");
  return layout;
}

/// Selection report: per instance, all candidate scores and the argmin.
inline void save_selection_reports(const std::vector<SelectionReport>& reports,
                                   const std::string& path) {
  std::ostringstream out;
  detail::write_report_header(out, "selection");
  if (reports.empty()) out << "# warning: no detections passed the confidence filter\n";
  for (const SelectionReport& r : reports) {
    out << "instance " << r.instance_id << "\n";
    out << "  chosen " << r.chosen << "\n";
    for (std::size_t k = 0; k < r.scores.size(); ++k)
      out << "  score " << k << " " << detail::fmt(r.scores[k]) << "\n";
  }
  detail::atomic_write_text(path, out.str());
}

/// Ground-truth sidecar for synthetic jobs: every primitive's true pose plus
/// the generator seed, in the same line-oriented format.
inline void save_sidecar(const SyntheticScene& scene, std::uint64_t seed,
                         const std::string& path) {
  std::ostringstream out;
  detail::write_report_header(out, "sidecar", false);
  out << "seed " << seed << "\n";
  out << "camera " << detail::fmt(scene.cam.focal) << " " << detail::fmt(scene.cam.cx)
      << " " << detail::fmt(scene.cam.cy) << " " << scene.cam.width << " "
      << scene.cam.height << "\n";
  for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
    const PrimitiveSpec& p = scene.primitives[k];
    out << "instance " << p.label << "\n";
    out << "  shape " << shape_name(p.shape) << "\n";
    out << "  canonical_size " << detail::fmt(p.canonical_size) << "\n";
    out << "  point_budget " << p.point_budget << "\n";
    out << "  occlusion " << detail::fmt(scene.occlusion_fraction[k]) << "\n";
    out << "  pose " << detail::fmt(p.pose.t.x()) << " " << detail::fmt(p.pose.t.y()) << " "
        << detail::fmt(p.pose.t.z()) << " " << detail::fmt(p.pose.r.rx) << " "
        << detail::fmt(p.pose.r.ry) << " " << detail::fmt(p.pose.r.rz) << " "
        << detail::fmt(p.pose.s) << "\n";
  }
  detail::atomic_write_text(path, out.str());
}

/// Ground truth loaded back from a sidecar: specs (with occlusion) + camera.
struct BenchSidecar {
  std::uint64_t seed = 0;
  PinholeIntrinsics cam;
  std::vector<PrimitiveSpec> primitives;
  std::vector<double> occlusion_fraction;
};

inline BenchSidecar load_sidecar(const std::string& path) {
  detail::ReportReader rd(path);
  BenchSidecar sc;
  std::vector<std::string> t;
  PrimitiveSpec* cur = nullptr;
  while (rd.next_line(t)) {
    if (t[0] == "seed" && t.size() == 2) {
      sc.seed = std::stoull(t[1]);
    } else if (t[0] == "camera" && t.size() == 6) {
      sc.cam.focal = rd.to_double(t[1]);
      sc.cam.cx = rd.to_double(t[2]);
      sc.cam.cy = rd.to_double(t[3]);
      sc.cam.width = static_cast<int>(rd.to_double(t[4]));
      sc.cam.height = static_cast<int>(rd.to_double(t[5]));
    } else if (t[0] == "instance" && t.size() == 2) {
      sc.primitives.emplace_back();
      sc.occlusion_fraction.push_back(0.0);
      cur = &sc.primitives.back();
      cur->label = t[1];
    } else if (cur && t[0] == "shape" && t.size() == 2) {
      cur->shape = shape_from_name(t[1]);
    } else if (cur && t[0] == "canonical_size" && t.size() == 2) {
      cur->canonical_size = rd.to_double(t[1]);
    } else if (cur && t[0] == "point_budget" && t.size() == 2) {
      cur->point_budget = static_cast<int>(rd.to_double(t[1]));
    } else if (cur && t[0] == "occlusion" && t.size() == 2) {
      sc.occlusion_fraction.back() = rd.to_double(t[1]);
    } else if (cur && t[0] == "pose" && t.size() == 8) {
      cur->pose.t = Vec3(rd.to_double(t[1]), rd.to_double(t[2]), rd.to_double(t[3]));
      cur->pose.r = EulerRotation{rd.to_double(t[4]), rd.to_double(t[5]), rd.to_double(t[6])};
      cur->pose.s = rd.to_double(t[7]);
    } else {
      rd.fail("unrecognized line starting '" + t[0] + "'");
    }
  }
  require(sc.cam.focal > 0.0, path + ": missing camera line");
  return sc;
}

/// Per-instance metric block used by the evaluate command.
struct InstanceMetrics {
  std::string instance_id;
  double cd3d = 0.0;
  double cd2d = 0.0;
  double fscore3d = 0.0;
  double fscore2d = 0.0;
};

inline void save_metrics(const std::vector<InstanceMetrics>& rows,
                         const RecoveryReport* recovery, const std::string& path) {
  std::ostringstream out;
  detail::write_report_header(out, "metrics");
  double cd3 = 0.0, cd2 = 0.0, f3 = 0.0, f2 = 0.0;
  for (const InstanceMetrics& m : rows) {
    out << "instance " << m.instance_id << "\n";
    out << "  cd3d " << detail::fmt(m.cd3d) << "\n";
    out << "  cd2d " << detail::fmt(m.cd2d) << "\n";
    out << "  fscore3d " << detail::fmt(m.fscore3d) << "\n";
    out << "  fscore2d " << detail::fmt(m.fscore2d) << "\n";
    cd3 += m.cd3d;
    cd2 += m.cd2d;
    f3 += m.fscore3d;
    f2 += m.fscore2d;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    out << "aggregate " << rows.size() << "\n";
    out << "  mean_cd3d " << detail::fmt(cd3 / n) << "\n";
    out << "  mean_cd2d " << detail::fmt(cd2 / n) << "\n";
    out << "  mean_fscore3d " << detail::fmt(f3 / n) << "\n";
    out << "  mean_fscore2d " << detail::fmt(f2 / n) << "\n";
  }
  if (recovery) {
    for (const InstanceRecovery& r : recovery->instances) {
      out << "recovery " << r.label << "\n";
      if (r.missing) {
        out << "  missing 1\n";
        continue;
      }
      out << "  translation_frac " << detail::fmt(r.translation_frac) << "\n";
      if (!r.symmetric) out << "  rotation_deg " << detail::fmt(r.rotation_err_deg) << "\n";
      out << "  scale_rel " << detail::fmt(r.scale_rel_err) << "\n";
      out << "  success " << (r.success ? 1 : 0) << "\n";
    }
    out << "success_rate " << detail::fmt(recovery->success_rate) << "\n";
    out << "success_rate_asym " << detail::fmt(recovery->success_rate_asym) << "\n";
  }
  detail::atomic_write_text(path, out.str());
}

/// Optimization trace file: per-epoch end losses plus the chosen epoch.
/// Deterministic runs produce bit-identical traces.
inline void save_trace(const std::string& instance_id, const OptimizationTrace& trace,
                       const std::string& path) {
  std::ostringstream out;
  detail::write_report_header(out, "trace", false);
  out << "instance " << instance_id << "\n";
  out << "chosen_epoch " << trace.chosen_epoch << "\n";
  for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
    const EpochRecord& er = trace.epochs[e];
    if (er.failed) {
      out << "epoch " << e << " failed " << er.error << "\n";
      continue;
    }
    const IterationRecord& last = er.iters.back();
    out << "epoch " << e << " " << detail::fmt(last.loss3d) << " "
        << detail::fmt(last.loss2d) << " " << detail::fmt(last.total) << " "
        << last.excluded << "\n";
  }
  detail::atomic_write_text(path, out.str());
}

}  // namespace scenefit
