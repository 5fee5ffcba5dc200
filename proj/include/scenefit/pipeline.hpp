#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenefit/camera.hpp"
#include "scenefit/chamfer.hpp"
#include "scenefit/error.hpp"
#include "scenefit/image_io.hpp"
#include "scenefit/manifest.hpp"
#include "scenefit/optimizer.hpp"
#include "scenefit/ply_io.hpp"
#include "scenefit/reports.hpp"
#include "scenefit/selection.hpp"
#include "scenefit/synth.hpp"

namespace scenefit {

/// Stable exit-code contract shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 1,      // input or validation failure
  kExitNumerical = 2,  // internal numerical failure
};

struct PipelineOptions {
  OptimizeMode mode = OptimizeMode::full;
  bool no_selection = false;
  std::uint64_t seed = 0;
  int epochs = 20;
  double lambda1 = 1.0;
  double lambda2 = 5e-2;
  int jobs = 1;
};

namespace detail {

/// Loads the manifest's geometry source as a pointmap plus intrinsics.
/// A depth source requires explicit intrinsics (back-projection needs the
/// focal length); a pointmap source estimates them when absent.
inline Pointmap load_geometry(const SceneManifest& m, PinholeIntrinsics& cam) {
  if (!m.depth_path.empty()) {
    require(m.has_intrinsics,
            m.depth_path + ": depth geometry requires explicit intrinsics");
    cam = m.intrinsics;
    return backproject_depth(load_depth_pfm(m.depth_path), cam);
  }
  Pointmap pm = load_pointmap_pfm(m.pointmap_path);
  cam = m.has_intrinsics ? m.intrinsics : estimate_focal(pm);
  return pm;
}

/// Runs fn(i) for i in [0, n) on `jobs` threads. Exceptions are captured per
/// index; outputs must be written to pre-sized slots so results are
/// independent of scheduling.
inline void parallel_for(std::size_t n, int jobs, std::vector<std::string>& errors,
                         const std::function<void(std::size_t)>& fn) {
  errors.assign(n, std::string());
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    });
  for (std::thread& t : pool) t.join();
}

inline std::uint64_t instance_seed(std::uint64_t base, const std::string& instance_id) {
  return splitmix64(base ^ fnv1a(instance_id));
}

}  // namespace detail

/// Selection stage: extract every confident instance's cloud and score its
/// candidates. Any per-instance failure is reported and turns the exit code
/// to kExitInput, but remaining instances still run.
inline int run_select(const std::string& manifest_path, const std::string& out_path,
                      const PipelineOptions& opts = {}) {
  const SceneManifest m = load_manifest(manifest_path);
  PinholeIntrinsics cam;
  const Pointmap pm = detail::load_geometry(m, cam);
  const std::vector<DetectionRecord> kept = filter_detections(m);
  if (kept.empty())
    std::cerr << "warning: no detections passed the confidence threshold\n";

  std::vector<SelectionReport> reports(kept.size());
  std::vector<std::string> errors;
  detail::parallel_for(kept.size(), opts.jobs, errors, [&](std::size_t i) {
    const DetectionRecord& rec = kept[i];
    const InstanceMask mask = load_mask_pgm(rec.mask_path);
    const PointCloud cloud = extract_instance_cloud(pm, mask);
    CandidateSet set;
    set.instance_id = rec.instance_id;
    for (std::size_t k = 0; k < rec.candidate_paths.size(); ++k)
      set.candidates.push_back(
          Candidate{static_cast<int>(k), load_point_cloud(rec.candidate_paths[k])});
    reports[i] = select_model(set, cloud);
  });

  std::vector<SelectionReport> done;
  int exit_code = kExitOk;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (errors[i].empty()) {
      done.push_back(reports[i]);
    } else {
      std::cerr << "instance " << kept[i].instance_id << ": " << errors[i] << "\n";
      exit_code = kExitInput;
    }
  }
  save_selection_reports(done, out_path);
  return exit_code;
}

/// Full per-scene pipeline: geometry, filtering, selection (or seeded
/// passthrough), per-instance layout optimization, and all output artifacts
/// (layout file, per-instance traces and clouds, assembled scene cloud).
inline int run_optimize(const std::string& manifest_path, const std::string& out_dir,
                        const PipelineOptions& opts = {}) {
  const SceneManifest m = load_manifest(manifest_path);
  PinholeIntrinsics cam;
  const Pointmap pm = detail::load_geometry(m, cam);
  const std::vector<DetectionRecord> kept = filter_detections(m);
  if (kept.empty())
    std::cerr << "warning: no detections passed the confidence threshold\n";
  std::filesystem::create_directories(out_dir);

  LossWeights weights;
  weights.lambda1 = opts.lambda1;
  weights.lambda2 = opts.lambda2;

  struct InstanceOutput {
    InstanceResult result;
    OptimizationTrace trace;
    PointCloud posed;
  };
  std::vector<InstanceOutput> outputs(kept.size());
  std::vector<std::string> errors;
  detail::parallel_for(kept.size(), opts.jobs, errors, [&](std::size_t i) {
    const DetectionRecord& rec = kept[i];
    const InstanceMask mask = load_mask_pgm(rec.mask_path);
    const PointCloud target = extract_instance_cloud(pm, mask);

    CandidateSet set;
    set.instance_id = rec.instance_id;
    for (std::size_t k = 0; k < rec.candidate_paths.size(); ++k)
      set.candidates.push_back(
          Candidate{static_cast<int>(k), load_point_cloud(rec.candidate_paths[k])});
    const std::uint64_t iseed = detail::instance_seed(opts.seed, rec.instance_id);
    const SelectionReport sel = opts.no_selection
                                    ? selection_ablation_passthrough(set, iseed)
                                    : select_model(set, target);
    const PointCloud& model = chosen_candidate(set, sel.chosen);

    OptimizerConfig ocfg;
    ocfg.epochs = opts.epochs;
    ocfg.seed = iseed;
    ocfg.mode = opts.mode;
    const OptimizeResult res = optimize_layout(model, target, cam, weights, ocfg);

    InstanceOutput& out = outputs[i];
    out.result.instance_id = rec.instance_id;
    out.result.label = rec.label;
    out.result.chosen = sel.chosen;
    out.result.params = res.params;
    out.posed = apply_transform(model, res.params);
    out.result.loss3d = chamfer_distance(out.posed, target);
    out.result.fscore3d = f_score(out.posed, target, 0.01);
    const PointCloud2 proj_model = project(out.posed, cam);
    const PointCloud2 proj_target = project(target, cam);
    out.result.loss2d = chamfer_distance(proj_model, proj_target);
    out.result.fscore2d = f_score(proj_model, proj_target, 1.0);
    out.trace = std::move(res.trace);
  });

  SceneLayout layout;
  layout.cam = cam;
  layout.seed = opts.seed;
  PointCloud assembled;
  bool any_ok = false;
  bool any_input_error = false;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "instance " << kept[i].instance_id << ": " << errors[i] << "\n";
      if (errors[i].find("epoch") == std::string::npos) any_input_error = true;
      continue;
    }
    any_ok = true;
    InstanceOutput& out = outputs[i];
    layout.instances.push_back(out.result);
    const std::string stem = out_dir + "/" + out.result.instance_id;
    save_trace(out.result.instance_id, out.trace, stem + ".trace.txt");
    save_point_cloud(out.posed, stem + ".ply");
    assembled.points.insert(assembled.points.end(), out.posed.points.begin(),
                            out.posed.points.end());
  }
  save_layout(layout, out_dir + "/layout.txt");
  if (!assembled.empty()) save_point_cloud(assembled, out_dir + "/scene.ply");
  if (!kept.empty() && !any_ok) return any_input_error ? kExitInput : kExitNumerical;
  return kExitOk;
}

/// Metrics stage: compare a layout file against a bench ground-truth sidecar.
/// Emits per-instance CD / F-Score blocks (3D in scene units, 2D in pixels)
/// plus the recovery report against the true poses.
inline int run_evaluate(const std::string& layout_path, const std::string& sidecar_path,
                        const std::string& out_path) {
  const SceneLayout layout = load_layout(layout_path);
  const BenchSidecar gt = load_sidecar(sidecar_path);
  const SyntheticScene scene = raycast_scene(gt.primitives, gt.cam, gt.seed);

  std::map<std::string, const InstanceResult*> by_label;
  for (const InstanceResult& r : layout.instances) by_label[r.label] = &r;

  bool mismatch = false;
  for (const PrimitiveSpec& spec : gt.primitives)
    if (!by_label.count(spec.label)) {
      std::cerr << "ground-truth instance missing from layout: " << spec.label << "\n";
      mismatch = true;
    }
  std::map<std::string, bool> known;
  for (const PrimitiveSpec& spec : gt.primitives) known[spec.label] = true;
  for (const InstanceResult& r : layout.instances)
    if (!known.count(r.label)) {
      std::cerr << "layout instance missing from ground truth: " << r.label << "\n";
      mismatch = true;
    }

  std::vector<InstanceMetrics> rows;
  std::map<std::string, LayoutParams> recovered;
  for (std::size_t k = 0; k < gt.primitives.size(); ++k) {
    const PrimitiveSpec& spec = gt.primitives[k];
    const auto it = by_label.find(spec.label);
    if (it == by_label.end()) continue;
    recovered[spec.label] = it->second->params;
    const PointCloud& canonical = scene.canonical_clouds[k];
    const PointCloud rec_cloud = apply_transform(canonical, it->second->params);
    const PointCloud gt_cloud = apply_transform(canonical, spec.pose);
    InstanceMetrics row;
    row.instance_id = it->second->instance_id;
    row.cd3d = chamfer_distance(rec_cloud, gt_cloud);
    row.fscore3d = f_score(rec_cloud, gt_cloud, 0.01);
    const PointCloud2 rec2 = project(rec_cloud, gt.cam);
    const PointCloud2 gt2 = project(gt_cloud, gt.cam);
    row.cd2d = chamfer_distance(rec2, gt2);
    row.fscore2d = f_score(rec2, gt2, 1.0);
    rows.push_back(row);
  }
  const RecoveryReport recovery = evaluate_recovery(scene, recovered);
  save_metrics(rows, &recovery, out_path);
  return mismatch ? kExitInput : kExitOk;
}

/// Parses a bench config file (JSON; every field optional, defaults as in
/// BenchSceneConfig).
inline BenchSceneConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), path + ": cannot open file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": malformed field (" + e.what() + ")");
  }
  BenchSceneConfig cfg;
  try {
    cfg.width = doc.value("width", cfg.width);
    cfg.height = doc.value("height", cfg.height);
    cfg.focal = doc.value("focal", cfg.focal);
    cfg.min_primitives = doc.value("min_primitives", cfg.min_primitives);
    cfg.max_primitives = doc.value("max_primitives", cfg.max_primitives);
    cfg.max_occlusion = doc.value("max_occlusion", cfg.max_occlusion);
    cfg.easy_occlusion = doc.value("easy_occlusion", cfg.easy_occlusion);
    cfg.min_visible_pixels = doc.value("min_visible_pixels", cfg.min_visible_pixels);
    cfg.scale_min = doc.value("scale_min", cfg.scale_min);
    cfg.scale_max = doc.value("scale_max", cfg.scale_max);
    cfg.depth_min = doc.value("depth_min", cfg.depth_min);
    cfg.depth_max = doc.value("depth_max", cfg.depth_max);
    cfg.min_extent_px = doc.value("min_extent_px", cfg.min_extent_px);
    cfg.elev_min_deg = doc.value("elev_min_deg", cfg.elev_min_deg);
    cfg.elev_max_deg = doc.value("elev_max_deg", cfg.elev_max_deg);
    cfg.bank_max_deg = doc.value("bank_max_deg", cfg.bank_max_deg);
    cfg.frac_bracket = doc.value("frac_bracket", cfg.frac_bracket);
    cfg.frac_box = doc.value("frac_box", cfg.frac_box);
    cfg.point_budget = doc.value("point_budget", cfg.point_budget);
    cfg.depth_noise_sigma = doc.value("depth_noise_sigma", cfg.depth_noise_sigma);
    cfg.candidates = doc.value("candidates", cfg.candidates);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": malformed field (" + e.what() + ")");
  }
  return cfg;
}

/// Synthesizes a complete on-disk scene job (manifest + depth PFM + mask
/// PGMs + candidate PLYs + ground-truth sidecar) consumable by run_select /
/// run_optimize unchanged. Outputs are byte-identical for a fixed seed.
inline int run_synth(const std::string& config_path, const std::string& out_dir,
                     std::uint64_t seed) {
  const BenchSceneConfig cfg =
      config_path.empty() ? BenchSceneConfig{} : load_bench_config(config_path);
  const SyntheticScene scene = generate_scene(cfg, seed);

  std::filesystem::create_directories(out_dir);
  std::filesystem::create_directories(out_dir + "/masks");
  std::filesystem::create_directories(out_dir + "/candidates");

  save_depth_pfm(scene.depth, out_dir + "/depth.pfm");
  nlohmann::json detections = nlohmann::json::array();
  for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
    const PrimitiveSpec& spec = scene.primitives[k];
    const InstanceMask& mask = scene.masks[k];
    save_mask_pgm(mask, out_dir + "/masks/" + spec.label + ".pgm");

    // bbox from the mask's tight pixel bounds (half-open on the max side)
    int min_u = mask.width, min_v = mask.height, max_u = -1, max_v = -1;
    for (int v = 0; v < mask.height; ++v)
      for (int u = 0; u < mask.width; ++u)
        if (mask.bits[mask.idx(u, v)]) {
          min_u = std::min(min_u, u);
          min_v = std::min(min_v, v);
          max_u = std::max(max_u, u);
          max_v = std::max(max_v, v);
        }
    require(max_u >= 0, spec.label + ": empty mask");

    const CandidateSet set = make_candidates(
        spec, cfg.candidates, splitmix64(seed ^ fnv1a(spec.label)));
    nlohmann::json cand_paths = nlohmann::json::array();
    for (const Candidate& c : set.candidates) {
      const std::string rel =
          "candidates/" + spec.label + "_" + std::to_string(c.index) + ".ply";
      save_point_cloud(c.cloud, out_dir + "/" + rel);
      cand_paths.push_back(rel);
    }

    detections.push_back({{"instance_id", spec.label},
                          {"label", spec.label},
                          {"confidence", 0.9},
                          {"bbox", {min_u, min_v, max_u + 1, max_v + 1}},
                          {"mask_path", "masks/" + spec.label + ".pgm"},
                          {"candidate_paths", cand_paths}});
  }

  const nlohmann::json manifest = {
      {"depth_path", "depth.pfm"},
      {"confidence_threshold", 0.5},
      {"intrinsics",
       {{"focal", scene.cam.focal}, {"cx", scene.cam.cx}, {"cy", scene.cam.cy}}},
      {"detections", detections}};
  detail::atomic_write_text(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  save_sidecar(scene, seed, out_dir + "/ground_truth.txt");
  return kExitOk;
}

}  // namespace scenefit
