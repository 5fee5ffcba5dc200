// Scratch micro-benchmark: per-iteration cost breakdown of the layout loss.
#include <chrono>
#include <cstdio>
#include <vector>

#include "scenefit/camera.hpp"
#include "scenefit/optimizer.hpp"
#include "scenefit/synth.hpp"

using namespace scenefit;

static PointCloud extract(const Pointmap& pm, const InstanceMask& mask) {
  PointCloud out;
  for (std::size_t i = 0; i < pm.points.size(); ++i)
    if (mask.bits[i] && pm.valid[i]) out.points.push_back(pm.points[i]);
  return out;
}

int main(int argc, char** argv) {
  BenchSceneConfig cfg;
  if (argc > 3) {
    cfg.width = std::atoi(argv[1]);
    cfg.height = std::atoi(argv[2]);
    cfg.focal = std::atof(argv[3]);
  }
  const int n_model = argc > 4 ? std::atoi(argv[4]) : cfg.point_budget;
  SyntheticScene scene = generate_scene(cfg, 11);
  int pick = -1;
  for (std::size_t k = 0; k < scene.primitives.size(); ++k)
    if (scene.primitives[k].shape == ShapeKind::l_bracket &&
        (pick < 0 || scene.masks[k].count() > scene.masks[pick].count()))
      pick = static_cast<int>(k);
  if (pick < 0) pick = 0;
  PointCloud model = sample_surface(scene.primitives[pick], n_model, 77 + pick);
  const Pointmap pm = backproject_depth(scene.depth, scene.cam);
  PointCloud target = extract(pm, scene.masks[pick]);
  std::printf("model=%zu target=%zu\n", model.size(), target.size());

  const LossWeights w{1.0, 0.05};
  LayoutLoss loss(model, target, scene.cam, w, OptimizeMode::full);

  OptimizerConfig ocfg;
  ocfg.epochs = 1;
  ocfg.iters_per_epoch = 2000;
  ocfg.phase1_iters = 1200;

  // Record a real trajectory.
  std::vector<LayoutParams> traj;
  traj.reserve(2000);
  {
    LayoutParams p;
    p.s = std::max(bounds(target).max_extent() / bounds(model).max_extent(), 1e-4);
    p.t = centroid(target) - p.s * (rotation_matrix(p.r) * centroid(model));
    AdamState adam;
    for (int it = 0; it < ocfg.iters_per_epoch; ++it) {
      traj.push_back(p);
      Vec7 g;
      loss.evaluate(p, it >= ocfg.phase1_iters, &g);
      p = adam_step(adam, p, g, ocfg);
    }
  }

  using clk = std::chrono::steady_clock;
  auto time_ms = [](clk::time_point a, clk::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  {  // full evaluate (capture + gradient)
    const auto t0 = clk::now();
    double acc = 0.0;
    for (std::size_t it = 0; it < traj.size(); ++it) {
      Vec7 g;
      acc += loss.evaluate(traj[it], it >= 1200, &g).total;
    }
    const auto t1 = clk::now();
    std::printf("evaluate+grad : %.4f ms/iter (acc %.3f)\n", time_ms(t0, t1) / traj.size(), acc);
  }
  {  // capture only
    const auto t0 = clk::now();
    double acc = 0.0;
    for (std::size_t it = 0; it < traj.size(); ++it)
      acc += loss.capture(traj[it], it >= 1200).n_included;
    const auto t1 = clk::now();
    std::printf("capture only  : %.4f ms/iter (acc %.0f)\n", time_ms(t0, t1) / traj.size(), acc);
  }
  {  // frozen eval with gradient at fixed correspondences
    const FrozenCorrespondences fc = loss.capture(traj.back(), true);
    const auto t0 = clk::now();
    double acc = 0.0;
    for (std::size_t it = 0; it < traj.size(); ++it) {
      Vec7 g;
      acc += loss.frozen_eval(fc, traj[it], &g).total;
    }
    const auto t1 = clk::now();
    std::printf("frozen+grad   : %.4f ms/iter (acc %.3f)\n", time_ms(t0, t1) / traj.size(), acc);
  }
  return 0;
}
