// Command-line entry point: scene model selection, layout optimization,
// metric evaluation against synthetic ground truth, and benchmark synthesis.
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "scenefit/pipeline.hpp"
#include "scenefit/version.hpp"

namespace {

scenefit::PipelineOptions add_common(CLI::App* cmd, std::string& mode) {
  scenefit::PipelineOptions opts;
  cmd->add_option("--seed", opts.seed, "base RNG seed (per-instance seeds derive from it)")
      ->capture_default_str();
  cmd->add_option("--jobs", opts.jobs, "worker threads across instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--mode", mode, "loss terms: full, only3d, or only2d")
      ->check(CLI::IsMember({"full", "only3d", "only2d"}))
      ->capture_default_str();
  cmd->add_option("--epochs", opts.epochs, "optimizer restarts (min-loss epoch wins)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lambda1", opts.lambda1, "3D Chamfer term weight")
      ->capture_default_str();
  cmd->add_option("--lambda2", opts.lambda2, "2D Chamfer term weight")
      ->capture_default_str();
  cmd->add_flag("--no-selection", opts.no_selection,
                "replace Chamfer model selection with a seeded random pick (ablation)");
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image 3D scene composition: candidate selection and layout "
               "optimization against instance point clouds"};
  app.set_version_flag("--version", std::string(scenefit::kVersion));
  app.require_subcommand(1);

  std::string manifest, out, layout, truth, config;
  std::string mode = "full";

  CLI::App* sel = app.add_subcommand(
      "select", "score each instance's candidate models by normalized Chamfer distance");
  sel->add_option("manifest", manifest, "scene manifest JSON")->required();
  sel->add_option("-o,--output", out, "selection report path")->required();
  scenefit::PipelineOptions sel_opts = add_common(sel, mode);

  CLI::App* opt = app.add_subcommand(
      "optimize", "select models and optimize per-instance translation/rotation/scale");
  opt->add_option("manifest", manifest, "scene manifest JSON")->required();
  opt->add_option("-o,--output-dir", out, "output directory for layout, traces, clouds")
      ->required();
  scenefit::PipelineOptions opt_opts = add_common(opt, mode);

  CLI::App* eva = app.add_subcommand(
      "evaluate", "compare a layout against synthetic ground truth (CD, F-score, recovery)");
  eva->add_option("layout", layout, "layout report from optimize")->required();
  eva->add_option("truth", truth, "ground-truth sidecar from synth")->required();
  eva->add_option("-o,--output", out, "metrics report path")->required();

  CLI::App* syn = app.add_subcommand(
      "synth", "generate a synthetic benchmark scene job (manifest, depth, masks, candidates)");
  syn->add_option("-o,--output-dir", out, "output directory for the scene job")->required();
  std::uint64_t synth_seed = 0;
  syn->add_option("--seed", synth_seed, "scene seed")->capture_default_str();
  syn->add_option("--config", config, "bench config JSON (defaults when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sel->parsed()) {
      sel_opts.mode = scenefit::mode_from_name(mode);
      return scenefit::run_select(manifest, out, sel_opts);
    }
    if (opt->parsed()) {
      opt_opts.mode = scenefit::mode_from_name(mode);
      return scenefit::run_optimize(manifest, out, opt_opts);
    }
    if (eva->parsed()) return scenefit::run_evaluate(layout, truth, out);
    if (syn->parsed()) return scenefit::run_synth(config, out, synth_seed);
  } catch (const scenefit::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return scenefit::kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return scenefit::kExitNumerical;
  }
  return scenefit::kExitOk;
}
