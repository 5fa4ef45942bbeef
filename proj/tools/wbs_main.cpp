#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "wbs/error.hpp"
#include "wbs/parallel.hpp"

namespace {

int exit_code(wbs::ErrorKind kind) {
  using wbs::ErrorKind;
  switch (kind) {
    case ErrorKind::ShapeMismatch:
    case ErrorKind::MaskSizeMismatch:
      return 3;
    case ErrorKind::Invariant:
      return 4;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace wbs::cli;
  CLI::App app{"Wide-baseline stereo: synthetic data, Siamese matcher training, reconstruction and benchmarks"};
  app.require_subcommand(1, 1);

  Global g;
  std::string out = g.out.string();
  app.add_option("--seed", g.seed, "Root seed for all random streams")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = auto)")->capture_default_str()->check(CLI::NonNegativeNumber);
  auto* outOpt = app.add_option("--out", out, "Output directory")->capture_default_str();

  GenScenesArgs gs;
  auto* cGen = app.add_subcommand("gen-scenes", "Render test scenes with calibration and ground truth");
  cGen->add_option("--count", gs.count)->capture_default_str()->check(CLI::PositiveNumber);
  cGen->add_option("--stream", gs.stream, "Seed substream name")->capture_default_str();
  cGen->add_option("--family", gs.family)->capture_default_str()->check(CLI::IsMember({"standard", "mismatched"}));
  cGen->add_option("--difficulty", gs.difficulty)->capture_default_str()->check(CLI::IsMember({"plain", "cluttered"}));
  cGen->add_option("--theta", gs.thetas, "Baseline angles in degrees")->capture_default_str()->delimiter(',');
  cGen->add_option("--scale", gs.scales, "Image scales")->capture_default_str()->delimiter(',');

  GenPatchesArgs gp;
  auto* cPatch = app.add_subcommand("gen-patches", "Build a balanced stereo patch dataset");
  cPatch->add_option("--samples", gp.samples)->capture_default_str();
  cPatch->add_option("--scenes", gp.scenes)->capture_default_str()->check(CLI::PositiveNumber);
  cPatch->add_option("--theta", gp.thetas)->capture_default_str()->delimiter(',');
  cPatch->add_option("--variant", gp.variant)->capture_default_str()->check(
      CLI::IsMember({"scene-matched", "texture-mismatched"}));
  cPatch->add_option("--stream", gp.stream)->capture_default_str();
  cPatch->add_option("--output", gp.output, "File name under --out")->capture_default_str();

  TrainArgs tr;
  auto* cTrain = app.add_subcommand("train", "Train the Siamese matcher");
  cTrain->add_option("--dataset", tr.dataset)->required();
  cTrain->add_option("--validation", tr.validation, "Optional held-out dataset");
  cTrain->add_option("--epochs", tr.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  cTrain->add_option("--lr", tr.lr)->capture_default_str()->check(CLI::PositiveNumber);
  cTrain->add_option("--momentum", tr.momentum)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  cTrain->add_option("--wd", tr.weightDecay)->capture_default_str()->check(CLI::NonNegativeNumber);
  cTrain->add_option("--batch", tr.batch)->capture_default_str()->check(CLI::PositiveNumber);
  cTrain->add_flag("--no-augment", tr.noAugment);

  InferArgs in;
  auto* cInfer = app.add_subcommand("infer", "Reconstruct depth from a calibrated image pair");
  cInfer->add_option("--left", in.left)->required();
  cInfer->add_option("--right", in.right)->required();
  cInfer->add_option("--calib", in.calib)->required();
  cInfer->add_option("--weights", in.weights);
  cInfer->add_option("--matcher", in.matcher)->capture_default_str()->check(CLI::IsMember({"learned", "ncc", "sad"}));
  cInfer->add_option("--mask-left", in.maskLeft);
  cInfer->add_option("--mask-right", in.maskRight);
  cInfer->add_option("--sigma", in.sigma)->capture_default_str();
  cInfer->add_option("--constraint-mode", in.mode)->capture_default_str()->check(CLI::IsMember({"weight", "restrict"}));
  cInfer->add_option("--pooling", in.pooling)->capture_default_str()->check(CLI::IsMember({"on", "off"}));
  cInfer->add_option("--drange", in.drange, "Disparity range min:max (overrides the calibration depth range)");

  EvalArgs ev;
  auto* cEval = app.add_subcommand("eval", "Foreground depth error metrics as JSON");
  cEval->add_option("--pred", ev.pred)->required();
  cEval->add_option("--gt", ev.gt)->required();
  cEval->add_option("--mask", ev.mask)->required();

  BenchArgs bn;
  auto* cBench = app.add_subcommand("bench", "Run a benchmark suite or the domain-shift experiment");
  cBench->add_option("--config", bn.config, "Suite config JSON");
  cBench->add_flag("--domain-shift", bn.domainShift);
  cBench->add_option("--variant", bn.variant)->capture_default_str()->check(
      CLI::IsMember({"all", "scene-matched", "texture-mismatched", "no-augmentation"}));
  cBench->add_option("--samples", bn.samples)->capture_default_str();
  cBench->add_option("--epochs", bn.epochs)->capture_default_str()->check(CLI::PositiveNumber);

  ExportPlyArgs ep;
  auto* cPly = app.add_subcommand("export-ply", "Write a coloured point cloud from a depth map");
  cPly->add_option("--depth", ep.depth)->required();
  cPly->add_option("--calib", ep.calib)->required();
  cPly->add_option("--image", ep.image, "Original left image for colours");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  g.out = out;

  try {
    wbs::set_thread_count(g.threads);
    if (*cGen) return gen_scenes(g, gs);
    if (*cPatch) return gen_patches(g, gp);
    if (*cTrain) return train(g, tr);
    if (*cInfer) return infer(g, in);
    if (*cEval) return eval(g, ev);
    if (*cBench) return bench(g, bn, outOpt->count() > 0);
    if (*cPly) return export_ply(g, ep);
  } catch (const wbs::Error& e) {
    std::cerr << "error (" << wbs::to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
