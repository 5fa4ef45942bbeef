#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace wbs::cli {

struct Global {
  std::uint64_t seed = 42;
  int threads = 0;
  std::filesystem::path out = "out";
};

struct GenScenesArgs {
  int count = 4;
  std::string stream = "test";
  std::string family = "standard";
  std::string difficulty = "cluttered";
  std::vector<double> thetas = {20.0, 40.0};
  std::vector<double> scales = {1.0};
};

struct GenPatchesArgs {
  std::size_t samples = 200000;
  int scenes = 8;
  std::vector<double> thetas = {10.0, 20.0, 30.0, 40.0};
  std::string variant = "scene-matched";
  std::string stream = "train";
  std::string output = "patches.s2p2";
};

struct TrainArgs {
  std::string dataset;
  std::string validation;
  int epochs = 15;
  double lr = 3e-3;
  double momentum = 0.9;
  double weightDecay = 1e-4;
  int batch = 128;
  bool noAugment = false;
};

struct InferArgs {
  std::string left, right, calib, weights;
  std::string maskLeft, maskRight;
  std::string matcher = "learned";
  double sigma = 10.0;
  std::string mode = "weight";
  std::string pooling = "on";
  std::string drange;
};

struct EvalArgs {
  std::string pred, gt, mask;
};

struct BenchArgs {
  std::string config;
  bool domainShift = false;
  std::string variant = "all";
  std::size_t samples = 200000;
  int epochs = 15;
};

struct ExportPlyArgs {
  std::string depth, calib, image;
};

// Each returns the process exit code; library errors propagate as
// wbs::Error and are mapped by the caller.
int gen_scenes(const Global& g, const GenScenesArgs& a);
int gen_patches(const Global& g, const GenPatchesArgs& a);
int train(const Global& g, const TrainArgs& a);
int infer(const Global& g, const InferArgs& a);
int eval(const Global& g, const EvalArgs& a);
int bench(const Global& g, const BenchArgs& a, bool outExplicit);
int export_ply(const Global& g, const ExportPlyArgs& a);

}  // namespace wbs::cli
