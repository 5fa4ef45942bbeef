#pragma once

#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "wbs/dataset.hpp"
#include "wbs/geometry.hpp"
#include "wbs/matchcost.hpp"
#include "wbs/metrics.hpp"
#include "wbs/net.hpp"
#include "wbs/render.hpp"
#include "wbs/stereo.hpp"

namespace wbs::evalbench {

using Logger = std::function<void(const std::string&)>;

struct RigConfig {
  double distance = 2.0;
  geometry::Intrinsics intrinsics;  // 320x240, f = 300
};

struct SceneCase {
  std::string name;
  render::SceneSpec scene;
  double thetaDeg = 20.0;
  double scale = 1.0;  // image scale relative to the rig intrinsics
};

// Everything a benchmark cell needs for one scene at one baseline.
struct PreparedCase {
  SceneCase spec;
  geometry::CameraModel camL, camR;
  ImageBuffer imageL, imageR;             // 8-bit quantised renders
  SemanticMask maskL, maskR;              // renderer foreground masks, original frames
  geometry::RectifiedStereoPair pair;     // disparity range from ground truth +-10%
  std::pair<double, double> depthRange;   // the widened ground-truth range
  stereo::MaskPair masks;                 // maskL/maskR warped into the rectified frame
  DepthMap gtDepth;                       // foreground depth, rectified left camera
  SemanticMask gtMask;                    // foreground, rectified left camera
  Grid<float> gtDisparityLeft, gtDisparityRight;  // pixel disparity of the first hit, NaN if none
};

// Renders both views, quantises them as an 8-bit camera would, rectifies,
// and renders ground truth directly from the rectified cameras.
PreparedCase prepare_case(const SceneCase& sc, const RigConfig& rig, Backend backend = Backend::Parallel);

// Image quantisation used by prepare_case and by PNG round trips.
ImageBuffer quantize8(const ImageBuffer& image);

// Widened [zMin, zMax] of the valid foreground depths: zMin*0.9, zMax*1.1.
std::pair<double, double> padded_depth_range(const DepthMap& depth, const SemanticMask& mask);

matchcost::GroundTruthScorer oracle_scorer(const PreparedCase& pc);

struct MatcherEntry {
  std::string label;
  matchcost::MatcherSpec spec;
};

struct BenchmarkSuite {
  std::vector<SceneCase> scenes;
  std::vector<MatcherEntry> matchers;
  std::vector<stereo::ConstraintConfig> constraintVariants = {stereo::ConstraintConfig{}};
  std::vector<bool> poolingVariants = {true};  // applies to learned matchers
  std::filesystem::path outputDir;
  RigConfig rig;
  bool writePly = true;

  void validate() const;
};

struct CellResult {
  std::string id;
  std::string scene;
  double thetaDeg = 0.0;
  double scale = 1.0;
  std::string matcher;
  bool pooling = false;
  stereo::ConstraintConfig constraint;
  metrics::DepthErrorReport report;
};

struct SuiteResult {
  std::vector<CellResult> cells;
  std::string table;

  // First cell matching all given fields; throws InvalidArgument if absent.
  const CellResult& find(const std::string& scene, const std::string& matcher, bool pooling,
                         bool constrained) const;
};

// Runs every scene x matcher x pooling x constraint cell. Writes
// outputDir/{tables,depth,ply}: per-cell depth PFM, colour-mapped PNG, PLY
// and report JSON, per-scene ground truth, plus results.json/results.txt.
SuiteResult run_suite(const BenchmarkSuite& suite, Backend backend = Backend::Parallel, const Logger& log = {});

// Suite config JSON (schema in README). Learned matchers load their weights.
BenchmarkSuite suite_from_json(const nlohmann::json& j);
nlohmann::ordered_json suite_to_json(const BenchmarkSuite& suite);
nlohmann::ordered_json cell_to_json(const CellResult& cell);

// Test scene family helpers. Seeds come from named substreams so training
// and test scenes never coincide.
std::vector<SceneCase> scene_family(std::uint64_t seed, const std::string& stream, int count,
                                    render::Difficulty difficulty, render::TextureFamily family,
                                    const std::vector<double>& thetas, const std::vector<double>& scales = {1.0});

struct TrainSetConfig {
  int sceneCount = 8;
  std::vector<double> thetas = {10.0, 20.0, 30.0, 40.0};
  std::size_t samples = 200000;
  std::uint64_t seed = 42;
  std::string stream = "train";
  render::TextureFamily family = render::TextureFamily::Standard;
  render::SurfaceSelect surface = render::SurfaceSelect::Foreground;
  // Alternate plain and cluttered backgrounds when unset.
  std::optional<render::Difficulty> difficulty;
  RigConfig rig;
};

// Balanced patch dataset spread evenly over scenes x baselines.
dataset::PatchDataset build_training_set(const TrainSetConfig& cfg, Backend backend = Backend::Parallel,
                                         const Logger& log = {});

enum class TrainVariant { SceneMatched, TextureMismatched, NoAugmentation };
const char* to_string(TrainVariant v);

// Planar, narrow-baseline background patches standing in for a generic
// driving-style training set.
TrainSetConfig texture_mismatched_config(const TrainSetConfig& base);

struct DomainShiftConfig {
  TrainSetConfig trainSet;
  net::TrainConfig trainer;
  std::vector<SceneCase> tests;
  RigConfig rig;
  std::filesystem::path outputDir;
};

// Four held-out mismatched-texture scenes at 20 degrees, rendered at x0.75
// and x1.5.
DomainShiftConfig default_domain_shift(std::uint64_t seed);

struct DomainShiftReport {
  TrainVariant variant = TrainVariant::SceneMatched;
  std::vector<net::EpochLog> log;
  std::vector<CellResult> cells;
  double meanRmse = 0.0;
};

// Trains the variant's network (unless `pretrained` is given) and evaluates
// the pooled learned matcher on cfg.tests without the constraint.
DomainShiftReport domain_shift_experiment(TrainVariant variant, const DomainShiftConfig& cfg,
                                          Backend backend = Backend::Parallel,
                                          const net::SiameseNetwork* pretrained = nullptr,
                                          const Logger& log = {});

}  // namespace wbs::evalbench
