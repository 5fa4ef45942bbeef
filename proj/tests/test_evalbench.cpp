#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "wbs/error.hpp"
#include "wbs/evalbench.hpp"
#include "wbs/io.hpp"

using namespace wbs;
using namespace wbs::evalbench;
namespace fs = std::filesystem;

namespace {

SceneCase small_case(std::uint64_t seed, double theta, double scale = 0.5) {
  return {"s" + std::to_string(seed),
          render::generate_scene(seed, render::Difficulty::ClutteredBackground, render::TextureFamily::Standard),
          theta, scale};
}

const PreparedCase& prepared() {
  static const PreparedCase pc = prepare_case(small_case(77, 30.0), RigConfig{});
  return pc;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "wbs_test_evalbench" / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Quantize, LevelsAndIdempotence) {
  ImageBuffer img(4, 1, 1);
  img.samples = {-0.2f, 0.1f, 0.50001f, 1.7f};
  const auto q = quantize8(img);
  for (float s : q.samples) {
    const float level = s * 255.0f;
    EXPECT_NEAR(level, std::round(level), 1e-4);
  }
  EXPECT_EQ(q.samples.front(), 0.0f);
  EXPECT_EQ(q.samples.back(), 1.0f);
  EXPECT_EQ(quantize8(q).samples, q.samples);
}

TEST(DepthRange, PaddedOverMaskedValidDepth) {
  DepthMap d(3, 1);
  d.values = {2.0f, 4.0f, 100.0f};
  SemanticMask m(3, 1);
  m.values = {1, 1, 0};
  const auto [lo, hi] = padded_depth_range(d, m);
  EXPECT_NEAR(lo, 1.8, 1e-12);
  EXPECT_NEAR(hi, 4.4, 1e-12);
}

TEST(PrepareCase, Invariants) {
  const auto& pc = prepared();
  EXPECT_EQ(pc.imageL.width, 160);
  EXPECT_EQ(pc.imageL.height, 120);
  EXPECT_EQ(quantize8(pc.imageL).samples, pc.imageL.samples);
  const int w = pc.pair.width(), h = pc.pair.height();
  ASSERT_EQ(pc.gtDepth.width, w);
  ASSERT_EQ(pc.masks.left.width, w);
  ASSERT_EQ(pc.masks.right.height, h);
  ASSERT_LT(pc.pair.dMin, pc.pair.dMax);
  std::size_t fg = 0, inRange = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!pc.gtMask.at(x, y)) continue;
      ++fg;
      const float z = pc.gtDepth.at(x, y);
      ASSERT_TRUE(std::isfinite(z));
      EXPECT_GE(z, pc.depthRange.first);
      EXPECT_LE(z, pc.depthRange.second);
      const float d = pc.gtDisparityLeft.at(x, y);
      ASSERT_FALSE(std::isnan(d));
      // Foreground pixel disparity and depth agree through the rectified rig.
      EXPECT_NEAR(pc.pair.rig.f * pc.pair.rig.B / (d + pc.pair.rig.doffs), z, 1e-3 * z);
      if (d >= pc.pair.dMin && d <= pc.pair.dMax) ++inRange;
    }
  }
  ASSERT_GT(fg, 500u);
  EXPECT_EQ(inRange, fg);
}

TEST(PrepareCase, Deterministic) {
  const auto again = prepare_case(small_case(77, 30.0), RigConfig{}, Backend::Serial);
  EXPECT_EQ(again.pair.left.samples, prepared().pair.left.samples);
  EXPECT_EQ(again.gtDepth.values, prepared().gtDepth.values);
  EXPECT_EQ(again.masks.right.values, prepared().masks.right.values);
}

TEST(CombineVolumes, MatchesBuildCostVolume) {
  const auto& pc = prepared();
  auto spec = matchcost::MatcherSpec::ncc();
  spec.patchSizes = {9, 19};
  spec.pooling = true;
  stereo::ConstraintConfig cc;
  cc.enabled = true;
  cc.sigma = 3.0;
  const auto perSize = stereo::scale_volumes(pc.pair, spec);
  ASSERT_EQ(perSize.size(), 2u);
  const auto combined = stereo::combine_volumes(perSize, &pc.masks, cc);
  const auto left = stereo::build_cost_volume(pc.pair, spec, matchcost::View::Left, &pc.masks, cc);
  const auto right = stereo::build_cost_volume(pc.pair, spec, matchcost::View::Right, &pc.masks, cc);
  EXPECT_EQ(combined.left.scores, left.scores);
  EXPECT_EQ(combined.right.scores, right.scores);
}

TEST(Suite, ArtifactsAndRepeatability) {
  BenchmarkSuite suite;
  suite.scenes = {small_case(5, 20.0)};
  suite.matchers = {{"ncc", matchcost::MatcherSpec::ncc()}};
  stereo::ConstraintConfig on;
  on.enabled = true;
  suite.constraintVariants = {stereo::ConstraintConfig{}, on};
  suite.outputDir = fresh_dir("a");
  const auto first = run_suite(suite);
  ASSERT_EQ(first.cells.size(), 2u);
  const auto& plain = first.find("s5", "ncc", false, false);
  const auto& constrained = first.find("s5", "ncc", false, true);
  EXPECT_FALSE(plain.constraint.enabled);
  EXPECT_TRUE(constrained.constraint.enabled);
  EXPECT_THROW(first.find("s5", "sad", false, false), Error);
  for (const auto& c : first.cells) {
    EXPECT_GT(c.report.count, 0u);
    EXPECT_TRUE(fs::exists(suite.outputDir / "depth" / (c.id + ".pfm")));
    EXPECT_TRUE(fs::exists(suite.outputDir / "depth" / (c.id + ".png")));
    EXPECT_TRUE(fs::exists(suite.outputDir / "ply" / (c.id + ".ply")));
    EXPECT_TRUE(fs::exists(suite.outputDir / "tables" / (c.id + ".json")));
  }
  EXPECT_TRUE(fs::exists(suite.outputDir / "depth" / "s5_gt.pfm"));
  EXPECT_FALSE(first.table.empty());

  const fs::path firstDir = suite.outputDir;
  suite.outputDir = fresh_dir("b");
  const auto second = run_suite(suite, Backend::Serial);
  EXPECT_EQ(io::read_file(firstDir / "tables" / "results.txt"), io::read_file(suite.outputDir / "tables" / "results.txt"));
  for (const auto& c : first.cells) {
    EXPECT_EQ(io::read_file(firstDir / "depth" / (c.id + ".pfm")),
              io::read_file(suite.outputDir / "depth" / (c.id + ".pfm")));
  }
  // Persisted depth reproduces the reported metrics.
  const auto depth = io::read_pfm(firstDir / "depth" / (plain.id + ".pfm"));
  const auto gt = io::read_pfm(firstDir / "depth" / "s5_gt.pfm");
  const auto mask = io::read_mask_pgm(firstDir / "depth" / "s5_gtmask.pgm");
  EXPECT_EQ(metrics::evaluate(depth, gt, mask).rmse, plain.report.rmse);
}

TEST(Suite, NoOutputDirWritesNothing) {
  BenchmarkSuite suite;
  suite.scenes = {small_case(6, 20.0, 0.25)};
  suite.matchers = {{"sad", matchcost::MatcherSpec::sad()}};
  const auto r = run_suite(suite);
  EXPECT_EQ(r.cells.size(), 1u);
}

TEST(SuiteConfig, ParsesAndValidates) {
  const auto j = nlohmann::json::parse(R"({
    "outputDir": "out",
    "rig": {"distance": 2.0},
    "scenes": [{"seed": 3, "difficulty": "plain", "thetas": [20, 40], "scales": [0.5]}],
    "sceneFamily": {"seed": 9, "stream": "test", "count": 2, "thetas": [30]},
    "matchers": [{"kind": "ncc", "label": "n"}, {"kind": "sad", "patchSizes": [9, 19], "pooling": false}],
    "constraintVariants": [{"enabled": false}, {"enabled": true, "sigma": 5}]
  })");
  const auto s = suite_from_json(j);
  ASSERT_EQ(s.scenes.size(), 4u);
  EXPECT_EQ(s.scenes[0].thetaDeg, 30.0);
  EXPECT_EQ(s.scenes[2].scale, 0.5);
  EXPECT_EQ(s.scenes[3].thetaDeg, 40.0);
  ASSERT_EQ(s.matchers.size(), 2u);
  EXPECT_EQ(s.matchers[0].label, "n");
  EXPECT_EQ(s.matchers[1].label, "sad");
  EXPECT_FALSE(s.matchers[1].spec.pooling);
  ASSERT_EQ(s.constraintVariants.size(), 2u);
  EXPECT_EQ(s.constraintVariants[1].sigma, 5.0);
  EXPECT_EQ(s.outputDir, fs::path("out"));

  auto bad = j;
  bad.erase("matchers");
  EXPECT_THROW(suite_from_json(bad), Error);
  bad = j;
  bad["matchers"] = nlohmann::json::parse(R"([{"kind":"learned"}])");
  try {
    suite_from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingWeights);
  }
}

TEST(SceneFamily, StreamsAreDisjoint) {
  const auto a = scene_family(42, "train", 6, render::Difficulty::PlainBackground, render::TextureFamily::Standard, {20.0});
  const auto b = scene_family(42, "test", 6, render::Difficulty::PlainBackground, render::TextureFamily::Standard, {20.0});
  ASSERT_EQ(a.size(), 6u);
  for (const auto& x : a) {
    for (const auto& y : b) EXPECT_FALSE(x.scene == y.scene);
  }
  const auto c = scene_family(42, "test", 2, render::Difficulty::PlainBackground, render::TextureFamily::Standard,
                              {20.0, 40.0}, {1.0, 0.5});
  EXPECT_EQ(c.size(), 8u);
}
