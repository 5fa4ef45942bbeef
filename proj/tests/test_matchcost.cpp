#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "oracles.hpp"
#include "wbs/error.hpp"
#include "wbs/geometry.hpp"
#include "wbs/matchcost.hpp"
#include "wbs/render.hpp"

using namespace wbs;
using namespace wbs::matchcost;

namespace {

std::vector<float> random_patch(std::mt19937_64& rng, int n = 81) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

struct GrayPair {
  ImageBuffer left, right;
};

const GrayPair& rendered_pair() {
  static const GrayPair p = [] {
    const auto scene = render::generate_scene(41, render::Difficulty::ClutteredBackground);
    const auto [l, r] = geometry::build_rig(2.0, 20.0, geometry::Intrinsics{});
    const auto pair = geometry::rectify(l, r, render::render_view(scene, l).image,
                                        render::render_view(scene, r).image);
    return GrayPair{to_gray(pair.left), to_gray(pair.right)};
  }();
  return p;
}

std::shared_ptr<const net::SiameseNetwork> random_network(std::uint64_t seed) {
  return std::make_shared<const net::SiameseNetwork>(net::init<float>(seed));
}

}  // namespace

TEST(Ncc, Examples) {
  std::mt19937_64 rng(1);
  const auto a = random_patch(rng);
  std::vector<float> inv(a.size()), flat(a.size(), 0.3f);
  for (std::size_t i = 0; i < a.size(); ++i) inv[i] = 1.0f - a[i];
  EXPECT_NEAR(ncc_score(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ncc_score(a, inv), -1.0, 1e-6);
  EXPECT_EQ(ncc_score(flat, a), 0.0);
  EXPECT_EQ(ncc_score(a, flat), 0.0);
  std::vector<float> small(80);
  EXPECT_THROW(ncc_score(a, small), Error);
}

TEST(Ncc, PropertiesAgainstOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> gain(0.2f, 3.0f), offset(-1.0f, 1.0f);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_patch(rng), b = random_patch(rng);
    const double s = ncc_score(a, b);
    EXPECT_NEAR(s, oracle::ncc(a, b), 1e-9);
    EXPECT_EQ(s, ncc_score(b, a));
    std::vector<double> scaled(b.size());
    const double g = gain(rng), o = offset(rng);
    for (std::size_t k = 0; k < b.size(); ++k) scaled[k] = g * b[k] + o;
    // The affine copy is built in double to keep float rounding out of the comparison.
    std::vector<float> scaledF(scaled.begin(), scaled.end());
    EXPECT_NEAR(ncc_score(a, scaledF), s, 1e-6);
    EXPECT_TRUE(std::isfinite(s));
    EXPECT_LE(std::abs(s), 1.0);
  }
}

TEST(Ncc, AffineInvarianceExactInputs) {
  // Dyadic values make the affine copy exact in float.
  std::vector<float> a(81), b(81), c(81);
  for (int i = 0; i < 81; ++i) {
    a[i] = static_cast<float>((i * 37) % 64) / 64.0f;
    b[i] = static_cast<float>((i * 11 + 5) % 32) / 32.0f;
    c[i] = 2.0f * b[i] + 0.25f;
  }
  EXPECT_NEAR(ncc_score(a, c), ncc_score(a, b), 1e-9);
}

TEST(Sad, Examples) {
  std::vector<float> zero(81, 0.0f), one(81, 1.0f);
  std::mt19937_64 rng(3);
  const auto a = random_patch(rng), b = random_patch(rng);
  EXPECT_EQ(sad_score(a, a), 0.0);
  EXPECT_EQ(sad_score(zero, one), -1.0);
  double loop = 0;
  for (int i = 0; i < 81; ++i) loop += std::fabs(static_cast<double>(a[i]) - b[i]);
  EXPECT_NEAR(sad_score(a, b), -loop / 81, 1e-9);
}

TEST(Spec, Validation) {
  EXPECT_NO_THROW(MatcherSpec::ncc().validate());
  MatcherSpec bad = MatcherSpec::ncc();
  bad.patchSizes = {8};
  EXPECT_THROW(bad.validate(), Error);
  bad.patchSizes = {1};
  EXPECT_THROW(bad.validate(), Error);
  MatcherSpec noNet = MatcherSpec::learned(nullptr);
  try {
    noNet.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingWeights);
  }
  const auto learned = MatcherSpec::learned(random_network(1));
  EXPECT_EQ(learned.patchSizes, (std::vector<int>{9, 19, 35}));
  EXPECT_EQ(learned.effective_sizes().size(), 3u);
  const auto single = MatcherSpec::learned(random_network(1), false);
  EXPECT_EQ(single.effective_sizes(), std::vector<int>{9});
}

TEST(Extract, SizeNineIsExactWindow) {
  const auto& g = rendered_pair().left;
  const auto p = extract_resized(g, 100, 80, 9);
  for (int j = 0; j < 9; ++j)
    for (int i = 0; i < 9; ++i) EXPECT_EQ(p[j * 9 + i], g.at(96 + i, 76 + j));
  // Near the border the window clamps to the edge.
  const auto e = extract_resized(g, 0, 0, 9);
  EXPECT_EQ(e[0], g.at(0, 0));
  EXPECT_EQ(e[80], g.at(4, 4));
}

TEST(Extract, RampStaysRamp) {
  ImageBuffer ramp(100, 100, 1);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) ramp.at(x, y) = 0.002f * x + 0.003f * y + 0.1f;
  for (int size : {19, 35}) {
    const auto p = extract_resized(ramp, 50, 50, size);
    const double step = static_cast<double>(size) / 9.0;
    for (int j = 0; j < 9; ++j)
      for (int i = 0; i < 9; ++i) {
        // Sample i of the window sits at centre - half + (i + 0.5) * size / 9 - 0.5.
        const double x = 50 - size / 2 + (i + 0.5) * step - 0.5;
        const double y = 50 - size / 2 + (j + 0.5) * step - 0.5;
        EXPECT_NEAR(p[j * 9 + i], 0.002 * x + 0.003 * y + 0.1, 1e-6);
        EXPECT_NEAR(p[j * 9 + i], oracle::bilinear(ramp, x, y), 1e-6);
      }
  }
}

TEST(Extract, ConstantImageAllScalesEqual) {
  ImageBuffer flat(60, 60, 1, 0.42f);
  const std::vector<int> sizes = {9, 19, 35};
  const auto ps = extract_multiscale(flat, 3, 57, sizes);
  ASSERT_EQ(ps.size(), 3u);
  for (const auto& p : ps)
    for (float v : p) EXPECT_EQ(v, 0.42f);
}

TEST(Pooling, SingleScaleEqualsForward) {
  const auto netp = random_network(2);
  const auto& g = rendered_pair();
  const auto spec = MatcherSpec::learned(netp, false);
  const auto pl = extract_resized(g.left, 150, 100, 9), pr = extract_resized(g.right, 140, 100, 9);
  EXPECT_EQ(pooled_score(*netp, g.left, g.right, 150, 100, 140, 100, spec), net::forward<float>(*netp, pl, pr));
}

TEST(Pooling, MeanOverScales) {
  const auto netp = random_network(3);
  const auto& g = rendered_pair();
  const auto spec = MatcherSpec::learned(netp);
  for (int x : {60, 160, 250}) {
    double sum = 0;
    for (int s : {9, 19, 35})
      sum += net::forward<float>(*netp, extract_resized(g.left, x, 120, s), extract_resized(g.right, x - 7, 120, s));
    EXPECT_NEAR(pooled_score(*netp, g.left, g.right, x, 120, x - 7, 120, spec), sum / 3, 1e-6);
  }
  ImageBuffer flat(80, 80, 1, 0.6f);
  const float pooled = pooled_score(*netp, flat, flat, 40, 40, 35, 40, spec);
  const float single = pooled_score(*netp, flat, flat, 40, 40, 35, 40, MatcherSpec::learned(netp, false));
  EXPECT_NEAR(pooled, single, 1e-7);
}

class FastScorer : public ::testing::TestWithParam<int> {};

TEST_P(FastScorer, MatchesDirectComputation) {
  const int size = GetParam();
  const auto& g = rendered_pair();
  const auto netp = random_network(4);
  std::mt19937_64 rng(size);
  std::uniform_int_distribution<int> ux(0, g.left.width - 1), uy(0, g.left.height - 1);
  for (auto spec : {MatcherSpec::ncc(), MatcherSpec::sad(), MatcherSpec::learned(netp)}) {
    const auto scorer = make_scorer(spec, size, g.left, g.right);
    for (int trial = 0; trial < 5; ++trial) {
      const int y = uy(rng);
      std::vector<int> xl(40), xr(40);
      for (int k = 0; k < 40; ++k) xl[k] = ux(rng), xr[k] = ux(rng);
      for (View view : {View::Left, View::Right}) {
        std::vector<float> out(40);
        scorer->score(y, xl, xr, view, out);
        for (int k = 0; k < 40; ++k) {
          const auto a = extract_resized(g.left, xl[k], y, size), b = extract_resized(g.right, xr[k], y, size);
          double expect = 0;
          switch (spec.kind) {
            case MatcherKind::Ncc: expect = 0.5 * (1.0 + ncc_score(a, b)); break;
            case MatcherKind::Sad: expect = 1.0 + sad_score(a, b); break;
            case MatcherKind::Learned: expect = oracle::net_forward<float>(*netp, a, b); break;
          }
          ASSERT_NEAR(out[k], expect, 2e-5) << to_string(spec.kind) << " x=" << xl[k] << "," << xr[k];
          ASSERT_GE(out[k], 0.0f);
          ASSERT_LE(out[k], 1.0f);
        }
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, FastScorer, ::testing::Values(9, 19, 35));

TEST(FastScorer, SerialMatchesParallel) {
  const auto& g = rendered_pair();
  const auto spec = MatcherSpec::learned(random_network(5));
  const auto a = make_scorer(spec, 19, g.left, g.right, Backend::Serial);
  const auto b = make_scorer(spec, 19, g.left, g.right, Backend::Parallel);
  std::vector<int> xl(300), xr(300);
  for (int k = 0; k < 300; ++k) xl[k] = k % g.left.width, xr[k] = (k * 7) % g.left.width;
  std::vector<float> oa(300), ob(300);
  a->score(50, xl, xr, View::Left, oa);
  b->score(50, xl, xr, View::Left, ob);
  EXPECT_EQ(oa, ob);
}

TEST(GroundTruth, ScoresPeakAtTruth) {
  Grid<float> dl(10, 1, 3.0f), dr(10, 1, 3.0f);
  dl.at(0, 0) = std::numeric_limits<float>::quiet_NaN();
  const GroundTruthScorer s(dl, dr);
  const std::vector<int> xl = {5, 5, 5, 0}, xr = {2, 3, 1, 0};
  std::vector<float> out(4);
  s.score(0, xl, xr, View::Left, out);
  EXPECT_EQ(out[0], 1.0f);
  EXPECT_EQ(out[1], 0.5f);
  EXPECT_EQ(out[2], 0.5f);
  EXPECT_EQ(out[3], 0.0f);
}
