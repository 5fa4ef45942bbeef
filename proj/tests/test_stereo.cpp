#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "wbs/error.hpp"
#include "wbs/evalbench.hpp"
#include "wbs/geometry.hpp"
#include "wbs/metrics.hpp"
#include "wbs/render.hpp"
#include "wbs/stereo.hpp"

using namespace wbs;
using namespace wbs::stereo;
using matchcost::MatcherSpec;

namespace {

const evalbench::PreparedCase& prepared() {
  static const evalbench::PreparedCase pc = [] {
    evalbench::SceneCase sc;
    sc.name = "stereo_test";
    sc.scene = render::generate_scene(1234, render::Difficulty::ClutteredBackground);
    sc.thetaDeg = 20.0;
    return evalbench::prepare_case(sc, evalbench::RigConfig{});
  }();
  return pc;
}

// A small crop of the prepared pair keeps volume tests quick.
geometry::RectifiedStereoPair cropped(int x0, int y0, int w, int h) {
  const auto& src = prepared().pair;
  auto crop = [&](const ImageBuffer& img) {
    ImageBuffer out(w, h, img.channels);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    return out;
  };
  geometry::RectifiedStereoPair p = src;
  p.left = crop(src.left);
  p.right = crop(src.right);
  for (auto* cam : {&p.rig.left, &p.rig.right}) {
    cam->cx -= x0;
    cam->cy -= y0;
    cam->width = w;
    cam->height = h;
  }
  return p;
}

MaskPair cropped_masks(int x0, int y0, int w, int h) {
  auto crop = [&](const SemanticMask& m) {
    SemanticMask out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(x, y) = m.at(x0 + x, y0 + y);
    return out;
  };
  return {crop(prepared().masks.left), crop(prepared().masks.right)};
}

DisparityMap constant_map(int w, int h, float d) {
  DisparityMap m(w, h);
  std::fill(m.values.begin(), m.values.end(), d);
  std::fill(m.valid.begin(), m.valid.end(), 1);
  return m;
}

Reconstruction oracle_reconstruction() {
  const auto& pc = prepared();
  const auto scorer = evalbench::oracle_scorer(pc);
  const int W = pc.pair.width(), H = pc.pair.height();
  const auto L = score_volume(scorer, W, H, pc.pair.dMin, pc.pair.dMax, View::Left);
  const auto R = score_volume(scorer, W, H, pc.pair.dMin, pc.pair.dMax, View::Right);
  return reconstruct_from_volumes(pc.pair, L, R);
}

}  // namespace

TEST(Constraint, SigmaWeightingExample) {
  CostVolume v(2, 1, 0, 1, View::Left);
  v.at(1, 0, 0) = 0.08f;  // candidate x=1, same label
  v.at(1, 0, 1) = 0.5f;   // candidate x=0, other label
  MaskPair m{SemanticMask(2, 1), SemanticMask(2, 1)};
  m.left.at(1, 0) = 1;
  m.right.at(1, 0) = 1;
  ConstraintConfig cc;
  cc.enabled = true;
  auto weighted = v;
  apply_constraint(weighted, m, cc);
  EXPECT_FLOAT_EQ(weighted.at(1, 0, 0), 0.8f);
  EXPECT_FLOAT_EQ(weighted.at(1, 0, 1), 0.5f);
  EXPECT_EQ(wta(weighted).at(1, 0), 0.0f);
  EXPECT_EQ(wta(v).at(1, 0), 1.0f);

  cc.mode = ConstraintMode::Restrict;
  auto restricted = v;
  apply_constraint(restricted, m, cc);
  EXPECT_EQ(restricted.at(1, 0, 0), 0.08f);
  EXPECT_EQ(restricted.at(1, 0, 1), std::numeric_limits<float>::lowest());
}

TEST(Constraint, ValidationAndMaskSize) {
  ConstraintConfig cc;
  cc.sigma = 0.5;
  EXPECT_THROW(cc.validate(), Error);
  cc.sigma = 10;
  cc.enabled = true;
  CostVolume v(4, 2, 0, 1, View::Left);
  MaskPair wrong{SemanticMask(3, 2), SemanticMask(4, 2)};
  try {
    apply_constraint(v, wrong, cc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MaskSizeMismatch);
  }
}

TEST(Constraint, NeutralSettingsLeaveVolumeUnchanged) {
  const auto pair = cropped(100, 90, 80, 40);
  const auto masks = cropped_masks(100, 90, 80, 40);
  const auto spec = MatcherSpec::ncc();
  const auto plain = build_cost_volume(pair, spec, View::Left, nullptr, ConstraintConfig{});
  ConstraintConfig off;
  off.enabled = false;
  EXPECT_EQ(build_cost_volume(pair, spec, View::Left, &masks, off).scores, plain.scores);
  ConstraintConfig unit;
  unit.enabled = true;
  unit.sigma = 1.0;
  EXPECT_EQ(build_cost_volume(pair, spec, View::Left, &masks, unit).scores, plain.scores);
  ConstraintConfig on;
  on.enabled = true;
  EXPECT_NE(build_cost_volume(pair, spec, View::Left, &masks, on).scores, plain.scores);
}

TEST(Volume, FastMatchesNaive) {
  const auto pair = cropped(120, 100, 48, 12);
  for (const auto& spec : {MatcherSpec::ncc(), MatcherSpec::sad()}) {
    for (View view : {View::Left, View::Right}) {
      const auto fast = build_cost_volume(pair, spec, view, nullptr, ConstraintConfig{});
      const auto slow = naive_volume(pair, spec, view);
      ASSERT_EQ(fast.scores.size(), slow.scores.size());
      for (std::size_t i = 0; i < fast.scores.size(); ++i) ASSERT_NEAR(fast.scores[i], slow.scores[i], 2e-6);
    }
  }
  auto net = std::make_shared<const net::SiameseNetwork>(net::init<float>(3));
  const auto learned = MatcherSpec::learned(net);
  const auto fast = build_cost_volume(pair, learned, View::Left, nullptr, ConstraintConfig{});
  const auto slow = naive_volume(pair, learned, View::Left);
  for (std::size_t i = 0; i < fast.scores.size(); ++i) ASSERT_NEAR(fast.scores[i], slow.scores[i], 2e-6);
}

TEST(Volume, EmptyRangeRejected) {
  auto pair = cropped(0, 0, 20, 10);
  pair.dMin = 5;
  pair.dMax = 4;
  try {
    build_cost_volume(pair, MatcherSpec::ncc(), View::Left, nullptr, ConstraintConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DisparityRangeEmpty);
  }
}

TEST(Volume, SerialMatchesParallelAndDeterministic) {
  const auto pair = cropped(90, 80, 100, 40);
  const auto masks = cropped_masks(90, 80, 100, 40);
  ConstraintConfig cc;
  cc.enabled = true;
  const auto a = build_cost_volumes(pair, MatcherSpec::ncc(), &masks, cc, Backend::Serial);
  const auto b = build_cost_volumes(pair, MatcherSpec::ncc(), &masks, cc, Backend::Parallel);
  const auto c = build_cost_volumes(pair, MatcherSpec::ncc(), &masks, cc, Backend::Parallel);
  EXPECT_EQ(a.left.scores, b.left.scores);
  EXPECT_EQ(a.right.scores, b.right.scores);
  EXPECT_EQ(b.left.scores, c.left.scores);
  const auto ra = reconstruct_from_volumes(pair, a.left, a.right, Backend::Serial);
  const auto rb = reconstruct_from_volumes(pair, b.left, b.right, Backend::Parallel);
  EXPECT_EQ(ra.disparity.values, rb.disparity.values);
  EXPECT_EQ(ra.disparity.valid, rb.disparity.valid);
  EXPECT_EQ(ra.depth.values, rb.depth.values);
}

TEST(Wta, Examples) {
  CostVolume peak(5, 3, 0, 12, View::Left);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) peak.at(x, y, 7) = 1.0f;
  const auto d = wta(peak);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) {
      EXPECT_EQ(d.at(x, y), 7.0f);
      EXPECT_TRUE(d.is_valid(x, y));
    }
  CostVolume flat(4, 2, -3, 5, View::Left);
  std::fill(flat.scores.begin(), flat.scores.end(), 0.25f);
  for (float v : wta(flat).values) EXPECT_EQ(v, -3.0f);
}

TEST(Wta, MatchesScanAndMonotoneInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::uniform_int_distribution<int> level(0, 7);
  for (int trial = 0; trial < 20; ++trial) {
    CostVolume v(17, 9, -4 + trial % 3, 20, View::Right);
    // Coarse levels force frequent ties.
    for (auto& s : v.scores) s = trial % 2 ? u(rng) : level(rng) / 8.0f;
    const auto d = wta(v);
    CostVolume t = v;
    for (auto& s : t.scores) s = std::exp(3.0f * s) * 2.0f + 1.0f;
    const auto dt = wta(t);
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x) {
        int best = 0;
        for (int k = 1; k < v.disparity_count(); ++k)
          if (v.at(x, y, k) > v.at(x, y, best)) best = k;
        ASSERT_EQ(d.at(x, y), static_cast<float>(v.dMin + best));
        ASSERT_EQ(dt.at(x, y), d.at(x, y));
      }
    EXPECT_EQ(wta(v, Backend::Serial).values, d.values);
  }
}

TEST(LrConsistency, Examples) {
  const auto same = lr_consistency(constant_map(30, 4, 5), constant_map(30, 4, 5));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 30; ++x) EXPECT_EQ(same.is_valid(x, y), x - 5 >= 0);
  const auto bad = lr_consistency(constant_map(30, 4, 10), constant_map(30, 4, 20));
  for (auto v : bad.valid) EXPECT_EQ(v, 0);
  EXPECT_THROW(lr_consistency(constant_map(3, 4, 1), constant_map(4, 4, 1)), Error);
}

TEST(LrConsistency, NeverChangesValues) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> dd(0, 6);
  DisparityMap l(40, 10), r(40, 10);
  for (std::size_t i = 0; i < l.values.size(); ++i) {
    l.values[i] = static_cast<float>(dd(rng));
    r.values[i] = static_cast<float>(dd(rng));
    l.valid[i] = r.valid[i] = 1;
  }
  const auto out = lr_consistency(l, r);
  EXPECT_EQ(out.values, l.values);
  std::size_t kept = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 40; ++x) {
      if (!out.is_valid(x, y)) continue;
      ++kept;
      const int xr = x - static_cast<int>(l.at(x, y));
      ASSERT_GE(xr, 0);
      ASSERT_LE(std::abs(l.at(x, y) - r.at(xr, y)), 1.0f);
    }
  EXPECT_GT(kept, 0u);
}

TEST(Reconstruct, OracleMatcherIsAccurate) {
  const auto& pc = prepared();
  const auto rec = oracle_reconstruction();
  const auto report = metrics::evaluate(rec.depth, pc.gtDepth, pc.gtMask);
  EXPECT_LT(report.rmse, 0.01);
  EXPECT_GT(report.coverage, 0.5);
  std::size_t valid = 0;
  for (auto v : rec.disparity.valid) valid += v;
  EXPECT_EQ(rec.points.size(), valid);
  EXPECT_EQ(rec.colors.size(), valid);
  for (std::size_t i = 0; i < rec.disparity.values.size(); ++i) {
    if (!rec.disparity.valid[i]) continue;
    ASSERT_GE(rec.disparity.values[i], pc.pair.dMin);
    ASSERT_LE(rec.disparity.values[i], pc.pair.dMax);
  }
}

TEST(Reconstruct, OccludedPixelsInvalidated) {
  const auto& pc = prepared();
  const auto rec = oracle_reconstruction();
  const auto& rig = pc.pair.rig;
  std::size_t occluded = 0, removed = 0;
  for (int y = 0; y < pc.gtDepth.height; ++y)
    for (int x = 0; x < pc.gtDepth.width; ++x) {
      if (!pc.gtMask.at(x, y)) continue;
      const auto p = geometry::backproject(rig.left, {x, y}, pc.gtDepth.at(x, y));
      const auto q = geometry::project(rig.right, p);
      if (q.x() < 0 || q.x() > rig.right.width - 1) continue;
      if (render::visible_from(pc.spec.scene, rig.right, p, 1e-3)) continue;
      ++occluded;
      removed += !rec.disparity.is_valid(x, y);
    }
  ASSERT_GT(occluded, 20u);
  EXPECT_GE(static_cast<double>(removed) / occluded, 0.9) << removed << "/" << occluded;
}

TEST(Reconstruct, FrontoParallelPlaneWithinQuantization) {
  // Only the textured background plane is visible, two metres away.
  render::SceneSpec scene = render::generate_scene(8, render::Difficulty::ClutteredBackground);
  scene.surface.center = geometry::Vec3(0, 0, 50);  // behind the cameras
  scene.background.distance = 0.0;
  const geometry::Intrinsics k;
  const auto [l, unused] = geometry::build_rig(2.0, 0.0, k);
  const double baseline = 0.2;
  const geometry::Vec3 centreR = l.center() + baseline * l.R.row(0).transpose();
  const geometry::CameraModel r(k, l.R, -l.R * centreR);
  const auto vl = render::render_view(scene, l, Backend::Parallel, true);
  const auto vr = render::render_view(scene, r, Backend::Parallel, true);
  auto pair = geometry::rectify(l, r, evalbench::quantize8(vl.image), evalbench::quantize8(vr.image));
  const double d = k.fx * baseline / 2.0;  // 30 px
  pair.dMin = 20;
  pair.dMax = 40;
  const auto rec = reconstruct(pair, MatcherSpec::ncc(), nullptr, ConstraintConfig{});
  const double bound = k.fx * baseline / (d * (d - 1));
  std::size_t valid = 0, within = 0;
  for (std::size_t i = 0; i < rec.depth.values.size(); ++i) {
    if (!is_valid_depth(rec.depth.values[i])) continue;
    ++valid;
    within += std::abs(rec.depth.values[i] - 2.0) <= bound;
  }
  ASSERT_GT(valid, rec.depth.values.size() / 2);
  EXPECT_GE(static_cast<double>(within) / valid, 0.99);
}

TEST(DepthMap, UsesOffsetDisparity) {
  geometry::RectifiedRig rig;
  rig.f = 100;
  rig.B = 0.5;
  rig.doffs = 5;
  DisparityMap disp(3, 1);
  disp.values = {5, 20, -5};
  disp.valid = {1, 1, 1};
  const auto z = disparity_to_depth_map(disp, rig);
  EXPECT_FLOAT_EQ(z.values[0], 5.0f);
  EXPECT_FLOAT_EQ(z.values[1], 2.0f);
  EXPECT_FALSE(is_valid_depth(z.values[2]));
}
