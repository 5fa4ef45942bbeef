#include "wbs/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wbs/error.hpp"

namespace wbs::stereo {

CostVolume::CostVolume(int w, int h, int lo, int hi, View v)
    : width(w), height(h), dMin(lo), dMax(hi), view(v) {
  require(lo <= hi, ErrorKind::DisparityRangeEmpty, "cost volume: dMin > dMax");
  require(w > 0 && h > 0, ErrorKind::InvalidArgument, "cost volume: empty image");
  scores.assign(static_cast<std::size_t>(w) * h * (hi - lo + 1), 0.0f);
}

void ConstraintConfig::validate() const {
  require(std::isfinite(sigma) && sigma >= 1.0, ErrorKind::InvalidArgument, "constraint: sigma must be >= 1");
}

const char* to_string(ConstraintMode mode) { return mode == ConstraintMode::Weight ? "weight" : "restrict"; }

namespace {

ImageBuffer gray_of(const ImageBuffer& img) { return img.channels == 1 ? img : to_gray(img); }

}  // namespace

CostVolume score_volume(const matchcost::PairScorer& scorer, int width, int height, int dMin, int dMax,
                        View view, Backend backend) {
  CostVolume vol(width, height, dMin, dMax, view);
  const int D = vol.disparity_count();
  parallel_for(backend, height, [&](std::int64_t yy) {
    const int y = static_cast<int>(yy);
    const std::size_t n = static_cast<std::size_t>(width) * D;
    std::vector<int> xl(n), xr(n);
    for (int x = 0; x < width; ++x) {
      for (int k = 0; k < D; ++k) {
        const int other = candidate_x(view, x, dMin + k);
        const std::size_t i = static_cast<std::size_t>(x) * D + k;
        xl[i] = view == View::Left ? x : other;
        xr[i] = view == View::Left ? other : x;
      }
    }
    scorer.score(y, xl, xr, view, std::span(&vol.scores[vol.index(0, y)], n));
  });
  return vol;
}

CostVolume naive_volume(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher, View view) {
  matcher.validate();
  const ImageBuffer gl = gray_of(pair.left), gr = gray_of(pair.right);
  const int W = gl.width, H = gl.height;
  CostVolume vol(W, H, pair.dMin, pair.dMax, view);
  const auto sizes = matcher.effective_sizes();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int k = 0; k < vol.disparity_count(); ++k) {
        const int other = std::clamp(candidate_x(view, x, pair.dMin + k), 0, W - 1);
        const int xL = view == View::Left ? x : other;
        const int xR = view == View::Left ? other : x;
        float sum = 0.0f;
        for (int s : sizes) {
          const auto a = matchcost::extract_resized(gl, xL, y, s);
          const auto b = matchcost::extract_resized(gr, xR, y, s);
          switch (matcher.kind) {
            case matchcost::MatcherKind::Ncc:
              sum += static_cast<float>(0.5 * (1.0 + matchcost::ncc_score(a, b)));
              break;
            case matchcost::MatcherKind::Sad:
              sum += static_cast<float>(1.0 + matchcost::sad_score(a, b));
              break;
            case matchcost::MatcherKind::Learned:
              sum += net::forward<float>(*matcher.network, a, b);
              break;
          }
        }
        vol.at(x, y, k) = sum / static_cast<float>(sizes.size());
      }
    }
  }
  return vol;
}

CostVolume mean_volume(const std::vector<CostVolume>& volumes) {
  require(!volumes.empty(), ErrorKind::InvalidArgument, "mean_volume: no volumes");
  if (volumes.size() == 1) return volumes.front();
  CostVolume out = volumes.front();
  for (std::size_t v = 1; v < volumes.size(); ++v) {
    require(volumes[v].scores.size() == out.scores.size() && volumes[v].dMin == out.dMin,
            ErrorKind::ShapeMismatch, "mean_volume: shape mismatch");
    for (std::size_t i = 0; i < out.scores.size(); ++i) out.scores[i] += volumes[v].scores[i];
  }
  const float n = static_cast<float>(volumes.size());
  for (float& s : out.scores) s /= n;
  return out;
}

void apply_constraint(CostVolume& vol, const MaskPair& masks, const ConstraintConfig& cc, Backend backend) {
  cc.validate();
  if (!cc.enabled) return;
  const auto ok = [&](const SemanticMask& m) { return m.width == vol.width && m.height == vol.height; };
  require(ok(masks.left) && ok(masks.right), ErrorKind::MaskSizeMismatch, "constraint: mask size mismatch");
  const SemanticMask& ref = vol.view == View::Left ? masks.left : masks.right;
  const SemanticMask& other = vol.view == View::Left ? masks.right : masks.left;
  const float sigma = static_cast<float>(cc.sigma);
  const float sentinel = std::numeric_limits<float>::lowest();
  const int D = vol.disparity_count();
  parallel_for(backend, vol.height, [&](std::int64_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < vol.width; ++x) {
      const std::uint8_t label = ref.at(x, y);
      for (int k = 0; k < D; ++k) {
        const int cx = std::clamp(candidate_x(vol.view, x, vol.dMin + k), 0, vol.width - 1);
        const bool same = other.at(cx, y) == label;
        float& s = vol.at(x, y, k);
        if (cc.mode == ConstraintMode::Weight) {
          if (same) s *= sigma;
        } else if (!same) {
          s = sentinel;
        }
      }
    }
  });
}

CostVolume build_cost_volume(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher, View view,
                             const MaskPair* masks, const ConstraintConfig& cc, Backend backend) {
  matcher.validate();
  cc.validate();
  require(pair.dMin <= pair.dMax, ErrorKind::DisparityRangeEmpty, "cost volume: empty disparity range");
  require(pair.left.width == pair.right.width && pair.left.height == pair.right.height, ErrorKind::ShapeMismatch,
          "cost volume: image sizes differ");
  if (cc.enabled) {
    require(masks != nullptr, ErrorKind::InvalidArgument, "cost volume: constraint enabled without masks");
  }
  const ImageBuffer gl = gray_of(pair.left), gr = gray_of(pair.right);
  // Sizes are processed one at a time so that only one set of per-pixel
  // precomputations is alive.
  CostVolume acc;
  const auto sizes = matcher.effective_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    auto scorer = matchcost::make_scorer(matcher, sizes[i], gl, gr, backend);
    CostVolume v = score_volume(*scorer, gl.width, gl.height, pair.dMin, pair.dMax, view, backend);
    if (i == 0) {
      acc = std::move(v);
    } else {
      for (std::size_t j = 0; j < acc.scores.size(); ++j) acc.scores[j] += v.scores[j];
    }
  }
  if (sizes.size() > 1) {
    const float n = static_cast<float>(sizes.size());
    for (float& s : acc.scores) s /= n;
  }
  if (cc.enabled) apply_constraint(acc, *masks, cc, backend);
  return acc;
}

std::vector<VolumePair> scale_volumes(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher,
                                      Backend backend) {
  matcher.validate();
  require(pair.dMin <= pair.dMax, ErrorKind::DisparityRangeEmpty, "cost volume: empty disparity range");
  require(pair.left.width == pair.right.width && pair.left.height == pair.right.height, ErrorKind::ShapeMismatch,
          "cost volume: image sizes differ");
  const ImageBuffer gl = gray_of(pair.left), gr = gray_of(pair.right);
  std::vector<VolumePair> out;
  for (int size : matcher.effective_sizes()) {
    auto scorer = matchcost::make_scorer(matcher, size, gl, gr, backend);
    VolumePair vp;
    vp.left = score_volume(*scorer, gl.width, gl.height, pair.dMin, pair.dMax, View::Left, backend);
    vp.right = score_volume(*scorer, gl.width, gl.height, pair.dMin, pair.dMax, View::Right, backend);
    out.push_back(std::move(vp));
  }
  return out;
}

VolumePair combine_volumes(const std::vector<VolumePair>& perSize, const MaskPair* masks,
                           const ConstraintConfig& cc, Backend backend) {
  cc.validate();
  if (cc.enabled) {
    require(masks != nullptr, ErrorKind::InvalidArgument, "cost volume: constraint enabled without masks");
  }
  require(!perSize.empty(), ErrorKind::InvalidArgument, "combine_volumes: no volumes");
  VolumePair out = perSize.front();
  for (std::size_t v = 1; v < perSize.size(); ++v) {
    require(perSize[v].left.scores.size() == out.left.scores.size(), ErrorKind::ShapeMismatch,
            "combine_volumes: shape mismatch");
    for (std::size_t i = 0; i < out.left.scores.size(); ++i) out.left.scores[i] += perSize[v].left.scores[i];
    for (std::size_t i = 0; i < out.right.scores.size(); ++i) out.right.scores[i] += perSize[v].right.scores[i];
  }
  if (perSize.size() > 1) {
    const float n = static_cast<float>(perSize.size());
    for (float& s : out.left.scores) s /= n;
    for (float& s : out.right.scores) s /= n;
  }
  if (cc.enabled) {
    apply_constraint(out.left, *masks, cc, backend);
    apply_constraint(out.right, *masks, cc, backend);
  }
  return out;
}

VolumePair build_cost_volumes(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher,
                              const MaskPair* masks, const ConstraintConfig& cc, Backend backend) {
  cc.validate();
  if (cc.enabled) {
    require(masks != nullptr, ErrorKind::InvalidArgument, "cost volume: constraint enabled without masks");
  }
  return combine_volumes(scale_volumes(pair, matcher, backend), masks, cc, backend);
}

DisparityMap wta(const CostVolume& vol, Backend backend) {
  DisparityMap out(vol.width, vol.height);
  const int D = vol.disparity_count();
  parallel_for(backend, vol.height, [&](std::int64_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < vol.width; ++x) {
      const float* s = &vol.scores[vol.index(x, y)];
      int best = 0;
      for (int k = 1; k < D; ++k) {
        if (s[k] > s[best]) best = k;
      }
      out.at(x, y) = static_cast<float>(vol.dMin + best);
      out.valid[static_cast<std::size_t>(y) * vol.width + x] = 1;
    }
  });
  return out;
}

DisparityMap lr_consistency(const DisparityMap& left, const DisparityMap& right, double tolerance,
                            Backend backend) {
  require(left.width == right.width && left.height == right.height, ErrorKind::ShapeMismatch,
          "lr_consistency: map sizes differ");
  DisparityMap out = left;
  parallel_for(backend, left.height, [&](std::int64_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < left.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * left.width + x;
      if (!left.valid[i]) continue;
      const float d = left.values[i];
      const int xr = x - static_cast<int>(std::lround(d));
      bool keep = xr >= 0 && xr < left.width && right.is_valid(xr, y) &&
                  std::abs(static_cast<double>(d) - right.at(xr, y)) <= tolerance;
      out.valid[i] = keep ? 1 : 0;
    }
  });
  return out;
}

DepthMap disparity_to_depth_map(const DisparityMap& disparity, const geometry::RectifiedRig& rig) {
  DepthMap depth(disparity.width, disparity.height, kInvalidDepth);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    if (!disparity.valid[i]) continue;
    depth.values[i] = static_cast<float>(geometry::disparity_to_depth(disparity.values[i] + rig.doffs, rig.f, rig.B));
  }
  return depth;
}

Reconstruction reconstruct_from_volumes(const RectifiedStereoPair& pair, const CostVolume& left,
                                        const CostVolume& right, Backend backend) {
  require(left.view == View::Left && right.view == View::Right, ErrorKind::InvalidArgument,
          "reconstruct: volumes must be (left, right)");
  Reconstruction r;
  r.disparityLeft = wta(left, backend);
  r.disparityRight = wta(right, backend);
  r.disparity = lr_consistency(r.disparityLeft, r.disparityRight, 1.0, backend);
  r.depth = disparity_to_depth_map(r.disparity, pair.rig);
  r.points = geometry::depth_to_points(r.depth, pair.rig.left.intrinsics());
  r.colors.reserve(r.points.size());
  const ImageBuffer& img = pair.left;
  for (int y = 0; y < r.depth.height; ++y) {
    for (int x = 0; x < r.depth.width; ++x) {
      if (!is_valid_depth(r.depth.at(x, y))) continue;
      std::array<std::uint8_t, 3> c{};
      for (int ch = 0; ch < 3; ++ch) {
        const float v = img.at(x, y, img.channels == 3 ? ch : 0);
        c[ch] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
      r.colors.push_back(c);
    }
  }
  return r;
}

Reconstruction reconstruct(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher,
                           const MaskPair* masks, const ConstraintConfig& cc, Backend backend) {
  const VolumePair v = build_cost_volumes(pair, matcher, masks, cc, backend);
  return reconstruct_from_volumes(pair, v.left, v.right, backend);
}

}  // namespace wbs::stereo
