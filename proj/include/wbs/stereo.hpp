#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wbs/geometry.hpp"
#include "wbs/image.hpp"
#include "wbs/matchcost.hpp"
#include "wbs/parallel.hpp"

namespace wbs::stereo {

using geometry::RectifiedStereoPair;
using matchcost::View;

// Similarity scores, higher is better, laid out [(y * width + x) * D + k]
// with disparity dMin + k.
struct CostVolume {
  int width = 0, height = 0;
  int dMin = 0, dMax = 0;
  View view = View::Left;
  std::vector<float> scores;

  CostVolume() = default;
  CostVolume(int w, int h, int lo, int hi, View v);

  int disparity_count() const { return dMax - dMin + 1; }
  float& at(int x, int y, int k) { return scores[index(x, y) + k]; }
  float at(int x, int y, int k) const { return scores[index(x, y) + k]; }
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * static_cast<std::size_t>(disparity_count());
  }
};

enum class ConstraintMode { Weight, Restrict };

struct ConstraintConfig {
  bool enabled = false;
  double sigma = 10.0;
  ConstraintMode mode = ConstraintMode::Weight;

  void validate() const;
};

const char* to_string(ConstraintMode mode);

struct MaskPair {
  SemanticMask left, right;
};

// Column in the other view matched by reference column x at disparity d.
inline int candidate_x(View view, int x, int d) { return view == View::Left ? x - d : x + d; }

// Dense volume from an arbitrary pair scorer. Rows are independent, so the
// parallel backend yields the same bits as the serial one.
CostVolume score_volume(const matchcost::PairScorer& scorer, int width, int height, int dMin, int dMax,
                        View view, Backend backend = Backend::Parallel);

// Straightforward per-pixel, per-disparity evaluation through the matcher's
// scalar functions. Slow; kept as the reference for score_volume.
CostVolume naive_volume(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher, View view);

// Element-wise mean of equally shaped volumes, summed in list order.
CostVolume mean_volume(const std::vector<CostVolume>& volumes);

// Multiplies label-consistent candidates by sigma (weight mode) or sets
// label-inconsistent ones to the lowest float (restrict mode).
void apply_constraint(CostVolume& volume, const MaskPair& masks, const ConstraintConfig& cc,
                      Backend backend = Backend::Parallel);

// Builds the matcher's volume for one view: one volume per effective patch
// size, averaged, then constrained when cc.enabled (masks required).
CostVolume build_cost_volume(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher,
                             View view, const MaskPair* masks, const ConstraintConfig& cc,
                             Backend backend = Backend::Parallel);

// Argmax per pixel; ties go to the smallest disparity. All pixels valid.
DisparityMap wta(const CostVolume& volume, Backend backend = Backend::Parallel);

// Left map with pixels failing the cross-check invalidated; values untouched.
DisparityMap lr_consistency(const DisparityMap& left, const DisparityMap& right, double tolerance = 1.0,
                            Backend backend = Backend::Parallel);

// Depth in the rectified left camera frame; invalid disparities and
// non-positive true disparities map to the invalid marker.
DepthMap disparity_to_depth_map(const DisparityMap& disparity, const geometry::RectifiedRig& rig);

struct VolumePair {
  CostVolume left, right;
};

// Unconstrained volumes of both views for each effective patch size, in
// size order. Per-pixel precomputation is shared between the two views.
std::vector<VolumePair> scale_volumes(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher,
                                      Backend backend = Backend::Parallel);

// Mean over the given per-size volumes, then the constraint when enabled.
// Equals build_cost_volume for each view.
VolumePair combine_volumes(const std::vector<VolumePair>& perSize, const MaskPair* masks,
                           const ConstraintConfig& cc, Backend backend = Backend::Parallel);

VolumePair build_cost_volumes(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher,
                              const MaskPair* masks, const ConstraintConfig& cc,
                              Backend backend = Backend::Parallel);

struct Reconstruction {
  DisparityMap disparityLeft, disparityRight;  // raw WTA
  DisparityMap disparity;                      // after the consistency check
  DepthMap depth;
  std::vector<geometry::Vec3> points;          // rectified left camera frame
  std::vector<std::array<std::uint8_t, 3>> colors;
};

Reconstruction reconstruct_from_volumes(const RectifiedStereoPair& pair, const CostVolume& left,
                                        const CostVolume& right, Backend backend = Backend::Parallel);

Reconstruction reconstruct(const RectifiedStereoPair& pair, const matchcost::MatcherSpec& matcher,
                           const MaskPair* masks, const ConstraintConfig& cc,
                           Backend backend = Backend::Parallel);

}  // namespace wbs::stereo
