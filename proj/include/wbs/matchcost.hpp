#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wbs/image.hpp"
#include "wbs/net.hpp"
#include "wbs/parallel.hpp"

namespace wbs::matchcost {

enum class MatcherKind { Ncc, Sad, Learned };

struct MatcherSpec {
  MatcherKind kind = MatcherKind::Ncc;
  std::vector<int> patchSizes = {9};
  bool pooling = true;
  std::string weightsPath;  // informational; the loaded network is in `network`
  std::shared_ptr<const net::SiameseNetwork> network;

  static MatcherSpec ncc();
  static MatcherSpec sad();
  static MatcherSpec learned(std::shared_ptr<const net::SiameseNetwork> network, bool pooling = true,
                             std::vector<int> sizes = {9, 19, 35});

  // Sizes actually evaluated: all of patchSizes with pooling, else the first.
  std::vector<int> effective_sizes() const;
  void validate() const;
};

const char* to_string(MatcherKind kind);

// Zero-mean normalised cross-correlation in [-1, 1]; 0 when either patch has
// variance below 1e-12.
double ncc_score(std::span<const float> a, std::span<const float> b);
// Negative mean absolute difference, in [-1, 0] for inputs in [0, 1].
double sad_score(std::span<const float> a, std::span<const float> b);

// size x size window around (x, y), bilinearly resized to 9x9 with
// pixel-centre alignment; samples outside the image replicate the edge.
std::vector<float> extract_resized(const ImageBuffer& gray, int x, int y, int size);
std::vector<std::vector<float>> extract_multiscale(const ImageBuffer& gray, int x, int y,
                                                   std::span<const int> sizes);

// Mean over effective sizes of the network similarity between the left
// patch at pixelL and the right patch at candidateR. Reference path used
// to check the dense kernels.
float pooled_score(const net::SiameseNetwork& net, const ImageBuffer& grayL, const ImageBuffer& grayR,
                   int xL, int yL, int xR, int yR, const MatcherSpec& spec);

enum class View { Left, Right };

// Scores (left pixel, right pixel) pairs on one image row. Scores are
// similarities in [0, 1], higher is better: the learned probability,
// (1 + ncc) / 2, or 1 - mean absolute difference.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual void score(int y, std::span<const int> xLeft, std::span<const int> xRight, View reference,
                     std::span<float> out) const = 0;
};

// One scorer per matcher kind and window size, with per-pixel work
// precomputed for both images (grayscale inputs).
std::unique_ptr<PairScorer> make_scorer(const MatcherSpec& spec, int size, const ImageBuffer& grayL,
                                        const ImageBuffer& grayR, Backend backend = Backend::Parallel);

// Perfect-matcher stand-in: similarity 1 / (1 + |d - dTrue|) where dTrue is
// the ground-truth pixel disparity of the reference pixel (NaN = unknown,
// scored 0).
class GroundTruthScorer : public PairScorer {
 public:
  GroundTruthScorer(Grid<float> disparityLeft, Grid<float> disparityRight)
      : left_(std::move(disparityLeft)), right_(std::move(disparityRight)) {}
  void score(int y, std::span<const int> xLeft, std::span<const int> xRight, View reference,
             std::span<float> out) const override;

 private:
  Grid<float> left_, right_;
};

}  // namespace wbs::matchcost
