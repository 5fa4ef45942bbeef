#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wbs/geometry.hpp"
#include "wbs/image.hpp"
#include "wbs/render.hpp"

namespace wbs::dataset {

// Patches are stored with a guard band so augmentation can crop without
// resampling the source image: stored side = network side + 2 * kGuard.
inline constexpr int kGuard = 2;

struct SourceMeta {
  std::uint64_t sceneSeed = 0;
  std::uint32_t viewL = 0, viewR = 1;
  std::int32_t refX = 0, refY = 0;
  float theta = 0.0f;
};

struct PatchSample {
  std::vector<float> reference;  // side x side, row-major grayscale in [0,1]
  std::vector<float> candidate;
  std::uint8_t label = 0;        // 1 match, 0 non-match
  std::int8_t psi = 0;           // signed epipolar offset of the candidate
  SourceMeta meta;
};

struct PatchDataset {
  int patchSize = 9;    // network input side P
  int storedSize = 13;  // stored side, P + 2*kGuard
  std::vector<PatchSample> samples;

  std::size_t positives() const;
  std::size_t negatives() const;
  // Balance, label/psi, size and finiteness invariants. Throws Invariant.
  void validate() const;
};

struct SamplerConfig {
  int count = 1000;  // even
  int psiMin = 4, psiMax = 11;
  int patchSize = 9;
  std::uint64_t seed = 0;
  render::SurfaceSelect surface = render::SurfaceSelect::Foreground;
};

// Balanced positive/negative pairs from a rectified pair of a rendered
// scene. Positives sit on exact correspondences (reference at an integer
// pixel, candidate rounded to the nearest pixel); each negative reuses a
// positive's reference and moves the candidate by s*psi pixels along the
// row, s in {-1,+1}, psi uniform in [psiMin, psiMax]. Patches whose support
// leaves the valid image are resampled.
PatchDataset sample_pairs(const render::SceneSpec& scene,
                          const geometry::RectifiedStereoPair& pair, double thetaDeg,
                          const SamplerConfig& config);

// Extracts a side x side window of a grayscale image centred on an integer
// pixel. Returns false if any sample falls outside the image or on a pixel
// with validity 0.
bool extract_patch(const ImageBuffer& gray, const SemanticMask* valid, int cx, int cy, int side,
                   std::vector<float>& out);

struct AugmentConfig {
  double flipProbability = 0.5;
  double cropProbability = 0.5;
  double affineProbability = 0.5;
  double contrastProbability = 0.5;
  double maxRotationDeg = 7.0;
  double minScale = 0.9, maxScale = 1.1;
  double minContrast = 0.8, maxContrast = 1.25;

  static AugmentConfig disabled() { return {0.0, 0.0, 0.0, 0.0}; }
};

// Applies the same random flip / crop / affine / contrast transform to both
// patches of a guarded sample and returns a P x P sample.
PatchSample augment(const PatchSample& sample, int patchSize, std::uint64_t seed,
                    const AugmentConfig& config = {});

// Centre P x P window of a stored patch.
std::vector<float> center_crop(std::span<const float> patch, int storedSize, int patchSize);
std::vector<float> flip_horizontal(std::span<const float> patch, int side);

// Binary file: "S2P2", version u16, patchSize u16 (stored side, so the
// network side is patchSize - 2*kGuard), sampleCount
// u64, then per record label u8, psi i8, theta f32, 2*side*side f32; trailing
// CRC32 of the records. Little-endian throughout.
inline constexpr std::uint16_t kDatasetVersion = 1;
std::size_t dataset_header_size();
std::size_t dataset_record_size(int storedSize);

void write_dataset(const std::filesystem::path& path, const PatchDataset& dataset);
PatchDataset read_dataset(const std::filesystem::path& path);

}  // namespace wbs::dataset
