#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace wbs {

// Interleaved, row-major image with samples in [0,1]. Pixel (x, y) has its
// centre at continuous coordinate (x, y).
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> samples;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        samples(static_cast<std::size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c = 0) {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const { return samples.empty(); }
};

// Single-channel grid used for depth, disparity and masks.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  std::size_t size() const { return values.size(); }
};

inline constexpr float kInvalidDepth = std::numeric_limits<float>::infinity();

inline bool is_valid_depth(double z) { return std::isfinite(z) && z > 0.0; }

// Depth in metres, kInvalidDepth where unknown.
using DepthMap = Grid<float>;

// Labels: 0 background, 1 foreground.
using SemanticMask = Grid<std::uint8_t>;

struct DisparityMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> valid;

  DisparityMap() = default;
  DisparityMap(int w, int h)
      : width(w), height(h),
        values(static_cast<std::size_t>(w) * h, 0.0f),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  bool is_valid(int x, int y) const {
    return valid[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

// Grayscale via Rec.601 luma.
ImageBuffer to_gray(const ImageBuffer& image);

// Bilinear sample of channel c; returns false (and 0) when (x, y) lies outside
// the pixel-centre hull [0, w-1] x [0, h-1].
bool sample_bilinear(const ImageBuffer& image, double x, double y, int c, float& out);

// Bilinear sample with replicate-edge clamping, always defined.
float sample_bilinear_clamped(const ImageBuffer& image, double x, double y, int c = 0);

// Resample to new dimensions with pixel-centre alignment.
ImageBuffer resize_bilinear(const ImageBuffer& image, int width, int height);

}  // namespace wbs
