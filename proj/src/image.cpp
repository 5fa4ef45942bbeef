#include "wbs/image.hpp"

#include <algorithm>

#include "wbs/error.hpp"

namespace wbs {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Io: return "io";
    case ErrorKind::BehindCamera: return "behind-camera";
    case ErrorKind::DegenerateRig: return "degenerate-rig";
    case ErrorKind::FrustumMiss: return "frustum-miss";
    case ErrorKind::InsufficientVisibility: return "insufficient-visibility";
    case ErrorKind::SupportExhausted: return "support-exhausted";
    case ErrorKind::MagicMismatch: return "magic-mismatch";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::Checksum: return "checksum";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::DisparityRangeEmpty: return "disparity-range-empty";
    case ErrorKind::MaskSizeMismatch: return "mask-size-mismatch";
    case ErrorKind::EmptyEvaluation: return "empty-evaluation";
    case ErrorKind::NonPositiveGroundTruth: return "nonpositive-ground-truth";
    case ErrorKind::MissingWeights: return "missing-weights";
    case ErrorKind::Invariant: return "invariant";
  }
  return "unknown";
}

ImageBuffer to_gray(const ImageBuffer& image) {
  if (image.channels == 1) return image;
  require(image.channels == 3, ErrorKind::InvalidArgument,
          "to_gray: expected 1 or 3 channels");
  ImageBuffer gray(image.width, image.height, 1);
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const float* p = &image.samples[3 * i];
    gray.samples[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return gray;
}

namespace {

float lerp_at(const ImageBuffer& image, int x0, int y0, double fx, double fy, int c) {
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double a = image.at(x0, y0, c), b = image.at(x1, y0, c);
  const double d = image.at(x0, y1, c), e = image.at(x1, y1, c);
  const double top = a + (b - a) * fx;
  const double bottom = d + (e - d) * fx;
  return static_cast<float>(top + (bottom - top) * fy);
}

}  // namespace

bool sample_bilinear(const ImageBuffer& image, double x, double y, int c, float& out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= image.width - 1 && y <= image.height - 1)) {
    out = 0.0f;
    return false;
  }
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  out = lerp_at(image, x0, y0, x - x0, y - y0, c);
  return true;
}

float sample_bilinear_clamped(const ImageBuffer& image, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  return lerp_at(image, x0, y0, x - x0, y - y0, c);
}

ImageBuffer resize_bilinear(const ImageBuffer& image, int width, int height) {
  require(width > 0 && height > 0, ErrorKind::InvalidArgument, "resize: empty target");
  ImageBuffer out(width, height, image.channels);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) * sx - 0.5, v = (y + 0.5) * sy - 0.5;
      for (int c = 0; c < image.channels; ++c) {
        out.at(x, y, c) = sample_bilinear_clamped(image, u, v, c);
      }
    }
  }
  return out;
}

}  // namespace wbs
