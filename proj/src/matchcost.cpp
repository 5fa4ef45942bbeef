#include "wbs/matchcost.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "wbs/error.hpp"

namespace wbs::matchcost {

MatcherSpec MatcherSpec::ncc() { return {MatcherKind::Ncc, {9}, false, {}, nullptr}; }
MatcherSpec MatcherSpec::sad() { return {MatcherKind::Sad, {9}, false, {}, nullptr}; }

MatcherSpec MatcherSpec::learned(std::shared_ptr<const net::SiameseNetwork> network, bool pooling,
                                 std::vector<int> sizes) {
  return {MatcherKind::Learned, std::move(sizes), pooling, {}, std::move(network)};
}

std::vector<int> MatcherSpec::effective_sizes() const {
  if (pooling || patchSizes.size() <= 1) return patchSizes;
  return {patchSizes.front()};
}

void MatcherSpec::validate() const {
  require(!patchSizes.empty(), ErrorKind::InvalidArgument, "matcher: no patch sizes");
  for (int s : patchSizes) {
    require(s >= 3 && s % 2 == 1, ErrorKind::InvalidArgument, "matcher: patch sizes must be odd and >= 3");
  }
  if (kind == MatcherKind::Learned) {
    require(network != nullptr, ErrorKind::MissingWeights, "matcher: learned kind needs a loaded network");
  }
}

const char* to_string(MatcherKind kind) {
  switch (kind) {
    case MatcherKind::Ncc: return "ncc";
    case MatcherKind::Sad: return "sad";
    case MatcherKind::Learned: return "learned";
  }
  return "?";
}

double ncc_score(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size() && !a.empty(), ErrorKind::ShapeMismatch, "ncc_score: size mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa / n < 1e-12 || sbb / n < 1e-12) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double sad_score(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size() && !a.empty(), ErrorKind::ShapeMismatch, "sad_score: size mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(static_cast<double>(a[i]) - b[i]);
  return -sum / static_cast<double>(a.size());
}

std::vector<float> extract_resized(const ImageBuffer& gray, int x, int y, int size) {
  constexpr int P = net::kPatch;
  std::vector<float> out(net::kPatchArea);
  const int half = size / 2;
  if (size == P) {
    for (int j = 0; j < P; ++j) {
      for (int i = 0; i < P; ++i) {
        const int sx = std::clamp(x - half + i, 0, gray.width - 1);
        const int sy = std::clamp(y - half + j, 0, gray.height - 1);
        out[j * P + i] = gray.at(sx, sy);
      }
    }
    return out;
  }
  const double step = static_cast<double>(size) / P;
  for (int j = 0; j < P; ++j) {
    for (int i = 0; i < P; ++i) {
      const double u = x - half + (i + 0.5) * step - 0.5;
      const double v = y - half + (j + 0.5) * step - 0.5;
      out[j * P + i] = sample_bilinear_clamped(gray, u, v, 0);
    }
  }
  return out;
}

std::vector<std::vector<float>> extract_multiscale(const ImageBuffer& gray, int x, int y,
                                                   std::span<const int> sizes) {
  std::vector<std::vector<float>> out;
  out.reserve(sizes.size());
  for (int s : sizes) out.push_back(extract_resized(gray, x, y, s));
  return out;
}

namespace {

int clamp_x(int x, int width) { return std::clamp(x, 0, width - 1); }

float similarity(MatcherKind kind, double raw) {
  switch (kind) {
    case MatcherKind::Ncc: return static_cast<float>(0.5 * (1.0 + raw));
    case MatcherKind::Sad: return static_cast<float>(1.0 + raw);
    case MatcherKind::Learned: return static_cast<float>(raw);
  }
  return 0.0f;
}

// Per-pixel resized patches for the whole image, row-major pixel order.
std::vector<float> all_patches(const ImageBuffer& gray, int size, Backend backend) {
  std::vector<float> out(static_cast<std::size_t>(gray.width) * gray.height * net::kPatchArea);
  parallel_for(backend, gray.height, [&](std::int64_t y) {
    for (int x = 0; x < gray.width; ++x) {
      const auto p = extract_resized(gray, x, static_cast<int>(y), size);
      std::copy(p.begin(), p.end(),
                out.begin() + (static_cast<std::ptrdiff_t>(y) * gray.width + x) * net::kPatchArea);
    }
  });
  return out;
}

class NccScorer : public PairScorer {
 public:
  NccScorer(const ImageBuffer& grayL, const ImageBuffer& grayR, int size, Backend backend)
      : width_(grayL.width),
        left_(normalise(all_patches(grayL, size, backend))),
        right_(normalise(all_patches(grayR, size, backend))) {}

  void score(int y, std::span<const int> xl, std::span<const int> xr, View, std::span<float> out) const override {
    for (std::size_t k = 0; k < xl.size(); ++k) {
      const float* a = &left_[index(clamp_x(xl[k], width_), y)];
      const float* b = &right_[index(clamp_x(xr[k], width_), y)];
      double dot = 0;
      for (int i = 0; i < net::kPatchArea; ++i) dot += static_cast<double>(a[i]) * b[i];
      out[k] = similarity(MatcherKind::Ncc, std::clamp(dot, -1.0, 1.0));
    }
  }

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * net::kPatchArea;
  }

  // Zero-mean, unit-norm rows so that the dot product is the NCC; constant
  // patches become zero rows (score 0).
  static std::vector<float> normalise(std::vector<float> p) {
    const double n = net::kPatchArea;
    for (std::size_t off = 0; off < p.size(); off += net::kPatchArea) {
      double mean = 0;
      for (int i = 0; i < net::kPatchArea; ++i) mean += p[off + i];
      mean /= n;
      double ss = 0;
      for (int i = 0; i < net::kPatchArea; ++i) ss += (p[off + i] - mean) * (p[off + i] - mean);
      const double inv = ss / n < 1e-12 ? 0.0 : 1.0 / std::sqrt(ss);
      for (int i = 0; i < net::kPatchArea; ++i) p[off + i] = static_cast<float>((p[off + i] - mean) * inv);
    }
    return p;
  }

  int width_;
  std::vector<float> left_, right_;
};

class SadScorer : public PairScorer {
 public:
  SadScorer(const ImageBuffer& grayL, const ImageBuffer& grayR, int size, Backend backend)
      : width_(grayL.width), left_(all_patches(grayL, size, backend)), right_(all_patches(grayR, size, backend)) {}

  void score(int y, std::span<const int> xl, std::span<const int> xr, View, std::span<float> out) const override {
    for (std::size_t k = 0; k < xl.size(); ++k) {
      const std::size_t ia = (static_cast<std::size_t>(y) * width_ + clamp_x(xl[k], width_)) * net::kPatchArea;
      const std::size_t ib = (static_cast<std::size_t>(y) * width_ + clamp_x(xr[k], width_)) * net::kPatchArea;
      out[k] = similarity(MatcherKind::Sad,
                          sad_score(std::span(&left_[ia], net::kPatchArea), std::span(&right_[ib], net::kPatchArea)));
    }
  }

 private:
  int width_;
  std::vector<float> left_, right_;
};

// Precomputes, for every pixel, the first FC layer's contribution of its
// features (left image as the first network input, right image as the
// second), so a pair costs one add plus the remaining two layers.
class LearnedScorer : public PairScorer {
 public:
  LearnedScorer(const net::SiameseNetwork& network, const ImageBuffer& grayL, const ImageBuffer& grayR,
                int size, Backend backend)
      : net_(network), width_(grayL.width) {
    fc2t_ = network.weight("fc2.weight").transpose();
    const auto b2 = network.view("fc2.bias");
    const auto w3 = network.view("fc3.weight");
    fc2b_ = Eigen::Map<const Eigen::RowVectorXf>(b2.data(), static_cast<Eigen::Index>(b2.size()));
    fc3_ = Eigen::Map<const Eigen::VectorXf>(w3.data(), static_cast<Eigen::Index>(w3.size()));
    fc3b_ = network.view("fc3.bias")[0];
    left_ = halves(grayL, size, backend, true);
    right_ = halves(grayR, size, backend, false);
  }

  void score(int y, std::span<const int> xl, std::span<const int> xr, View, std::span<float> out) const override {
    // Blocks small enough to keep the gathered hidden layer in cache.
    constexpr Eigen::Index kBlock = 512;
    const auto n = static_cast<Eigen::Index>(xl.size());
    const auto row = static_cast<Eigen::Index>(y) * width_;
    net::RowMatrix<float> h(std::min(kBlock, n), net::kHidden1);
    net::RowMatrix<float> h2(h.rows(), fc2t_.cols());
    for (Eigen::Index b0 = 0; b0 < n; b0 += kBlock) {
      const Eigen::Index m = std::min(kBlock, n - b0);
      for (Eigen::Index k = 0; k < m; ++k) {
        const float* a = left_.row(row + clamp_x(xl[b0 + k], width_)).data();
        const float* c = right_.row(row + clamp_x(xr[b0 + k], width_)).data();
        float* dst = h.row(k).data();
        for (int i = 0; i < net::kHidden1; ++i) dst[i] = std::max(a[i] + c[i], 0.0f);
      }
      auto hb = h.topRows(m);
      auto h2b = h2.topRows(m);
      h2b.noalias() = hb * fc2t_;
      h2b.rowwise() += fc2b_;
      h2b = h2b.cwiseMax(0.0f);
      const Eigen::VectorXf logit = h2b * fc3_;
      for (Eigen::Index k = 0; k < m; ++k) out[b0 + k] = 1.0f / (1.0f + std::exp(-(logit(k) + fc3b_)));
    }
  }

 private:
  net::RowMatrix<float> halves(const ImageBuffer& gray, int size, Backend backend, bool reference) {
    net::RowMatrix<float> out(static_cast<Eigen::Index>(gray.width) * gray.height, net::kHidden1);
    constexpr int kRowsPerBlock = 4;
    const int blocks = (gray.height + kRowsPerBlock - 1) / kRowsPerBlock;
    parallel_for(backend, blocks, [&](std::int64_t blk) {
      const int y0 = static_cast<int>(blk) * kRowsPerBlock;
      const int y1 = std::min(gray.height, y0 + kRowsPerBlock);
      const std::size_t n = static_cast<std::size_t>(y1 - y0) * gray.width;
      std::vector<float> patches(n * net::kPatchArea);
      for (int y = y0; y < y1; ++y) {
        for (int x = 0; x < gray.width; ++x) {
          const auto p = extract_resized(gray, x, y, size);
          std::copy(p.begin(), p.end(),
                    patches.begin() + (static_cast<std::ptrdiff_t>(y - y0) * gray.width + x) * net::kPatchArea);
        }
      }
      const auto feats = net::features<float>(net_, patches, n);
      out.middleRows(static_cast<Eigen::Index>(y0) * gray.width, static_cast<Eigen::Index>(n)) =
          reference ? net::reference_half<float>(net_, feats) : net::candidate_half<float>(net_, feats);
    });
    return out;
  }

  const net::SiameseNetwork& net_;
  int width_;
  net::RowMatrix<float> left_, right_;
  Eigen::MatrixXf fc2t_;
  Eigen::RowVectorXf fc2b_;
  Eigen::VectorXf fc3_;
  float fc3b_ = 0.0f;
};

}  // namespace

float pooled_score(const net::SiameseNetwork& network, const ImageBuffer& grayL, const ImageBuffer& grayR,
                   int xL, int yL, int xR, int yR, const MatcherSpec& spec) {
  const auto sizes = spec.effective_sizes();
  float sum = 0.0f;
  for (int s : sizes) {
    const auto a = extract_resized(grayL, clamp_x(xL, grayL.width), yL, s);
    const auto b = extract_resized(grayR, clamp_x(xR, grayR.width), yR, s);
    sum += net::forward<float>(network, a, b);
  }
  return sum / static_cast<float>(sizes.size());
}

std::unique_ptr<PairScorer> make_scorer(const MatcherSpec& spec, int size, const ImageBuffer& grayL,
                                        const ImageBuffer& grayR, Backend backend) {
  spec.validate();
  require(grayL.channels == 1 && grayR.channels == 1, ErrorKind::InvalidArgument,
          "make_scorer: expected grayscale images");
  require(grayL.width == grayR.width && grayL.height == grayR.height, ErrorKind::ShapeMismatch,
          "make_scorer: image sizes differ");
  switch (spec.kind) {
    case MatcherKind::Ncc: return std::make_unique<NccScorer>(grayL, grayR, size, backend);
    case MatcherKind::Sad: return std::make_unique<SadScorer>(grayL, grayR, size, backend);
    case MatcherKind::Learned:
      return std::make_unique<LearnedScorer>(*spec.network, grayL, grayR, size, backend);
  }
  fail(ErrorKind::InvalidArgument, "make_scorer: unknown matcher");
}

void GroundTruthScorer::score(int y, std::span<const int> xl, std::span<const int> xr, View reference,
                              std::span<float> out) const {
  const auto& gt = reference == View::Left ? left_ : right_;
  for (std::size_t k = 0; k < xl.size(); ++k) {
    const int xref = reference == View::Left ? xl[k] : xr[k];
    const float truth = gt.at(clamp_x(xref, gt.width), y);
    if (!std::isfinite(truth)) {
      out[k] = 0.0f;
      continue;
    }
    out[k] = 1.0f / (1.0f + std::abs(static_cast<float>(xl[k] - xr[k]) - truth));
  }
}

}  // namespace wbs::matchcost
