#include "wbs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "wbs/error.hpp"
#include "wbs/io.hpp"
#include "wbs/rng.hpp"

namespace wbs::dataset {

std::size_t PatchDataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label == 1; }));
}

std::size_t PatchDataset::negatives() const { return samples.size() - positives(); }

void PatchDataset::validate() const {
  require(patchSize % 2 == 1 && patchSize >= 1, ErrorKind::Invariant, "dataset: patch size must be odd");
  require(storedSize == patchSize + 2 * kGuard, ErrorKind::Invariant,
          "dataset: stored size must equal patch size plus guard band");
  require(positives() == negatives(), ErrorKind::Invariant, "dataset: unbalanced labels");
  const std::size_t n = static_cast<std::size_t>(storedSize) * storedSize;
  for (const auto& s : samples) {
    require(s.label <= 1, ErrorKind::Invariant, "dataset: label outside {0,1}");
    if (s.label == 0) {
      require(std::abs(s.psi) >= 4 && std::abs(s.psi) <= 11, ErrorKind::Invariant,
              "dataset: negative psi outside [4,11]");
    }
    require(s.reference.size() == n && s.candidate.size() == n, ErrorKind::Invariant,
            "dataset: patch size mismatch");
    auto finite = [](float v) { return std::isfinite(v); };
    require(std::all_of(s.reference.begin(), s.reference.end(), finite) &&
                std::all_of(s.candidate.begin(), s.candidate.end(), finite),
            ErrorKind::Invariant, "dataset: non-finite patch value");
  }
}

bool extract_patch(const ImageBuffer& gray, const SemanticMask* valid, int cx, int cy, int side,
                   std::vector<float>& out) {
  const int half = side / 2;
  if (cx - half < 0 || cy - half < 0 || cx + half >= gray.width || cy + half >= gray.height) {
    return false;
  }
  out.resize(static_cast<std::size_t>(side) * side);
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      const int x = cx - half + i, y = cy - half + j;
      if (valid && !valid->at(x, y)) return false;
      out[static_cast<std::size_t>(j) * side + i] = gray.at(x, y);
    }
  }
  return true;
}

PatchDataset sample_pairs(const render::SceneSpec& scene, const geometry::RectifiedStereoPair& pair,
                          double thetaDeg, const SamplerConfig& config) {
  require(config.count >= 0 && config.count % 2 == 0, ErrorKind::InvalidArgument,
          "sample_pairs: count must be even");
  require(config.patchSize % 2 == 1, ErrorKind::InvalidArgument, "sample_pairs: patch size must be odd");
  require(config.psiMin >= 1 && config.psiMax >= config.psiMin && config.psiMax <= 127,
          ErrorKind::InvalidArgument, "sample_pairs: invalid psi range");

  PatchDataset out;
  out.patchSize = config.patchSize;
  out.storedSize = config.patchSize + 2 * kGuard;
  out.samples.reserve(config.count);

  const ImageBuffer grayL = to_gray(pair.left);
  const ImageBuffer grayR = to_gray(pair.right);
  const int side = out.storedSize;
  const int wanted = config.count / 2;

  Rng rng(substream(config.seed, "sampler"));
  std::vector<float> ref, pos, neg;
  int found = 0;
  for (int round = 0; found < wanted; ++round) {
    if (round >= 64) {
      fail(ErrorKind::SupportExhausted, "sample_pairs: could not place " +
                                            std::to_string(wanted) + " patch pairs");
    }
    const int request = std::min(4096, std::max(64, 2 * (wanted - found)));
    const auto corr = render::exact_correspondences(
        scene, pair.rig.left, pair.rig.right, request,
        substream(config.seed, "correspondences") + static_cast<std::uint64_t>(round),
        config.surface);
    for (const auto& c : corr) {
      if (found == wanted) break;
      const int xl = static_cast<int>(std::lround(c.pixelL.x()));
      const int yl = static_cast<int>(std::lround(c.pixelL.y()));
      const int xr = static_cast<int>(std::lround(c.pixelR.x()));
      const int yr = static_cast<int>(std::lround(c.pixelR.y()));
      const int psi = uniform_int(rng, config.psiMin, config.psiMax);
      const int sign = coin(rng, 0.5) ? 1 : -1;
      if (!extract_patch(grayL, &pair.leftValid, xl, yl, side, ref)) continue;
      if (!extract_patch(grayR, &pair.rightValid, xr, yr, side, pos)) continue;
      if (!extract_patch(grayR, &pair.rightValid, xr + sign * psi, yr, side, neg)) continue;

      SourceMeta meta{scene.seed, 0, 1, xl, yl, static_cast<float>(thetaDeg)};
      out.samples.push_back({ref, pos, 1, 0, meta});
      out.samples.push_back({ref, neg, 0, static_cast<std::int8_t>(sign * psi), meta});
      ++found;
    }
  }
  return out;
}

std::vector<float> center_crop(std::span<const float> patch, int storedSize, int patchSize) {
  const int off = (storedSize - patchSize) / 2;
  std::vector<float> out(static_cast<std::size_t>(patchSize) * patchSize);
  for (int j = 0; j < patchSize; ++j) {
    for (int i = 0; i < patchSize; ++i) {
      out[static_cast<std::size_t>(j) * patchSize + i] =
          patch[static_cast<std::size_t>(j + off) * storedSize + (i + off)];
    }
  }
  return out;
}

std::vector<float> flip_horizontal(std::span<const float> patch, int side) {
  std::vector<float> out(patch.size());
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      out[static_cast<std::size_t>(j) * side + i] =
          patch[static_cast<std::size_t>(j) * side + (side - 1 - i)];
    }
  }
  return out;
}

namespace {

float sample_patch(std::span<const float> patch, int side, double x, double y) {
  x = std::clamp(x, 0.0, side - 1.0);
  y = std::clamp(y, 0.0, side - 1.0);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, side - 1), y1 = std::min(y0 + 1, side - 1);
  const double fx = x - x0, fy = y - y0;
  auto at = [&](int i, int j) -> double { return patch[static_cast<std::size_t>(j) * side + i]; };
  const double top = at(x0, y0) + (at(x1, y0) - at(x0, y0)) * fx;
  const double bottom = at(x0, y1) + (at(x1, y1) - at(x0, y1)) * fx;
  return static_cast<float>(top + (bottom - top) * fy);
}

}  // namespace

PatchSample augment(const PatchSample& sample, int patchSize, std::uint64_t seed,
                    const AugmentConfig& config) {
  const int side = patchSize + 2 * kGuard;
  require(sample.reference.size() == static_cast<std::size_t>(side) * side &&
              sample.candidate.size() == sample.reference.size(),
          ErrorKind::ShapeMismatch, "augment: sample lacks the guard band");

  // Draw every variate unconditionally so the stream layout does not depend
  // on which transforms fire.
  Rng rng(seed);
  const bool flip = coin(rng, config.flipProbability);
  const bool crop = coin(rng, config.cropProbability);
  const int dx = uniform_int(rng, -kGuard, kGuard);
  const int dy = uniform_int(rng, -kGuard, kGuard);
  const bool affine = coin(rng, config.affineProbability);
  const double rot = uniform(rng, -config.maxRotationDeg, config.maxRotationDeg) * std::numbers::pi / 180.0;
  const double scale = uniform(rng, config.minScale, config.maxScale);
  const bool contrast = coin(rng, config.contrastProbability);
  const double c = uniform(rng, config.minContrast, config.maxContrast);

  const double centre = (side - 1) / 2.0 + 0.0;
  const double half = (patchSize - 1) / 2.0;
  const double ox = centre + (crop ? dx : 0), oy = centre + (crop ? dy : 0);
  const double cr = std::cos(rot) / scale, sr = std::sin(rot) / scale;

  auto transform = [&](const std::vector<float>& in) {
    const std::vector<float> src = flip ? flip_horizontal(in, side) : in;
    std::vector<float> out(static_cast<std::size_t>(patchSize) * patchSize);
    for (int j = 0; j < patchSize; ++j) {
      for (int i = 0; i < patchSize; ++i) {
        const double u = i - half, v = j - half;
        float value;
        if (affine) {
          value = sample_patch(src, side, ox + cr * u - sr * v, oy + sr * u + cr * v);
        } else {
          value = src[static_cast<std::size_t>(oy + v) * side + static_cast<std::size_t>(ox + u)];
        }
        if (contrast) value = std::clamp(static_cast<float>(0.5 + c * (value - 0.5)), 0.0f, 1.0f);
        out[static_cast<std::size_t>(j) * patchSize + i] = value;
      }
    }
    return out;
  };

  PatchSample out;
  out.reference = transform(sample.reference);
  out.candidate = transform(sample.candidate);
  out.label = sample.label;
  out.psi = sample.psi;
  out.meta = sample.meta;
  return out;
}

// ---------------------------------------------------------------------------
// File format

namespace {
constexpr char kMagic[4] = {'S', '2', 'P', '2'};
}

std::size_t dataset_header_size() { return 4 + 2 + 2 + 8; }

std::size_t dataset_record_size(int storedSize) {
  return 1 + 1 + 4 + 2 * 4 * static_cast<std::size_t>(storedSize) * storedSize;
}

void write_dataset(const std::filesystem::path& path, const PatchDataset& dataset) {
  const int side = dataset.storedSize;
  const std::size_t n = static_cast<std::size_t>(side) * side;
  io::ByteWriter w;
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u16(kDatasetVersion);
  w.u16(static_cast<std::uint16_t>(side));
  w.u64(dataset.samples.size());
  w.bytes().reserve(dataset_header_size() + dataset.samples.size() * dataset_record_size(side) + 4);
  for (const auto& s : dataset.samples) {
    require(s.reference.size() == n && s.candidate.size() == n, ErrorKind::ShapeMismatch,
            "write_dataset: patch size mismatch");
    w.u8(s.label);
    w.i8(s.psi);
    w.f32(s.meta.theta);
    for (float v : s.reference) w.f32(v);
    for (float v : s.candidate) w.f32(v);
  }
  const auto payload = std::span(w.bytes()).subspan(dataset_header_size());
  w.u32(io::crc32(payload));
  io::write_file(path, w.bytes());
}

PatchDataset read_dataset(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  const auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    fail(ErrorKind::MagicMismatch, path.string() + ": not an S2P2 dataset");
  }
  const auto version = r.u16();
  require(version == kDatasetVersion, ErrorKind::InvalidArgument,
          path.string() + ": unsupported dataset version " + std::to_string(version));
  const int side = r.u16();
  const auto count = r.u64();
  require(side > 2 * kGuard && side % 2 == 1, ErrorKind::InvalidArgument,
          path.string() + ": invalid patch size");
  const std::size_t record = dataset_record_size(side);
  if (count > (bytes.size() - dataset_header_size()) / record ||
      bytes.size() < dataset_header_size() + count * record + 4) {
    fail(ErrorKind::Truncation, path.string() + ": truncated dataset");
  }
  const auto payload = std::span(bytes).subspan(dataset_header_size(), count * record);
  {
    io::ByteReader tail{std::span(bytes).subspan(dataset_header_size() + count * record)};
    if (tail.u32() != io::crc32(payload)) {
      fail(ErrorKind::Checksum, path.string() + ": checksum mismatch");
    }
  }

  PatchDataset ds;
  ds.storedSize = side;
  ds.patchSize = side - 2 * kGuard;
  ds.samples.resize(count);
  const std::size_t n = static_cast<std::size_t>(side) * side;
  for (auto& s : ds.samples) {
    s.label = r.u8();
    s.psi = r.i8();
    s.meta.theta = r.f32();
    s.reference.resize(n);
    s.candidate.resize(n);
    std::memcpy(s.reference.data(), r.raw(4 * n).data(), 4 * n);
    std::memcpy(s.candidate.data(), r.raw(4 * n).data(), 4 * n);
  }
  return ds;
}

}  // namespace wbs::dataset
