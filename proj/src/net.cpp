#include "wbs/net.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "wbs/error.hpp"
#include "wbs/io.hpp"
#include "wbs/rng.hpp"

namespace wbs::net {

// ---------------------------------------------------------------------------
// Parameter layout

namespace {

std::vector<TensorInfo> make_layout() {
  std::vector<TensorInfo> layout;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> shape, int fanIn) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    layout.push_back({std::move(name), std::move(shape), offset, size, fanIn});
    offset += size;
  };
  for (int l = 0; l < 4; ++l) {
    const auto& c = kConvLayers[l];
    const std::string prefix = "conv" + std::to_string(l + 1);
    add(prefix + ".weight", {c.outChannels, c.inChannels, 3, 3}, c.inChannels * 9);
    add(prefix + ".bias", {c.outChannels}, 0);
  }
  add("fc1.weight", {kHidden1, 2 * kFeatures}, 2 * kFeatures);
  add("fc1.bias", {kHidden1}, 0);
  add("fc2.weight", {kHidden2, kHidden1}, kHidden1);
  add("fc2.bias", {kHidden2}, 0);
  add("fc3.weight", {1, kHidden2}, kHidden2);
  add("fc3.bias", {1}, 0);
  return layout;
}

std::pair<int, int> matrix_dims(const TensorInfo& t) {
  if (t.shape.size() == 1) return {t.shape[0], 1};
  return {t.shape[0], static_cast<int>(t.size / t.shape[0])};
}

}  // namespace

const std::vector<TensorInfo>& parameter_layout() {
  static const std::vector<TensorInfo> layout = make_layout();
  return layout;
}

std::size_t parameter_count() {
  const auto& l = parameter_layout();
  return l.back().offset + l.back().size;
}

const TensorInfo& tensor(const std::string& name) {
  for (const auto& t : parameter_layout()) {
    if (t.name == name) return t;
  }
  fail(ErrorKind::InvalidArgument, "unknown tensor " + name);
}

template <typename T>
Eigen::Map<RowMatrix<T>> BasicSiameseNetwork<T>::weight(const std::string& name) {
  const auto& t = tensor(name);
  const auto [r, c] = matrix_dims(t);
  return {params.data() + t.offset, r, c};
}

template <typename T>
Eigen::Map<const RowMatrix<T>> BasicSiameseNetwork<T>::weight(const std::string& name) const {
  const auto& t = tensor(name);
  const auto [r, c] = matrix_dims(t);
  return {params.data() + t.offset, r, c};
}

template <typename T>
std::span<T> BasicSiameseNetwork<T>::view(const std::string& name) {
  const auto& t = tensor(name);
  return {params.data() + t.offset, t.size};
}

template <typename T>
std::span<const T> BasicSiameseNetwork<T>::view(const std::string& name) const {
  const auto& t = tensor(name);
  return {params.data() + t.offset, t.size};
}

template <typename T>
BasicSiameseNetwork<T> init(std::uint64_t seed) {
  BasicSiameseNetwork<T> net;
  Rng rng(substream(seed, "init"));
  for (const auto& t : parameter_layout()) {
    if (t.fanIn == 0) continue;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / t.fanIn));
    for (std::size_t i = 0; i < t.size; ++i) net.params[t.offset + i] = static_cast<T>(normal(rng));
  }
  return net;
}

// ---------------------------------------------------------------------------
// Forward / backward kernels

namespace {

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias_row(const BasicSiameseNetwork<T>& net,
                                                               const char* name) {
  const auto& t = tensor(name);
  return {net.params.data() + t.offset, static_cast<Eigen::Index>(t.size)};
}

// Pairs per work unit; fixed so reductions do not depend on thread count.
constexpr std::size_t kChunk = 32;

struct ConvParams {
  const char* weight;
  const char* bias;
};
constexpr std::array<ConvParams, 4> kConvNames = {{{"conv1.weight", "conv1.bias"},
                                                   {"conv2.weight", "conv2.bias"},
                                                   {"conv3.weight", "conv3.bias"},
                                                   {"conv4.weight", "conv4.bias"}}};

// Input activations are (patch, y, x) rows by channel columns; the output
// column index is (ky*3 + kx)*cin + ci so each tap copies a contiguous run.
// Weights stored as (out, in, 3, 3) are permuted to match.
template <typename T>
void im2col(const RowMatrix<T>& in, const ConvLayerShape& s, std::size_t patches, RowMatrix<T>& cols) {
  const int is = s.inSize, os = s.outSize, cin = s.inChannels;
  cols.resize(static_cast<Eigen::Index>(patches) * os * os, cin * 9);
  for (std::size_t m = 0; m < patches; ++m) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        const Eigen::Index row = (static_cast<Eigen::Index>(m) * os + oy) * os + ox;
        T* dst = cols.row(row).data();
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const T* src = in.row((static_cast<Eigen::Index>(m) * is + oy + ky) * is + ox + kx).data();
            std::copy(src, src + cin, dst + (ky * 3 + kx) * cin);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const RowMatrix<T>& gcols, const ConvLayerShape& s, std::size_t patches, RowMatrix<T>& gin) {
  const int is = s.inSize, os = s.outSize, cin = s.inChannels;
  gin.setZero(static_cast<Eigen::Index>(patches) * is * is, cin);
  for (std::size_t m = 0; m < patches; ++m) {
    for (int oy = 0; oy < os; ++oy) {
      for (int ox = 0; ox < os; ++ox) {
        const Eigen::Index row = (static_cast<Eigen::Index>(m) * os + oy) * os + ox;
        const T* src = gcols.row(row).data();
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            T* dst = gin.row((static_cast<Eigen::Index>(m) * is + oy + ky) * is + ox + kx).data();
            const T* tap = src + (ky * 3 + kx) * cin;
            for (int ci = 0; ci < cin; ++ci) dst[ci] += tap[ci];
          }
        }
      }
    }
  }
}

// (out, ci*9 + k) -> (out, k*cin + ci) and back.
template <typename T>
RowMatrix<T> tap_major(const Eigen::Map<const RowMatrix<T>>& w, int cin) {
  RowMatrix<T> out(w.rows(), w.cols());
  for (Eigen::Index o = 0; o < w.rows(); ++o)
    for (int ci = 0; ci < cin; ++ci)
      for (int k = 0; k < 9; ++k) out(o, k * cin + ci) = w(o, ci * 9 + k);
  return out;
}

template <typename T>
RowMatrix<T> channel_major(const RowMatrix<T>& w, int cin) {
  RowMatrix<T> out(w.rows(), w.cols());
  for (Eigen::Index o = 0; o < w.rows(); ++o)
    for (int ci = 0; ci < cin; ++ci)
      for (int k = 0; k < 9; ++k) out(o, ci * 9 + k) = w(o, k * cin + ci);
  return out;
}

template <typename T>
struct Tape {
  std::size_t pairs = 0;
  std::array<RowMatrix<T>, 4> cols;
  std::array<RowMatrix<T>, 4> act;
  RowMatrix<T> z0, h1, h2;
  Vec<T> logit;
};

template <typename T>
T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

template <typename T>
void conv_tower(const BasicSiameseNetwork<T>& net, std::span<const T> patches, std::size_t m,
                Tape<T>& tape) {
  RowMatrix<T> input = Eigen::Map<const RowMatrix<T>>(patches.data(), static_cast<Eigen::Index>(m) * kPatchArea, 1);
  const RowMatrix<T>* prev = &input;
  for (int l = 0; l < 4; ++l) {
    im2col(*prev, kConvLayers[l], m, tape.cols[l]);
    const RowMatrix<T> W = tap_major<T>(net.weight(kConvNames[l].weight), kConvLayers[l].inChannels);
    const auto b = bias_row(net, kConvNames[l].bias);
    auto& a = tape.act[l];
    a.noalias() = tape.cols[l] * W.transpose();
    a.rowwise() += b;
    a = a.cwiseMax(T(0));
    prev = &a;
  }
}

// Pairs [a_i, b_i]; the tower runs on all 2n patches with shared weights.
template <typename T>
void forward_tape(const BasicSiameseNetwork<T>& net, std::span<const T> a, std::span<const T> b,
                  std::size_t n, Tape<T>& tape) {
  tape.pairs = n;
  std::vector<T> stacked(2 * n * kPatchArea);
  std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n * kPatchArea), stacked.begin());
  std::copy(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n * kPatchArea),
            stacked.begin() + static_cast<std::ptrdiff_t>(n * kPatchArea));
  conv_tower(net, std::span<const T>(stacked), 2 * n, tape);

  const auto& f = tape.act[3];  // 2n x 64
  const auto rows = static_cast<Eigen::Index>(n);
  tape.z0.resize(rows, 2 * kFeatures);
  tape.z0.leftCols(kFeatures) = f.topRows(rows);
  tape.z0.rightCols(kFeatures) = f.bottomRows(rows);

  tape.h1.noalias() = tape.z0 * net.weight("fc1.weight").transpose();
  tape.h1.rowwise() += bias_row(net, "fc1.bias");
  tape.h1 = tape.h1.cwiseMax(T(0));
  tape.h2.noalias() = tape.h1 * net.weight("fc2.weight").transpose();
  tape.h2.rowwise() += bias_row(net, "fc2.bias");
  tape.h2 = tape.h2.cwiseMax(T(0));
  tape.logit = tape.h2 * net.weight("fc3.weight").transpose();
  tape.logit.array() += net.params[tensor("fc3.bias").offset];
}

template <typename T>
void accumulate(std::vector<T>& grad, const std::string& name, const RowMatrix<T>& g) {
  const auto& t = tensor(name);
  const auto [r, c] = matrix_dims(t);
  Eigen::Map<RowMatrix<T>>(grad.data() + t.offset, r, c) += g;
}

// Sum (not mean) of per-sample loss gradients, scaled by `scale`.
template <typename T>
double chunk_gradient(const BasicSiameseNetwork<T>& net, std::span<const T> a, std::span<const T> b,
                      std::span<const std::uint8_t> labels, T scale, std::vector<T>& grad,
                      std::span<T> probs) {
  const std::size_t n = labels.size();
  Tape<T> tape;
  forward_tape(net, a, b, n, tape);
  const auto rows = static_cast<Eigen::Index>(n);

  double loss = 0.0;
  Vec<T> glogit(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const T p = sigmoid(tape.logit(i));
    probs[static_cast<std::size_t>(i)] = p;
    const int y = labels[static_cast<std::size_t>(i)];
    loss += bce_loss(static_cast<double>(p), y);
    const bool clamped = p < T(kProbabilityClamp) || p > T(1.0 - kProbabilityClamp);
    glogit(i) = clamped ? T(0) : (p - T(y)) * scale;
  }

  accumulate<T>(grad, "fc3.weight", glogit.transpose() * tape.h2);
  accumulate<T>(grad, "fc3.bias", RowMatrix<T>::Constant(1, 1, glogit.sum()));
  RowMatrix<T> g2 = glogit * net.weight("fc3.weight");
  g2 = g2.cwiseProduct((tape.h2.array() > T(0)).template cast<T>().matrix());
  accumulate<T>(grad, "fc2.weight", g2.transpose() * tape.h1);
  accumulate<T>(grad, "fc2.bias", g2.colwise().sum());
  RowMatrix<T> g1 = g2 * net.weight("fc2.weight");
  g1 = g1.cwiseProduct((tape.h1.array() > T(0)).template cast<T>().matrix());
  accumulate<T>(grad, "fc1.weight", g1.transpose() * tape.z0);
  accumulate<T>(grad, "fc1.bias", g1.colwise().sum());
  const RowMatrix<T> gz0 = g1 * net.weight("fc1.weight");

  RowMatrix<T> gact(2 * rows, kFeatures);
  gact.topRows(rows) = gz0.leftCols(kFeatures);
  gact.bottomRows(rows) = gz0.rightCols(kFeatures);
  for (int l = 3; l >= 0; --l) {
    const RowMatrix<T> gpre =
        gact.cwiseProduct((tape.act[l].array() > T(0)).template cast<T>().matrix());
    const int cin = kConvLayers[l].inChannels;
    accumulate<T>(grad, kConvNames[l].weight, channel_major<T>(gpre.transpose() * tape.cols[l], cin));
    accumulate<T>(grad, kConvNames[l].bias, gpre.colwise().sum());
    if (l > 0) {
      const RowMatrix<T> gcols = gpre * tap_major<T>(net.weight(kConvNames[l].weight), cin);
      col2im(gcols, kConvLayers[l], 2 * n, gact);
    }
  }
  return loss;
}

template <typename T>
void check_patch(std::span<const T> p, std::size_t n, const char* what) {
  if (p.size() < n * kPatchArea) {
    fail(ErrorKind::ShapeMismatch, std::string(what) + ": expected 9x9 patches");
  }
}

}  // namespace

template <typename T>
std::vector<T> forward_batch(const BasicSiameseNetwork<T>& net, std::span<const T> a,
                             std::span<const T> b, std::size_t n) {
  check_patch(a, n, "forward");
  check_patch(b, n, "forward");
  std::vector<T> out(n);
  Tape<T> tape;
  constexpr std::size_t kInferenceChunk = 256;
  for (std::size_t start = 0; start < n; start += kInferenceChunk) {
    const std::size_t m = std::min(kInferenceChunk, n - start);
    forward_tape(net, a.subspan(start * kPatchArea), b.subspan(start * kPatchArea), m, tape);
    for (std::size_t i = 0; i < m; ++i) out[start + i] = sigmoid(tape.logit(static_cast<Eigen::Index>(i)));
  }
  return out;
}

template <typename T>
T forward(const BasicSiameseNetwork<T>& net, std::span<const T> patchA, std::span<const T> patchB) {
  if (patchA.size() != kPatchArea || patchB.size() != kPatchArea) {
    fail(ErrorKind::ShapeMismatch, "forward: patches must be 9x9");
  }
  return forward_batch(net, patchA, patchB, 1)[0];
}

template <typename T>
RowMatrix<T> features(const BasicSiameseNetwork<T>& net, std::span<const T> patches, std::size_t n) {
  check_patch(patches, n, "features");
  RowMatrix<T> out(static_cast<Eigen::Index>(n), kFeatures);
  Tape<T> tape;
  constexpr std::size_t kFeatureChunk = 512;
  for (std::size_t start = 0; start < n; start += kFeatureChunk) {
    const std::size_t m = std::min(kFeatureChunk, n - start);
    conv_tower(net, patches.subspan(start * kPatchArea, m * kPatchArea), m, tape);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(m)) = tape.act[3];
  }
  return out;
}

template <typename T>
RowMatrix<T> reference_half(const BasicSiameseNetwork<T>& net, const RowMatrix<T>& feats) {
  RowMatrix<T> h = feats * net.weight("fc1.weight").leftCols(kFeatures).transpose();
  h.rowwise() += bias_row(net, "fc1.bias");
  return h;
}

template <typename T>
RowMatrix<T> candidate_half(const BasicSiameseNetwork<T>& net, const RowMatrix<T>& feats) {
  return feats * net.weight("fc1.weight").rightCols(kFeatures).transpose();
}

template <typename T>
void classifier_head(const BasicSiameseNetwork<T>& net, const RowMatrix<T>& h1pre,
                     std::span<T> probabilities) {
  const RowMatrix<T> h1 = h1pre.cwiseMax(T(0));
  RowMatrix<T> h2 = h1 * net.weight("fc2.weight").transpose();
  h2.rowwise() += bias_row(net, "fc2.bias");
  h2 = h2.cwiseMax(T(0));
  const Vec<T> logit = h2 * net.weight("fc3.weight").transpose();
  const T bias = net.params[tensor("fc3.bias").offset];
  for (Eigen::Index i = 0; i < logit.size(); ++i) {
    probabilities[static_cast<std::size_t>(i)] = sigmoid(logit(i) + bias);
  }
}

double bce_loss(double p, int label) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return label ? -std::log(q) : -std::log(1.0 - q);
}

double bce_grad(double p, int label) {
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return label ? -1.0 / p : 1.0 / (1.0 - p);
}

template <typename T>
GradientResult<T> backward(const BasicSiameseNetwork<T>& net, const Batch<T>& batch, Backend backend) {
  const std::size_t n = batch.size();
  require(n > 0, ErrorKind::InvalidArgument, "backward: empty batch");
  check_patch(batch.a, n, "backward");
  check_patch(batch.b, n, "backward");

  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::vector<T>> partial(chunks, std::vector<T>(parameter_count(), T(0)));
  std::vector<double> losses(chunks, 0.0);
  GradientResult<T> result;
  result.probabilities.resize(n);
  const T scale = T(1) / static_cast<T>(n);

  parallel_for(backend, static_cast<std::int64_t>(chunks), [&](std::int64_t c) {
    const std::size_t start = static_cast<std::size_t>(c) * kChunk;
    const std::size_t m = std::min(kChunk, n - start);
    losses[c] = chunk_gradient(net, batch.a.subspan(start * kPatchArea, m * kPatchArea),
                               batch.b.subspan(start * kPatchArea, m * kPatchArea),
                               batch.labels.subspan(start, m), scale, partial[c],
                               std::span<T>(result.probabilities).subspan(start, m));
  });

  result.gradient = std::move(partial[0]);
  double loss = losses[0];
  for (std::size_t c = 1; c < chunks; ++c) {
    for (std::size_t i = 0; i < result.gradient.size(); ++i) result.gradient[i] += partial[c][i];
    loss += losses[c];
  }
  result.meanLoss = loss / static_cast<double>(n);
  return result;
}

template <typename T>
double batch_loss(const BasicSiameseNetwork<T>& net, const Batch<T>& batch) {
  const auto p = forward_batch(net, batch.a, batch.b, batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) loss += bce_loss(static_cast<double>(p[i]), batch.labels[i]);
  return loss / static_cast<double>(p.size());
}

// ---------------------------------------------------------------------------
// Optimisation

void TrainConfig::validate() const {
  require(lr0 > 0 && lrDecayFactor > 0 && lrDecayEveryEpochs > 0 && epochs >= 1 && batchSize > 0 &&
              momentum >= 0 && weightDecay >= 0,
          ErrorKind::InvalidArgument, "train: invalid configuration");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  require(epoch >= 0 && epoch < cfg.epochs, ErrorKind::InvalidArgument, "lr_at: epoch out of range");
  return cfg.lr0 / std::pow(cfg.lrDecayFactor, epoch / cfg.lrDecayEveryEpochs);
}

template <typename T>
void sgd_step(std::span<T> w, std::span<const T> g, std::span<T> v, double lr, const TrainConfig& cfg) {
  require(w.size() == g.size() && w.size() == v.size(), ErrorKind::ShapeMismatch,
          "sgd_step: buffer sizes differ");
  const T m = static_cast<T>(cfg.momentum), wd = static_cast<T>(cfg.weightDecay), eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = m * v[i] + g[i] + wd * w[i];
    w[i] -= eta * v[i];
  }
}

namespace {

void fill_inputs(const dataset::PatchDataset& data, std::span<const std::size_t> order, bool augment,
                 const dataset::AugmentConfig& aug, std::uint64_t augSeed, Backend backend,
                 std::vector<float>& a, std::vector<float>& b, std::vector<std::uint8_t>& labels) {
  const std::size_t n = order.size();
  a.resize(n * kPatchArea);
  b.resize(n * kPatchArea);
  labels.resize(n);
  parallel_for(backend, static_cast<std::int64_t>(n), [&](std::int64_t i) {
    const auto& s = data.samples[order[i]];
    std::vector<float> ra, rb;
    if (augment) {
      auto t = dataset::augment(s, data.patchSize, splitmix64(augSeed ^ order[i]), aug);
      ra = std::move(t.reference);
      rb = std::move(t.candidate);
    } else {
      ra = dataset::center_crop(s.reference, data.storedSize, data.patchSize);
      rb = dataset::center_crop(s.candidate, data.storedSize, data.patchSize);
    }
    std::copy(ra.begin(), ra.end(), a.begin() + static_cast<std::ptrdiff_t>(i) * kPatchArea);
    std::copy(rb.begin(), rb.end(), b.begin() + static_cast<std::ptrdiff_t>(i) * kPatchArea);
    labels[i] = s.label;
  });
}

}  // namespace

double accuracy(const SiameseNetwork& net, const dataset::PatchDataset& data) {
  if (data.samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  require(data.patchSize == kPatch, ErrorKind::ShapeMismatch, "accuracy: dataset patch size must be 9");
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> a, b;
  std::vector<std::uint8_t> labels;
  fill_inputs(data, order, false, {}, 0, Backend::Parallel, a, b, labels);
  const auto p = forward_batch<float>(net, a, b, labels.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += ((p[i] > 0.5f) == (labels[i] == 1));
  return static_cast<double>(correct) / static_cast<double>(p.size());
}

TrainResult train(const dataset::PatchDataset& data, const TrainConfig& cfg,
                  const dataset::PatchDataset* validation,
                  const std::function<void(const EpochLog&)>& onEpoch) {
  cfg.validate();
  require(!data.samples.empty(), ErrorKind::InvalidArgument, "train: empty dataset");
  require(data.positives() == data.negatives(), ErrorKind::InvalidArgument, "train: unbalanced dataset");
  require(data.patchSize == kPatch, ErrorKind::ShapeMismatch, "train: dataset patch size must be 9");

  TrainResult result;
  result.net = init<float>(cfg.seed);
  std::vector<float> velocity(parameter_count(), 0.0f);
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> a, b;
  std::vector<std::uint8_t> labels;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle(substream(cfg.seed, "shuffle") + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);
    const double lr = lr_at(epoch, cfg);
    const std::uint64_t augSeed =
        substream(cfg.seed, "augment") ^ (static_cast<std::uint64_t>(epoch) << 40);
    double lossSum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batchSize) {
      const std::size_t n = std::min<std::size_t>(cfg.batchSize, order.size() - start);
      fill_inputs(data, std::span(order).subspan(start, n), cfg.augment, cfg.augmentation, augSeed,
                  cfg.backend, a, b, labels);
      const auto g = backward<float>(result.net, {a, b, labels}, cfg.backend);
      sgd_step<float>(result.net.params, g.gradient, velocity, lr, cfg);
      lossSum += g.meanLoss * static_cast<double>(n);
    }
    EpochLog entry{epoch, lr, lossSum / static_cast<double>(order.size()),
                   validation ? accuracy(result.net, *validation)
                              : std::numeric_limits<double>::quiet_NaN()};
    result.lossHistory.push_back(entry.meanLoss);
    result.log.push_back(entry);
    if (onEpoch) onEpoch(entry);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Weight files

namespace {
constexpr char kWeightsMagic[4] = {'W', 'S', 'N', 'W'};

void write_table(io::ByteWriter& w) {
  const auto& layout = parameter_layout();
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kWeightsMagic), 4));
  w.u16(kWeightsVersion);
  w.u16(static_cast<std::uint16_t>(layout.size()));
  for (const auto& t : layout) {
    w.str(t.name);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u64(t.offset);
  }
  w.u64(parameter_count());
}
}  // namespace

std::size_t weights_file_size() {
  io::ByteWriter w;
  write_table(w);
  return w.size() + 4 * parameter_count() + 4;
}

void save_weights(const std::filesystem::path& path, const SiameseNetwork& net) {
  io::ByteWriter w;
  write_table(w);
  for (float v : net.params) w.f32(v);
  w.u32(io::crc32(w.bytes()));
  io::write_file(path, w.bytes());
}

SiameseNetwork load_weights(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingWeights, "missing weights " + path.string());
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  const auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kWeightsMagic, 4) != 0) {
    fail(ErrorKind::MagicMismatch, path.string() + ": not a WSNW weight file");
  }
  require(r.u16() == kWeightsVersion, ErrorKind::InvalidArgument, path.string() + ": unsupported version");
  const auto& layout = parameter_layout();
  const auto count = r.u16();
  require(count == layout.size(), ErrorKind::ShapeMismatch, path.string() + ": tensor count mismatch");
  for (const auto& t : layout) {
    const std::string name = r.str();
    const auto ndim = r.u8();
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    const auto offset = r.u64();
    require(name == t.name && shape == t.shape && offset == t.offset, ErrorKind::ShapeMismatch,
            path.string() + ": layout mismatch at tensor " + name);
  }
  const auto n = r.u64();
  require(n == parameter_count(), ErrorKind::ShapeMismatch, path.string() + ": payload size mismatch");
  if (r.remaining() < 4 * n + 4) fail(ErrorKind::Truncation, path.string() + ": truncated weight file");
  SiameseNetwork net;
  std::memcpy(net.params.data(), r.raw(4 * n).data(), 4 * n);
  const std::size_t covered = r.position();
  if (r.u32() != io::crc32(std::span(bytes).first(covered))) {
    fail(ErrorKind::Checksum, path.string() + ": checksum mismatch");
  }
  return net;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,lr,meanLoss,valAccuracy\n" << std::setprecision(9);
  for (const auto& e : log) out << e.epoch << ',' << e.lr << ',' << e.meanLoss << ',' << e.valAccuracy << '\n';
  const std::string s = out.str();
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

#define WBS_INSTANTIATE(T)                                                                        \
  template struct BasicSiameseNetwork<T>;                                                         \
  template BasicSiameseNetwork<T> init<T>(std::uint64_t);                                         \
  template T forward<T>(const BasicSiameseNetwork<T>&, std::span<const T>, std::span<const T>);   \
  template std::vector<T> forward_batch<T>(const BasicSiameseNetwork<T>&, std::span<const T>,     \
                                           std::span<const T>, std::size_t);                      \
  template RowMatrix<T> features<T>(const BasicSiameseNetwork<T>&, std::span<const T>, std::size_t); \
  template RowMatrix<T> reference_half<T>(const BasicSiameseNetwork<T>&, const RowMatrix<T>&);    \
  template RowMatrix<T> candidate_half<T>(const BasicSiameseNetwork<T>&, const RowMatrix<T>&);    \
  template void classifier_head<T>(const BasicSiameseNetwork<T>&, const RowMatrix<T>&, std::span<T>); \
  template GradientResult<T> backward<T>(const BasicSiameseNetwork<T>&, const Batch<T>&, Backend); \
  template double batch_loss<T>(const BasicSiameseNetwork<T>&, const Batch<T>&);                  \
  template void sgd_step<T>(std::span<T>, std::span<const T>, std::span<T>, double, const TrainConfig&);

WBS_INSTANTIATE(float)
WBS_INSTANTIATE(double)

}  // namespace wbs::net
