#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wbs/dataset.hpp"
#include "wbs/parallel.hpp"

namespace wbs::net {

inline constexpr int kPatch = 9;
inline constexpr int kPatchArea = kPatch * kPatch;
inline constexpr int kFeatures = 64;
inline constexpr int kHidden1 = 128;
inline constexpr int kHidden2 = 64;

// Valid 3x3 convolutions, stride 1: 9 -> 7 -> 5 -> 3 -> 1.
struct ConvLayerShape {
  int inChannels, outChannels, inSize, outSize;
};
inline constexpr std::array<ConvLayerShape, 4> kConvLayers = {{
    {1, 32, 9, 7}, {32, 32, 7, 5}, {32, 64, 5, 3}, {64, 64, 3, 1}}};

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  int fanIn = 0;  // 0 for biases
};

// Flat parameter layout shared by weights, gradients and momentum buffers.
const std::vector<TensorInfo>& parameter_layout();
std::size_t parameter_count();
const TensorInfo& tensor(const std::string& name);

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Siamese patch classifier: a shared four-layer conv tower maps each 9x9
// patch to 64 features; the concatenated pair goes through FC 128->128->64->1
// and a sigmoid.
template <typename T>
struct BasicSiameseNetwork {
  std::vector<T> params = std::vector<T>(parameter_count(), T(0));

  Eigen::Map<RowMatrix<T>> weight(const std::string& name);
  Eigen::Map<const RowMatrix<T>> weight(const std::string& name) const;
  std::span<T> view(const std::string& name);
  std::span<const T> view(const std::string& name) const;

  template <typename U>
  BasicSiameseNetwork<U> cast() const {
    BasicSiameseNetwork<U> out;
    for (std::size_t i = 0; i < params.size(); ++i) out.params[i] = static_cast<U>(params[i]);
    return out;
  }
};

using SiameseNetwork = BasicSiameseNetwork<float>;
using SiameseNetwork64 = BasicSiameseNetwork<double>;

// He-normal weights, zero biases; deterministic per seed.
template <typename T>
BasicSiameseNetwork<T> init(std::uint64_t seed);

// Similarity in (0,1) for one pair. Throws ShapeMismatch unless both patches
// are 9x9.
template <typename T>
T forward(const BasicSiameseNetwork<T>& net, std::span<const T> patchA, std::span<const T> patchB);

// Batched forward: `a` and `b` hold n row-major 9x9 patches each.
template <typename T>
std::vector<T> forward_batch(const BasicSiameseNetwork<T>& net, std::span<const T> a,
                             std::span<const T> b, std::size_t n);

// Conv tower only: n patches -> n x 64 features.
template <typename T>
RowMatrix<T> features(const BasicSiameseNetwork<T>& net, std::span<const T> patches, std::size_t n);

// First FC layer split by input half, so pair scores can reuse per-pixel
// work: h1 = relu(refHalf(fA) + candHalf(fB)), with the bias in refHalf.
template <typename T>
RowMatrix<T> reference_half(const BasicSiameseNetwork<T>& net, const RowMatrix<T>& feats);
template <typename T>
RowMatrix<T> candidate_half(const BasicSiameseNetwork<T>& net, const RowMatrix<T>& feats);
// Remaining classifier from first-layer pre-activations (rows) to
// probabilities.
template <typename T>
void classifier_head(const BasicSiameseNetwork<T>& net, const RowMatrix<T>& h1pre,
                     std::span<T> probabilities);

inline constexpr double kProbabilityClamp = 1e-7;

double bce_loss(double p, int label);
// d loss / d p; zero where the clamp is active.
double bce_grad(double p, int label);

template <typename T>
struct Batch {
  std::span<const T> a;  // n x 81
  std::span<const T> b;  // n x 81
  std::span<const std::uint8_t> labels;
  std::size_t size() const { return labels.size(); }
};

template <typename T>
struct GradientResult {
  std::vector<T> gradient;  // mean over the batch
  double meanLoss = 0.0;
  std::vector<T> probabilities;
};

// Exact reverse-mode gradient of the mean BCE loss. Work is split into
// fixed chunks (independent of thread count) that are reduced in order.
template <typename T>
GradientResult<T> backward(const BasicSiameseNetwork<T>& net, const Batch<T>& batch,
                           Backend backend = Backend::Parallel);

template <typename T>
double batch_loss(const BasicSiameseNetwork<T>& net, const Batch<T>& batch);

struct TrainConfig {
  double lr0 = 3e-3;
  double lrDecayFactor = 10.0;
  int lrDecayEveryEpochs = 10;
  int epochs = 15;
  double momentum = 0.9;
  double weightDecay = 1e-4;
  int batchSize = 128;
  std::uint64_t seed = 42;
  bool augment = true;
  dataset::AugmentConfig augmentation;
  Backend backend = Backend::Parallel;

  void validate() const;
};

double lr_at(int epoch, const TrainConfig& cfg);

// v <- momentum*v + grad + weightDecay*w ; w <- w - lr*v
template <typename T>
void sgd_step(std::span<T> weights, std::span<const T> grads, std::span<T> velocity, double lr,
              const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double meanLoss = 0.0;
  double valAccuracy = 0.0;  // NaN without a validation set
};

struct TrainResult {
  SiameseNetwork net;
  std::vector<double> lossHistory;
  std::vector<EpochLog> log;
};

TrainResult train(const dataset::PatchDataset& data, const TrainConfig& cfg,
                  const dataset::PatchDataset* validation = nullptr,
                  const std::function<void(const EpochLog&)>& onEpoch = {});

// Fraction of centre-cropped samples classified correctly at p > 0.5.
double accuracy(const SiameseNetwork& net, const dataset::PatchDataset& data);

// "WSNW" weight file: version u16, tensor count u16, per tensor
// (name u16+bytes, ndim u8, dims u32..., offset u64 in floats), payload
// length u64, f32 payload, CRC32 of everything before it.
inline constexpr std::uint16_t kWeightsVersion = 1;
std::size_t weights_file_size();
void save_weights(const std::filesystem::path& path, const SiameseNetwork& net);
SiameseNetwork load_weights(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace wbs::net
