#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "wbs/error.hpp"
#include "wbs/net.hpp"

using namespace wbs;
using namespace wbs::net;
namespace fs = std::filesystem;

namespace {

std::vector<float> random_patches(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(n * kPatchArea);
  for (auto& x : v) x = u(rng);
  return v;
}

template <typename T>
std::vector<T> widen(const std::vector<float>& v) {
  return std::vector<T>(v.begin(), v.end());
}

// Positives: identical patches. Negatives: the inverted patch.
dataset::PatchDataset toy_dataset(int pairs, std::uint64_t seed) {
  dataset::PatchDataset d;
  d.patchSize = 9;
  d.storedSize = 13;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int i = 0; i < pairs; ++i) {
    std::vector<float> p(169);
    for (auto& x : p) x = u(rng);
    std::vector<float> inv(169);
    for (int k = 0; k < 169; ++k) inv[k] = 1.0f - p[k];
    d.samples.push_back({p, p, 1, 0, {}});
    d.samples.push_back({p, inv, 0, 4, {}});
  }
  return d;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "wbs_test_net";
  fs::create_directories(dir);
  return dir / name;
}

ErrorKind load_error(const fs::path& p) {
  try {
    load_weights(p);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Invariant;
}

}  // namespace

TEST(Layout, ShapesAndCount) {
  EXPECT_EQ(parameter_count(), 32u * 9 + 32 + 32 * 32 * 9 + 32 + 64 * 32 * 9 + 64 + 64 * 64 * 9 + 64 +
                                   128 * 128 + 128 + 64 * 128 + 64 + 64 + 1);
  EXPECT_EQ(tensor("conv2.weight").shape, (std::vector<int>{32, 32, 3, 3}));
  EXPECT_EQ(tensor("fc1.weight").shape, (std::vector<int>{128, 128}));
  EXPECT_THROW(tensor("conv9.weight"), Error);
}

TEST(Init, DeterministicZeroBiasesAndScaledWeights) {
  const auto a = init<float>(5), b = init<float>(5), c = init<float>(6);
  EXPECT_EQ(a.params, b.params);
  EXPECT_NE(a.params, c.params);
  for (const auto& t : parameter_layout()) {
    if (t.fanIn == 0) {
      for (std::size_t i = 0; i < t.size; ++i) ASSERT_EQ(a.params[t.offset + i], 0.0f);
      continue;
    }
    // Pool ten seeds for the small layers.
    double sq = 0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto net = init<double>(seed);
      for (std::size_t i = 0; i < t.size; ++i) sq += net.params[t.offset + i] * net.params[t.offset + i];
      n += t.size;
    }
    const double expected = std::sqrt(2.0 / t.fanIn);
    EXPECT_NEAR(std::sqrt(sq / n), expected, 0.1 * expected) << t.name;
  }
}

TEST(Forward, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto net = init<float>(seed % 5);
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, 0.05f);
    for (const auto& t : parameter_layout())
      if (t.fanIn == 0)
        for (std::size_t i = 0; i < t.size; ++i) net.params[t.offset + i] = n(rng);
    const auto pa = random_patches(1, 100 + seed), pb = random_patches(1, 200 + seed);
    const float p = forward<float>(net, pa, pb);
    const double expect = oracle::net_forward<float>(net, pa, pb);
    EXPECT_NEAR(p, expect, 1e-6);
    EXPECT_GT(p, 0.0f);
    EXPECT_LT(p, 1.0f);
    // The 64-bit path agrees far more tightly.
    const auto net64 = net.cast<double>();
    const auto pa64 = widen<double>(pa), pb64 = widen<double>(pb);
    EXPECT_NEAR(forward<double>(net64, pa64, pb64), oracle::net_forward<double>(net64, pa64, pb64), 1e-12);
  }
}

TEST(Forward, ZeroFinalLayerGivesHalf) {
  auto net = init<float>(1);
  for (auto& v : net.view("fc3.weight")) v = 0.0f;
  for (auto& v : net.view("fc3.bias")) v = 0.0f;
  const auto x = random_patches(1, 3);
  EXPECT_EQ(forward<float>(net, x, x), 0.5f);
}

TEST(Forward, SwappedInputsStayInRange) {
  const auto net = init<float>(2);
  const auto a = random_patches(1, 4), b = random_patches(1, 5);
  for (float p : {forward<float>(net, a, b), forward<float>(net, b, a)}) {
    EXPECT_GT(p, 0.0f);
    EXPECT_LT(p, 1.0f);
  }
}

TEST(Forward, ShapeMismatch) {
  const auto net = init<float>(2);
  std::vector<float> small(80, 0.5f), ok(81, 0.5f);
  try {
    forward<float>(net, small, ok);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Forward, BatchAndSplitClassifierAgree) {
  const auto net = init<float>(3);
  const std::size_t n = 37;
  const auto a = random_patches(n, 6), b = random_patches(n, 7);
  const auto batch = forward_batch<float>(net, a, b, n);
  const auto fa = features<float>(net, a, n), fb = features<float>(net, b, n);
  const RowMatrix<float> pre = reference_half<float>(net, fa) + candidate_half<float>(net, fb);
  std::vector<float> split(n);
  classifier_head<float>(net, pre, split);
  for (std::size_t i = 0; i < n; ++i) {
    const float single = forward<float>(net, std::span(a).subspan(i * 81, 81), std::span(b).subspan(i * 81, 81));
    EXPECT_NEAR(batch[i], single, 1e-6);
    EXPECT_NEAR(split[i], single, 1e-6);
  }
}

TEST(Forward, SharedWeightsAffectBothBranchesEqually) {
  auto net = init<double>(4);
  const auto x = widen<double>(random_patches(1, 8));
  std::vector<double> both = x;
  both.insert(both.end(), x.begin(), x.end());
  const auto before = features<double>(net, both, 2);
  net.view("conv2.weight")[17] += 0.3;
  const auto after = features<double>(net, both, 2);
  // One set of conv weights serves both branches.
  EXPECT_GT((after.row(0) - before.row(0)).cwiseAbs().maxCoeff(), 0.0);
  // Rows sit at different offsets in the batched GEMM, so allow rounding.
  EXPECT_LT((after.row(0) - after.row(1)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(((after.row(0) - before.row(0)) - (after.row(1) - before.row(1))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Bce, Examples) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0.5, 0), 0.6931472, 1e-7);
  EXPECT_NEAR(bce_loss(1 - 1e-7, 1), 1e-7, 1e-12);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
  for (double p : {0.01, 0.2, 0.5, 0.77, 0.99})
    for (int y : {0, 1}) {
      const double h = 1e-6;
      const double fd = (bce_loss(p + h, y) - bce_loss(p - h, y)) / (2 * h);
      EXPECT_NEAR(bce_grad(p, y), fd, 1e-5 * std::abs(fd));
    }
}

TEST(Backward, FiniteDifferenceSample) {
  // The full sweep over every parameter lives in the acceptance suite.
  for (std::uint64_t seed : {11u, 12u}) {
    const auto r = oracle::gradient_check(seed, 4, 1e-5, 1e-4, 300);
    EXPECT_EQ(r.failures, 0u) << r.worstTensor << "[" << r.worstIndex << "] " << r.worst;
    EXPECT_LT(r.worst, 1e-4);
  }
}

TEST(Backward, LossMatchesForward) {
  const auto net = init<double>(5);
  const auto a = widen<double>(random_patches(6, 9)), b = widen<double>(random_patches(6, 10));
  const std::vector<std::uint8_t> labels = {1, 0, 1, 1, 0, 0};
  const auto g = backward<double>(net, {a, b, labels}, Backend::Serial);
  double expected = 0;
  for (int i = 0; i < 6; ++i) {
    const double p = oracle::net_forward<double>(net, std::span<const double>(a).subspan(i * 81, 81),
                                                 std::span<const double>(b).subspan(i * 81, 81));
    expected += bce_loss(p, labels[i]);
  }
  EXPECT_NEAR(g.meanLoss, expected / 6, 1e-12);
  EXPECT_NEAR(batch_loss<double>(net, {a, b, labels}), expected / 6, 1e-12);
}

TEST(Backward, DuplicatedSampleKeepsMean) {
  const auto net = init<double>(6);
  const auto a = widen<double>(random_patches(1, 11)), b = widen<double>(random_patches(1, 12));
  std::vector<double> a2 = a, b2 = b;
  a2.insert(a2.end(), a.begin(), a.end());
  b2.insert(b2.end(), b.begin(), b.end());
  const std::vector<std::uint8_t> one = {1}, two = {1, 1};
  const auto g1 = backward<double>(net, {a, b, one}).gradient;
  const auto g2 = backward<double>(net, {a2, b2, two}).gradient;
  for (std::size_t i = 0; i < g1.size(); ++i) ASSERT_NEAR(g1[i], g2[i], 1e-12);
}

TEST(Backward, SaturatedCorrectPredictionsHaveNoGradient) {
  auto net = init<double>(7);
  net.view("fc3.bias")[0] = 60.0;  // p rounds to 1
  const auto a = widen<double>(random_patches(4, 13)), b = widen<double>(random_patches(4, 14));
  const std::vector<std::uint8_t> labels = {1, 1, 1, 1};
  const auto g = backward<double>(net, {a, b, labels});
  double norm = 0;
  for (double v : g.gradient) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-5);
}

TEST(Backward, SerialMatchesParallel) {
  const auto net = init<float>(8);
  const std::size_t n = 128;
  const auto a = random_patches(n, 15), b = random_patches(n, 16);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 3 == 0;
  const auto s = backward<float>(net, {a, b, labels}, Backend::Serial);
  const auto p = backward<float>(net, {a, b, labels}, Backend::Parallel);
  EXPECT_EQ(s.gradient, p.gradient);
  EXPECT_EQ(s.meanLoss, p.meanLoss);
}

TEST(Schedule, LearningRate) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(lr_at(0, cfg), 3e-3);
  EXPECT_DOUBLE_EQ(lr_at(9, cfg), 3e-3);
  EXPECT_DOUBLE_EQ(lr_at(10, cfg), 3e-4);
  EXPECT_DOUBLE_EQ(lr_at(14, cfg), 3e-4);
  EXPECT_THROW(lr_at(15, cfg), Error);
}

TEST(Sgd, PlainStepAndNoOp) {
  TrainConfig cfg;
  cfg.momentum = 0;
  cfg.weightDecay = 0;
  std::vector<double> w = {1.0, -2.0}, g = {0.5, 0.25}, v = {0, 0};
  sgd_step<double>(w, g, v, 0.1, cfg);
  EXPECT_DOUBLE_EQ(w[0], 1.0 - 0.05);
  EXPECT_DOUBLE_EQ(w[1], -2.0 - 0.025);
  TrainConfig still;
  still.weightDecay = 0;
  std::vector<double> w2 = {3.0}, g2 = {0.0}, v2 = {0.0};
  sgd_step<double>(w2, g2, v2, 0.1, still);
  EXPECT_EQ(w2[0], 3.0);
}

TEST(Sgd, HeavyBallTwoSteps) {
  // Loss 0.5 * k * w^2, gradient k * w.
  TrainConfig cfg;
  const double k = 2.0, lr = 0.1, m = cfg.momentum, wd = cfg.weightDecay;
  std::vector<double> w = {1.5}, v = {0.0};
  double ew = 1.5, ev = 0.0;
  for (int step = 0; step < 2; ++step) {
    std::vector<double> g = {k * w[0]};
    sgd_step<double>(w, g, v, lr, cfg);
    ev = m * ev + k * ew + wd * ew;
    ew = ew - lr * ev;
  }
  // Closed form: v1 = (k+wd) w0, w1 = w0 (1 - lr (k+wd)), v2 = m v1 + (k+wd) w1.
  const double c = k + wd, w1 = 1.5 * (1 - lr * c), v2 = m * c * 1.5 + c * w1;
  EXPECT_NEAR(w[0], w1 - lr * v2, 1e-12);
  EXPECT_NEAR(w[0], ew, 1e-12);
  EXPECT_NEAR(v[0], ev, 1e-12);
}

TEST(Train, SeparableToyProblem) {
  // One batch: the same identical pair and the same inverted pair repeated.
  auto data = toy_dataset(1, 1);
  const auto pos = data.samples[0], neg = data.samples[1];
  data.samples.clear();
  for (int i = 0; i < 64; ++i) {
    data.samples.push_back(pos);
    data.samples.push_back(neg);
  }
  // One step per epoch, so run longer than the recipe at its initial rate.
  TrainConfig cfg;
  cfg.augment = false;
  cfg.epochs = 30;
  cfg.lrDecayEveryEpochs = 30;
  const auto r = train(data, cfg);
  ASSERT_EQ(r.lossHistory.size(), 30u);
  EXPECT_LT(r.lossHistory.back(), 0.1);
  EXPECT_LT(r.lossHistory[10], r.lossHistory[0]);
}

TEST(Train, DeterministicPerSeed) {
  const auto data = toy_dataset(96, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batchSize = 32;
  const auto a = train(data, cfg), b = train(data, cfg);
  EXPECT_EQ(a.lossHistory, b.lossHistory);
  EXPECT_EQ(a.net.params, b.net.params);
  cfg.seed = 43;
  const auto c = train(data, cfg);
  EXPECT_NE(a.net.params, c.net.params);
  cfg.backend = Backend::Serial;
  cfg.seed = 42;
  EXPECT_EQ(train(data, cfg).net.params, a.net.params);
}

TEST(Train, RejectsBadInput) {
  auto data = toy_dataset(4, 3);
  data.samples.pop_back();
  EXPECT_THROW(train(data, TrainConfig{}), Error);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train(toy_dataset(4, 3), cfg), Error);
}

TEST(Weights, RoundTripAndSize) {
  const auto net = init<float>(9);
  const auto p = temp_file("w.bin");
  save_weights(p, net);
  EXPECT_EQ(load_weights(p).params, net.params);
  // magic, version, tensor count, then per tensor: name (u16 length + bytes),
  // rank u8, dims u32, offset u64; parameter count u64; payload; CRC32.
  std::size_t expected = 4 + 2 + 2;
  for (const auto& t : parameter_layout()) expected += 2 + t.name.size() + 1 + 4 * t.shape.size() + 8;
  expected += 8 + 4 * parameter_count() + 4;
  EXPECT_EQ(fs::file_size(p), expected);
  EXPECT_EQ(weights_file_size(), expected);
}

TEST(Weights, CorruptionErrors) {
  const auto net = init<float>(10);
  const auto p = temp_file("bad.bin");
  save_weights(p, net);
  std::vector<char> bytes;
  {
    std::ifstream in(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::vector<char>& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  auto cut = bytes;
  cut.resize(cut.size() - 10);
  write(cut);
  EXPECT_EQ(load_error(p), ErrorKind::Truncation);
  auto flipped = bytes;
  flipped[flipped.size() - 100] ^= 1;
  write(flipped);
  EXPECT_EQ(load_error(p), ErrorKind::Checksum);
  auto magic = bytes;
  magic[1] = 'Z';
  write(magic);
  EXPECT_EQ(load_error(p), ErrorKind::MagicMismatch);
  EXPECT_EQ(load_error(temp_file("none.bin")), ErrorKind::MissingWeights);
}

TEST(Accuracy, ToyNetworkSeparates) {
  const auto data = toy_dataset(512, 4);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.lrDecayEveryEpochs = 100;
  cfg.lr0 = 0.01;
  cfg.augment = false;
  const auto r = train(data, cfg);
  EXPECT_GT(accuracy(r.net, toy_dataset(256, 5)), 0.9);
}
