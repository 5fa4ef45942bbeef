// Serial reference path vs OpenMP kernels, plus the naive cost volume vs
// the precomputed dense one. Argument 0 selects the serial backend, 1 the
// parallel one.

#include <benchmark/benchmark.h>

#include <memory>

#include "wbs/evalbench.hpp"
#include "wbs/net.hpp"

using namespace wbs;

namespace {

Backend backend_of(const benchmark::State& state) { return state.range(0) == 0 ? Backend::Serial : Backend::Parallel; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "openmp"); }

const evalbench::PreparedCase& prepared() {
  static const evalbench::PreparedCase pc = [] {
    const auto scene = render::generate_scene(7, render::Difficulty::ClutteredBackground);
    return evalbench::prepare_case({"bench", scene, 30.0, 0.5}, evalbench::RigConfig{});
  }();
  return pc;
}

const std::shared_ptr<net::SiameseNetwork>& network() {
  static const auto n = std::make_shared<net::SiameseNetwork>(net::init<float>(5));
  return n;
}

void BM_Render(benchmark::State& state) {
  const auto scene = render::generate_scene(7, render::Difficulty::ClutteredBackground);
  geometry::Intrinsics in;
  const auto [l, r] = geometry::build_rig(2.0, 30.0, in);
  for (auto _ : state) benchmark::DoNotOptimize(render::render_view(scene, l, backend_of(state)));
  label(state);
}
BENCHMARK(BM_Render)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Rectify(benchmark::State& state) {
  const auto& pc = prepared();
  for (auto _ : state) {
    benchmark::DoNotOptimize(geometry::rectify(pc.camL, pc.camR, pc.imageL, pc.imageR, backend_of(state)));
  }
  label(state);
}
BENCHMARK(BM_Rectify)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_NccVolumes(benchmark::State& state) {
  const auto& pc = prepared();
  const auto spec = matchcost::MatcherSpec::ncc();
  for (auto _ : state) benchmark::DoNotOptimize(stereo::scale_volumes(pc.pair, spec, backend_of(state)));
  label(state);
}
BENCHMARK(BM_NccVolumes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_LearnedVolumes(benchmark::State& state) {
  const auto& pc = prepared();
  const auto spec = matchcost::MatcherSpec::learned(network(), false);
  for (auto _ : state) benchmark::DoNotOptimize(stereo::scale_volumes(pc.pair, spec, backend_of(state)));
  label(state);
}
BENCHMARK(BM_LearnedVolumes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Naive per-pair evaluation against the dense kernel on the same pair;
// both single threaded.
void BM_NaiveVolume(benchmark::State& state) {
  const auto& pc = prepared();
  const auto spec = state.range(0) == 0 ? matchcost::MatcherSpec::ncc() : matchcost::MatcherSpec::sad();
  for (auto _ : state) benchmark::DoNotOptimize(stereo::naive_volume(pc.pair, spec, matchcost::View::Left));
  state.SetLabel(state.range(0) == 0 ? "ncc naive" : "sad naive");
}
BENCHMARK(BM_NaiveVolume)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DenseVolume(benchmark::State& state) {
  const auto& pc = prepared();
  const auto spec = state.range(0) == 0 ? matchcost::MatcherSpec::ncc() : matchcost::MatcherSpec::sad();
  for (auto _ : state) {
    benchmark::DoNotOptimize(stereo::build_cost_volume(pc.pair, spec, matchcost::View::Left, nullptr,
                                                       stereo::ConstraintConfig{}, Backend::Serial));
  }
  state.SetLabel(state.range(0) == 0 ? "ncc dense" : "sad dense");
}
BENCHMARK(BM_DenseVolume)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
  const auto& n = *network();
  const std::size_t batch = 128;
  std::vector<float> a(batch * 81), b(batch * 81);
  std::vector<std::uint8_t> labels(batch);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<float>((i * 37) % 101) / 100.0f;
    b[i] = static_cast<float>((i * 53) % 97) / 96.0f;
  }
  for (std::size_t i = 0; i < batch; ++i) labels[i] = i % 2 == 0;
  const net::Batch<float> bt{a, b, labels};
  for (auto _ : state) benchmark::DoNotOptimize(net::backward(n, bt, backend_of(state)));
  label(state);
}
BENCHMARK(BM_Backward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
