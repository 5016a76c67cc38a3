#include <benchmark/benchmark.h>

#include <random>

#include "mcdet/calibration.hpp"
#include "mcdet/gating.hpp"
#include "mcdet/random.hpp"
#include "mcdet/simulator.hpp"

namespace {

using namespace mcdet;

McDump dump_with_objects(int n_objects, int n_passes) {
  sim::SceneParams params;
  params.image = {2048, 1024};
  params.min_objects = n_objects;
  params.max_objects = n_objects;
  params.min_size = 16;
  params.max_size = 64;
  const auto scenes = sim::gen_scenes(11, 1, params);
  return sim::simulate_mc_dump(scenes[0], {}, n_passes, 12);
}

void BM_BuildClusters(benchmark::State& state) {
  const McDump dump = dump_with_objects(static_cast<int>(state.range(0)), 10);
  for (auto _ : state) benchmark::DoNotOptimize(build_clusters(dump, 0.5));
  state.counters["detections"] = static_cast<double>(dump.detection_count());
}
BENCHMARK(BM_BuildClusters)->Arg(8)->Arg(32)->Arg(128);

void BM_Aggregate(benchmark::State& state) {
  const McDump dump = dump_with_objects(32, 10);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(dump, 0.5));
}
BENCHMARK(BM_Aggregate);

void BM_Partition(benchmark::State& state) {
  const auto cons = aggregate(dump_with_objects(64, 10), 0.5);
  const GateConfig gate;
  for (auto _ : state) benchmark::DoNotOptimize(partition(cons, gate));
}
BENCHMARK(BM_Partition);

void BM_Ece(benchmark::State& state) {
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<MatchedPrediction> m(static_cast<std::size_t>(state.range(0)));
  for (auto& p : m) p = {u(rng), u(rng) < 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(expected_calibration_error(m, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->Arg(1000)->Arg(100000);

void BM_TileAround(benchmark::State& state) {
  auto rng = make_rng(6);
  std::uniform_real_distribution<double> u(0.0, 1900.0);
  std::vector<BBox> boxes(4096);
  for (auto& b : boxes) {
    const double x = u(rng), y = u(rng) / 2;
    b = {x, y, x + 40, y + 30};
  }
  const ImageSize img{2048, 1024};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tile_around(boxes[i], img, 5.0));
    i = (i + 1) % boxes.size();
  }
}
BENCHMARK(BM_TileAround);

}  // namespace

BENCHMARK_MAIN();
