#include "bench_common.hpp"

#include "gmap/spatial_hash.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace gmap;

HashGridSpec bench_spec() {
  HashGridSpec spec;
  spec.alpha = 0.5;
  spec.extents = {64, 64, 64};
  return spec;
}

void BM_HashInsertModel(benchmark::State& state) {
  const auto model = bench::make_model(static_cast<int>(state.range(0)));
  const HashGridSpec spec = bench_spec();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_hash_table(model, spec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HashInsertModel)->RangeMultiplier(4)->Range(64, 16384);

void BM_HashQuerySubmap(benchmark::State& state) {
  const auto model = bench::make_model(static_cast<int>(state.range(0)));
  const auto queries = bench::make_queries(4096);
  const SpatialHashTable table = build_hash_table(model, bench_spec());
  for (auto _ : state) {
    benchmark::DoNotOptimize(table.query_submap(queries));
  }
  state.SetItemsProcessed(state.iterations() * queries.rows());
}
BENCHMARK(BM_HashQuerySubmap)->RangeMultiplier(4)->Range(64, 16384);

void BM_HashKey(benchmark::State& state) {
  const auto queries = bench::make_queries(65536);
  const HashGridSpec spec = bench_spec();
  for (auto _ : state) {
    std::int64_t acc = 0;
    for (Eigen::Index n = 0; n < queries.rows(); ++n) {
      acc += hash_key(queries.row(n).transpose(), spec);
    }
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * queries.rows());
}
BENCHMARK(BM_HashKey);

}  // namespace

BENCHMARK_MAIN();
