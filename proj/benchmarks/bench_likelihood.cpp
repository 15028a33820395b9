#include "bench_common.hpp"

#include "gmap/gaussian.hpp"
#include "gmap/spatial_hash.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace gmap;

// Frame scoring against the full model: the cost the submap exists to avoid.
void BM_MarginalLikelihoodFullK(benchmark::State& state) {
  const auto model = bench::make_model(static_cast<int>(state.range(0)));
  const auto queries = bench::make_queries(4096);
  const Gmm3 marginal = marginalize_spatial(model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmm_log_likelihood<3>(queries, marginal).sum());
  }
  state.SetItemsProcessed(state.iterations() * queries.rows());
}
BENCHMARK(BM_MarginalLikelihoodFullK)->RangeMultiplier(4)->Range(64, 16384);

// Same queries restricted to the hash submap; the gap to FullK is the
// speedup the incremental pipeline sees per frame.
void BM_MarginalLikelihoodSubmap(benchmark::State& state) {
  const auto model = bench::make_model(static_cast<int>(state.range(0)));
  const auto queries = bench::make_queries(4096);
  const Gmm3 marginal = marginalize_spatial(model);

  HashGridSpec spec;
  spec.alpha = 0.5;
  spec.extents = {64, 64, 64};
  const SpatialHashTable table = build_hash_table(model, spec);
  for (auto _ : state) {
    const auto submap = table.query_submap(queries);
    if (!submap.empty()) {
      benchmark::DoNotOptimize(gmm_log_likelihood<3>(queries, marginal, &submap).sum());
    }
  }
  state.SetItemsProcessed(state.iterations() * queries.rows());
}
BENCHMARK(BM_MarginalLikelihoodSubmap)->RangeMultiplier(4)->Range(64, 16384);

void BM_LogDensity4D(benchmark::State& state) {
  const auto model = bench::make_model(1);
  const auto& c = model.components[0];
  const Mat4 chol = cholesky_lower<4>(c.cov, kCovarianceEpsilon);
  Eigen::Matrix<double, Eigen::Dynamic, 4> pts(4096, 4);
  pts.leftCols<3>() = bench::make_queries(4096);
  pts.col(3).setConstant(0.5);
  for (auto _ : state) {
    double acc = 0.0;
    for (Eigen::Index n = 0; n < pts.rows(); ++n) {
      acc += gaussian_log_density<4>(pts.row(n).transpose(), c.mean, chol);
    }
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * pts.rows());
}
BENCHMARK(BM_LogDensity4D);

}  // namespace
