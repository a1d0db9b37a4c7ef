#include "ivpricing/kernels.hpp"
#include "ivpricing/minimax.hpp"
#include "ivpricing/scm.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ivpricing;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, 1);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = N(rng);
  return m;
}

template <Matrix (*F)(const kernels::FeatureBlocks&, const Matrix&)>
void BM_SecondMoment(benchmark::State& state) {
  const Matrix phi = random_matrix(state.range(0), 11, 1), W = random_matrix(state.range(0), kResidualDim, 2);
  const auto blocks = kernels::same_features(phi);
  for (auto _ : state) benchmark::DoNotOptimize(F(blocks, W));
}
BENCHMARK(BM_SecondMoment<kernels::second_moment>)->Arg(1000)->Arg(4000);
BENCHMARK(BM_SecondMoment<kernels::second_moment_serial>)->Arg(1000)->Arg(4000);

template <Vector (*F)(const Matrix&, const Matrix&, const Vector&)>
void BM_Kde(benchmark::State& state) {
  const Matrix data = random_matrix(state.range(0), 4, 3);
  const Vector bw = Vector::Constant(4, 0.4);
  for (auto _ : state) benchmark::DoNotOptimize(F(data, data, bw));
}
BENCHMARK(BM_Kde<kernels::gaussian_kde>)->Arg(1000);
BENCHMARK(BM_Kde<kernels::gaussian_kde_serial>)->Arg(1000);

void BM_InnerMax(benchmark::State& state) {
  const Dataset d = generate_dataset(SimParams{}, static_cast<std::size_t>(state.range(0)), 5);
  MinimaxConfig cfg;
  const FeatureMaps fm = make_feature_maps(d, cfg);
  const NuisanceAlpha a = init_two_stage(d, fm.x_map, fm.xg_map, cfg.init_ridge);
  for (auto _ : state) benchmark::DoNotOptimize(inner_max(d, a, a, 0.03, fm.adversary));
}
BENCHMARK(BM_InnerMax)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FitMinimax(benchmark::State& state) {
  const Dataset d = generate_dataset(SimParams{}, static_cast<std::size_t>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(fit_minimax(d, MinimaxConfig{}));
}
BENCHMARK(BM_FitMinimax)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
