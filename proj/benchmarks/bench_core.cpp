#include <benchmark/benchmark.h>

#include <catis/diagnostics.hpp>
#include <catis/random.hpp>
#include <catis/recurrence.hpp>
#include <catis/reduce.hpp>
#include <catis/scoring.hpp>

using namespace catis;

namespace {

TokenPopulation population(std::size_t n, std::size_t d) {
  GaussianStream g(42);
  FeatureMatrix m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) m(i, k) = g();
  return TokenPopulation::from_features(std::move(m));
}

void BM_NormF(benchmark::State& state) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)), 768);
  for (auto _ : state) benchmark::DoNotOptimize(norm_f(pop));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NormF)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oN);

void BM_CosineSimilarity(benchmark::State& state) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)), 768);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_similarity(pop, SimilarityKind::kCosine));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CosineSimilarity)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_RankingConsistency(benchmark::State& state) {
  const auto a = pairwise_similarity(population(static_cast<std::size_t>(state.range(0)), 64), SimilarityKind::kCosine);
  auto b = a;
  b.values.array() += 1e-3 * Eigen::MatrixXd::Random(a.size(), a.size()).array();
  b.values = 0.5 * (b.values + b.values.transpose()).eval();
  for (auto _ : state) benchmark::DoNotOptimize(ranking_consistency(a, b));
}
BENCHMARK(BM_RankingConsistency)->Arg(197)->Arg(577);

void BM_RhoOff(benchmark::State& state) {
  const auto pop = population(196, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rho_off(pop));
}
BENCHMARK(BM_RhoOff)->Arg(384)->Arg(768);

void BM_CatisLayer(benchmark::State& state) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)), 768);
  std::vector<double> att(pop.patch_count(), 1.0 / static_cast<double>(pop.patch_count()));
  ScoringParams sp;
  sp.w_cls = 0.5;
  LayerScoringContext ctx{pop, att, std::nullopt, 4};
  const std::size_t r = pop.patch_count() / 12;
  for (auto _ : state) benchmark::DoNotOptimize(catis_layer(ctx, sp, {}, r));
}
BENCHMARK(BM_CatisLayer)->Arg(196)->Arg(576);

void BM_TomeLayer(benchmark::State& state) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)), 768);
  const std::size_t r = pop.patch_count() / 12;
  for (auto _ : state) benchmark::DoNotOptimize(tome_layer(pop, r));
}
BENCHMARK(BM_TomeLayer)->Arg(196)->Arg(576);

void BM_PerturbationEnergy(benchmark::State& state) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)), 64);
  const auto signal = state.range(1) == 0 ? EnergySignal::kPairwiseCosine : EnergySignal::kUnaryNormF;
  for (auto _ : state) benchmark::DoNotOptimize(perturbation_energy(pop, signal, 0.01, 20, 1));
}
BENCHMARK(BM_PerturbationEnergy)->Args({128, 0})->Args({128, 1})->Args({512, 0})->Args({512, 1});

void BM_Recurrence(benchmark::State& state) {
  RecurrenceConfig c;
  c.alpha = 0.5;
  c.L = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(c));
    benchmark::DoNotOptimize(r_crit_exact(c));
  }
}
BENCHMARK(BM_Recurrence)->Arg(12)->Arg(48);

}  // namespace
BENCHMARK_MAIN();
