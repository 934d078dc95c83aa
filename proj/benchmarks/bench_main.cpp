#include <benchmark/benchmark.h>

#include <random>

#include "mmfc/embed_index.hpp"
#include "mmfc/evalkit.hpp"

namespace {

mmfc::EmbeddingVector random_vector(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(dim);
  for (auto& x : v) x = g(rng);
  return mmfc::EmbeddingVector(std::move(v));
}

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  std::mt19937 rng(1);
  mmfc::VectorIndex index(mmfc::Modality::kText, "bench", dim);
  for (std::size_t i = 0; i < n; ++i) index.add("e" + std::to_string(i), random_vector(rng, dim));
  const auto q = random_vector(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(mmfc::top_k(q, index, 10));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_TopK)->Args({1000, 64})->Args({10000, 384})->Args({100000, 512});

void BM_MannWhitneyExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> a(n / 2), b(n - n / 2);
  for (auto& x : a) x = g(rng);
  for (auto& x : b) x = g(rng) + 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(mmfc::mann_whitney_u(a, b, mmfc::MannWhitneyMethod::kExact));
}
BENCHMARK(BM_MannWhitneyExact)->Arg(6)->Arg(12)->Arg(20);

void BM_Score(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(3);
  mmfc::GoldLabels gold;
  std::vector<mmfc::Prediction> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    preds[i].claim_id = "c" + std::to_string(i);
    preds[i].verdict = mmfc::kAllVerdicts[rng() % 3];
    gold[preds[i].claim_id] = mmfc::kAllVerdicts[rng() % 3];
  }
  for (auto _ : state) benchmark::DoNotOptimize(mmfc::score(preds, gold));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_Score)->Arg(2442)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
