// Serial references against the OpenMP kernels.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "vitaudit/analyze.hpp"
#include "vitaudit/corpus.hpp"
#include "vitaudit/select.hpp"

namespace {

using namespace vitaudit;

std::vector<double> scores(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> total(3, 15);
  std::vector<double> xs(n);
  for (auto& x : xs) x = total(rng) / 3.0;
  return xs;
}

std::vector<AuditRecord> records(std::size_t n) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> s(1, 5);
  std::vector<AuditRecord> rs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rs[i].sample_id = "r" + std::to_string(i);
    rs[i].scores.s_l = s(rng);
    rs[i].scores.s_k = s(rng);
    rs[i].scores.s_v = s(rng);
  }
  return rs;
}

void BM_histogram_serial(benchmark::State& st) {
  const auto xs = scores(std::size_t(st.range(0)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(serial::histogram_counts(xs, kDefaultBins));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_histogram_parallel(benchmark::State& st) {
  const auto xs = scores(std::size_t(st.range(0)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(histogram_counts(xs, kDefaultBins));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_auc_serial(benchmark::State& st) {
  const auto pos = scores(std::size_t(st.range(0)), 1);
  const auto neg = scores(std::size_t(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(serial::auc(pos, neg));
}

void BM_auc(benchmark::State& st) {
  const auto pos = scores(std::size_t(st.range(0)), 1);
  const auto neg = scores(std::size_t(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(auc(pos, neg));
}

void BM_select_serial(benchmark::State& st) {
  const auto rs = records(std::size_t(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(serial::rank_and_select(rs, WeightScheme{}, 100));
}

void BM_select(benchmark::State& st) {
  const auto rs = records(std::size_t(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(rank_and_select(rs, WeightScheme{}, 100));
}

}  // namespace

BENCHMARK(BM_histogram_serial)->Range(1 << 12, 1 << 22);
BENCHMARK(BM_histogram_parallel)->Range(1 << 12, 1 << 22);
BENCHMARK(BM_auc_serial)->Range(1 << 8, 1 << 12);
BENCHMARK(BM_auc)->Range(1 << 8, 1 << 16);
BENCHMARK(BM_select_serial)->Range(1 << 10, 1 << 18);
BENCHMARK(BM_select)->Range(1 << 10, 1 << 18);

BENCHMARK_MAIN();
