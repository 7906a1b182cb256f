#include <benchmark/benchmark.h>

#include <random>

#include "spem/blinks.hpp"
#include "spem/imputers.hpp"
#include "spem/metrics.hpp"
#include "spem/rae.hpp"
#include "spem/resample.hpp"
#include "spem/saits.hpp"
#include "spem/synthgen.hpp"

using namespace spem;

namespace {

const Dataset& corpus() {
  static const Dataset d = [] {
    synth::CorpusSpec spec;
    spec.n_participants = 2;
    spec.tasks = {1, 3};
    return synth::make_corpus(spec, 11);
  }();
  return d;
}

const blinks::BlinkStats& stats() {
  static const blinks::BlinkStats s = [] {
    synth::CorpusSpec spec;
    spec.n_participants = 6;
    return blinks::blink_statistics(synth::make_recorded_corpus(spec, {}, 3).second);
  }();
  return s;
}

GazeSequence coarse_with_gaps() {
  const auto& s = corpus().sequences.front();
  return downsample(blinks::inject_blinks(s, stats(), 5).corrupted, 30);
}

}  // namespace

static void BM_Downsample(benchmark::State& state) {
  const auto& s = corpus().sequences.front();
  for (auto _ : state) benchmark::DoNotOptimize(downsample(s, 30));
}
BENCHMARK(BM_Downsample);

static void BM_Upsample(benchmark::State& state) {
  const auto c = downsample(corpus().sequences.front(), 30);
  for (auto _ : state) benchmark::DoNotOptimize(upsample(c, 15000, 30));
}
BENCHMARK(BM_Upsample);

static void BM_Dft(benchmark::State& state) {
  const auto& s = corpus().sequences.front();
  for (auto _ : state) benchmark::DoNotOptimize(metrics::dft(s));
}
BENCHMARK(BM_Dft);

static void BM_Evaluate(benchmark::State& state) {
  const auto& s = corpus().sequences.front();
  const auto inj = blinks::inject_blinks(s, stats(), 2);
  const auto filled = impute_pchip(inj.corrupted).sequence;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate(s, filled, inj.truth));
}
BENCHMARK(BM_Evaluate);

static void BM_InjectBlinks(benchmark::State& state) {
  const auto& s = corpus().sequences.front();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(blinks::inject_blinks(s, stats(), seed++));
}
BENCHMARK(BM_InjectBlinks);

static void BM_ImputePchip(benchmark::State& state) {
  const auto c = coarse_with_gaps();
  for (auto _ : state) benchmark::DoNotOptimize(impute_pchip(c));
}
BENCHMARK(BM_ImputePchip);

static void BM_ImputeSsa(benchmark::State& state) {
  const auto c = zscore(coarse_with_gaps()).first;
  SsaConfig cfg;
  cfg.window_L = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(impute_ssa(c, cfg));
}
BENCHMARK(BM_ImputeSsa)->Arg(25)->Arg(50)->Arg(100);

static void BM_ImputeKnn(benchmark::State& state) {
  const auto c = zscore(coarse_with_gaps()).first;
  std::vector<GazeSequence> lib;
  for (std::size_t i = 1; i < corpus().size(); ++i)
    lib.push_back(zscore(downsample(corpus().sequences[i], 30)).first);
  for (auto _ : state) benchmark::DoNotOptimize(impute_knn(c, lib));
}
BENCHMARK(BM_ImputeKnn);

static void BM_SaitsForward(benchmark::State& state) {
  auto cfg = SaitsConfig::desk();
  cfg.d_model = static_cast<int>(state.range(0));
  cfg.d_ff = 2 * cfg.d_model;
  const auto model = SaitsModel::init(cfg, 1);
  const auto c = zscore(coarse_with_gaps()).first;
  for (auto _ : state) benchmark::DoNotOptimize(impute_saits(model, c));
}
BENCHMARK(BM_SaitsForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SaitsStep(benchmark::State& state) {
  auto cfg = SaitsConfig::desk();
  cfg.epochs = 1;
  cfg.batch = 4;
  std::vector<GazeSequence> seqs;
  for (std::size_t i = 0; i < 10 && i < corpus().size(); ++i)
    seqs.push_back(zscore(downsample(corpus().sequences[i % corpus().size()], 30)).first);
  while (seqs.size() < 10) seqs.push_back(seqs[seqs.size() % 2]);
  for (auto _ : state) benchmark::DoNotOptimize(train_saits(seqs, cfg, stats(), 3, 0, 1));
}
BENCHMARK(BM_SaitsStep)->Unit(benchmark::kMillisecond)->Iterations(3);

static void BM_RaeForward(benchmark::State& state) {
  const auto model = RaeModel::init(RaeConfig::desk(), 1);
  const auto up = degrade(corpus().sequences.front(), 30);
  for (auto _ : state) benchmark::DoNotOptimize(rae_forward(model, up));
}
BENCHMARK(BM_RaeForward)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
