#include "soclab/calib.hpp"
#include "soclab/objectives.hpp"
#include "soclab/synthdata.hpp"
#include "soclab/tuner.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace soclab;

Matrix unit_rows(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m = Matrix::NullaryExpr(rows, cols, [&] { return n(rng); });
  m.rowwise().normalize();
  return m;
}

void BM_CompositeGradient(benchmark::State& state) {
  const Index k = state.range(0);
  std::mt19937_64 rng(1);
  const Matrix x = unit_rows(k, 512, rng);
  const Matrix views = unit_rows(64, 512, rng);
  ObjectiveSpec spec;
  spec.delta = 0.2;
  for (auto _ : state) benchmark::DoNotOptimize(composite_objective(x, views, spec));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CompositeGradient)->Arg(10)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_Ece(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CalibrationRecord> records(static_cast<std::size_t>(state.range(0)));
  for (auto& r : records) r = {u(rng), 0, u(rng) < 0.7 ? 0 : 1};
  for (auto _ : state) benchmark::DoNotOptimize(ece(records, 15));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->Arg(1000)->Arg(100000);

void BM_Ace(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CalibrationRecord> records(static_cast<std::size_t>(state.range(0)));
  for (auto& r : records) r = {u(rng), 0, u(rng) < 0.7 ? 0 : 1};
  for (auto _ : state) benchmark::DoNotOptimize(ace(records, 15));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ace)->Arg(1000)->Arg(100000);

void BM_TuneStep(benchmark::State& state) {
  ClusterSpec cs;
  cs.num_clusters = 10;
  cs.classes_per_cluster = 10;
  cs.dimension = 512;
  const PrototypeSet p = gen_prototypes(cs);
  ObservationSpec os;
  os.samples_per_class = 1;
  const ObservationSet obs = gen_observations(p, os).single_group(0);
  TuneConfig cfg;
  cfg.spec.delta = huber_margin(p, NormalizationStrategy::kMinMax);
  cfg.optimizer = state.range(0) ? Optimizer::kAdamW : Optimizer::kGd;
  for (auto _ : state) benchmark::DoNotOptimize(tune_prototypes(p, obs, cfg));
}
BENCHMARK(BM_TuneStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
