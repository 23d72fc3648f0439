#include "compart/diact.hpp"
#include "compart/expr.hpp"
#include "compart/partition.hpp"
#include "compart/pathflow.hpp"
#include "compart/staticnet.hpp"

#include <benchmark/benchmark.h>

#include <memory>

namespace {

std::shared_ptr<const compart::CompartmentalModel> fixture(const char* name) {
  return std::make_shared<const compart::CompartmentalModel>(
      compart::load_model_file(std::string(COMPART_FIXTURES) + "/models/" + name + ".json"));
}

void BM_ParseExpression(benchmark::State& state) {
  const compart::expr::Symbols sym{3, {"alpha1", "alpha2"}};
  for (auto _ : state) benchmark::DoNotOptimize(compart::expr::parse("alpha1*x2*x1/(alpha2 + x1) + exp(-(t-15)^2/2)", sym));
}
BENCHMARK(BM_ParseExpression);

void BM_Decompose(benchmark::State& state, const char* name) {
  auto m = fixture(name);
  for (auto _ : state) benchmark::DoNotOptimize(compart::decompose(m, 0.0, 30.0));
}
BENCHMARK_CAPTURE(BM_Decompose, hippe, "hippe")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Decompose, hallam, "hallam")->Unit(benchmark::kMillisecond);

void BM_DiactStorages(benchmark::State& state) {
  auto m = fixture("hallam");
  const auto p = compart::decompose(m, 0.0, 30.0);
  const std::vector<compart::DiactKind> kinds(compart::kAllDiactKinds.begin(), compart::kAllDiactKinds.end());
  const std::vector<double> grid{5.0, 10.0, 20.0, 30.0};
  for (auto _ : state)
    benchmark::DoNotOptimize(compart::diact_storages(p, kinds, compart::FlowScope::composite(), 0.0, grid));
}
BENCHMARK(BM_DiactStorages)->Unit(benchmark::kMillisecond);

void BM_TransientPath(benchmark::State& state) {
  auto m = fixture("hallam");
  const auto p = compart::decompose(m, 0.0, 30.0);
  const auto path = compart::parse_path("k=1: 0->1->2->3->1->2->1->0", *m);
  for (auto _ : state) benchmark::DoNotOptimize(compart::transient_flows(p, path));
}
BENCHMARK(BM_TransientPath)->Unit(benchmark::kMillisecond);

void BM_StaticPartition(benchmark::State& state) {
  auto m = fixture("hallam");
  const auto x = compart::find_steady_state(*m, m->x_init());
  for (auto _ : state) benchmark::DoNotOptimize(compart::static_partition(*m, x));
}
BENCHMARK(BM_StaticPartition);

}  // namespace

BENCHMARK_MAIN();
