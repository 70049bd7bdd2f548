#include <benchmark/benchmark.h>

#include "wqdil/grid_archive.hpp"
#include "wqdil/mlp.hpp"
#include "wqdil/point_walker.hpp"
#include "wqdil/random.hpp"
#include "wqdil/visit_archive.hpp"
#include "wqdil/vppo.hpp"

using namespace wqdil;

namespace {

nn::ParamVector random_params(const nn::MlpSpec& spec, Random& rng) {
  nn::ParamVector p(spec.param_count());
  for (auto& x : p) x = 0.3 * rng.normal();
  return p;
}

nn::Matrix random_batch(Eigen::Index rows, Eigen::Index cols, Random& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Range arg is the batch size; 11-64-64-8 is the measure-conditioned encoder.
void BM_MlpForward(benchmark::State& state) {
  Random rng(1);
  const nn::MlpSpec spec({11, 64, 64, 8});
  const auto p = random_params(spec, rng);
  const auto x = random_batch(state.range(0), 11, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(spec, p, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(256)->Arg(800);

void BM_MlpForwardBackward(benchmark::State& state) {
  Random rng(2);
  const nn::MlpSpec spec({11, 64, 64, 8});
  const auto p = random_params(spec, rng);
  const auto x = random_batch(state.range(0), 11, rng);
  const auto up = random_batch(state.range(0), 8, rng);
  std::vector<double> grad(p.size());
  for (auto _ : state) {
    nn::Tape tape;
    nn::forward(spec, p, x, tape);
    nn::backward(spec, p, tape, up, grad);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(256)->Arg(800);

void BM_EnvStep(benchmark::State& state) {
  const env::PointWalker walker;
  Random rng(3);
  auto s = walker.reset(7);
  for (auto _ : state) {
    if (walker.terminal(s)) s = walker.reset(rng.index(1000));
    s = walker.step(s, {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}).next_state;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_EnvStep);

void BM_ArchiveInsert(benchmark::State& state) {
  Random rng(4);
  qd::GridArchive archive(20);
  for (auto _ : state) {
    const Measure m{rng.uniform(), rng.uniform()};
    benchmark::DoNotOptimize(archive.insert({{}, rng.normal(), m, 0.0}));
  }
}
BENCHMARK(BM_ArchiveInsert);

void BM_VisitBonus(benchmark::State& state) {
  Random rng(5);
  explore::VisitCountArchive visits;
  for (auto _ : state) {
    const Measure m{static_cast<double>(rng.index(2)), static_cast<double>(rng.index(2))};
    visits.visit(m);
    benchmark::DoNotOptimize(visits.bonus(m));
  }
}
BENCHMARK(BM_VisitBonus);

// One rollout at the default size (32 environments x 64 steps), true reward.
void BM_CollectRollout(benchmark::State& state) {
  env::PointWalkerEnv proto;
  vppo::Vppo vppo({}, proto, 6);
  Random rng(7);
  const auto policy = vppo.init_policy(rng);
  explore::VisitCountArchive explorer;
  for (auto _ : state) benchmark::DoNotOptimize(vppo.collect_rollout(policy, vppo::TrueReward(), explorer, true));
}
BENCHMARK(BM_CollectRollout)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
