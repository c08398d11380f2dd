// Microbenchmarks for the hot paths: event scheduling, link transmission,
// path enumeration, SGD steps, and a small end-to-end run.

#include <benchmark/benchmark.h>

#include <random>

#include "fedmesh/datagen.hpp"
#include "fedmesh/fedcore.hpp"
#include "fedmesh/harness.hpp"
#include "fedmesh/presets.hpp"
#include "fedmesh/simnet.hpp"
#include "fedmesh/topology.hpp"

using namespace fedmesh;

static void BM_EventQueue(benchmark::State& state) {
  const int batch = 1024;
  for (auto _ : state) {
    EventQueue q;
    int fired = 0;
    for (int i = 0; i < batch; ++i) {
      q.post(static_cast<double>((i * 7919) % batch), [&fired] { ++fired; });
    }
    while (q.step()) {
    }
    benchmark::DoNotOptimize(fired);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_EventQueue);

static void BM_Transmit(benchmark::State& state) {
  LinkState link;
  link.capacity_bps = 20e6;
  link.jitter_max_ms = 0.1;
  link.jitter_rng.seed(7);
  double now = 0;
  for (auto _ : state) {
    TransmitResult r = transmit(link, 1500, now);
    now = r.deliver_at_ms;
    benchmark::DoNotOptimize(r.delay_ms);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Transmit);

static void BM_PathEnumeration(benchmark::State& state) {
  Topology topo = Topology::build(mesh10_topology());
  RefineConfig cfg;
  for (auto _ : state) {
    auto paths = enumerate_loopfree_paths(topo, "R0", "R4", cfg);
    benchmark::DoNotOptimize(paths.size());
  }
}
BENCHMARK(BM_PathEnumeration);

static void BM_SgdStep(benchmark::State& state) {
  SyntheticDataset ds = generate_dataset(400, 20, 5, 3.0, 99);
  LogisticModel model(20, 5);
  std::mt19937_64 rng(1);
  ModelVector w;
  model.init_weights(w.w, rng);
  ModelVector g = w;
  std::vector<int> batch(20);
  for (int i = 0; i < 20; ++i) batch[i] = i;
  for (auto _ : state) {
    w = local_sgd_step(w, model, ds, batch, 0.1, 0.05, g);
    benchmark::DoNotOptimize(w.w.data());
  }
  state.SetItemsProcessed(state.iterations() * batch.size());
}
BENCHMARK(BM_SgdStep);

static void BM_SmallRun(benchmark::State& state) {
  ExperimentConfig cfg = preset_arm("convergence", "baseline");
  cfg.fl.rounds = 3;
  cfg.fl.target_loss.reset();
  cfg.fl.payload_override_bytes = 100000;
  for (auto _ : state) {
    MetricsLog log = run_experiment(cfg);
    benchmark::DoNotOptimize(log.rounds.size());
  }
}
BENCHMARK(BM_SmallRun)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
