#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "fedmesh/datagen.hpp"
#include "fedmesh/errors.hpp"
#include "fedmesh/fedcore.hpp"

using namespace fedmesh;

TEST_CASE("synthetic datasets are balanced, shaped and separated") {
  SyntheticDataset ds = generate_dataset(1000, 20, 10, 3.0, 42);
  CHECK(ds.n == 1000);
  CHECK(ds.x.size() == 1000u * 20);
  CHECK(ds.y.size() == 1000);
  CHECK(ds.means.size() == 10u * 20);

  std::map<int, int> counts;
  for (int label : ds.y) counts[label]++;
  REQUIRE(counts.size() == 10);
  for (const auto& [label, c] : counts) CHECK(c == 100);

  // pairwise mean distance honors the separation floor
  for (int a = 0; a < 10; ++a) {
    for (int b = a + 1; b < 10; ++b) {
      double d2 = 0;
      for (int k = 0; k < 20; ++k) {
        double diff = ds.means[a * 20 + k] - ds.means[b * 20 + k];
        d2 += diff * diff;
      }
      CHECK(std::sqrt(d2) >= 3.0 - 1e-9);
    }
  }

  // per-class sample means sit on the blob centers (unit variance, 100 draws)
  for (int c = 0; c < 10; ++c) {
    std::vector<double> mean(20, 0);
    int cnt = 0;
    for (int i = 0; i < ds.n; ++i) {
      if (ds.y[i] != c) continue;
      ++cnt;
      for (int k = 0; k < 20; ++k) mean[k] += ds.sample(i)[k];
    }
    double err2 = 0;
    for (int k = 0; k < 20; ++k) {
      double diff = mean[k] / cnt - ds.means[c * 20 + k];
      err2 += diff * diff;
    }
    CHECK(err2 < 0.5);  // expectation d/n_c = 0.2, generous slack
  }
}

TEST_CASE("dataset generation is seed-deterministic") {
  SyntheticDataset a = generate_dataset(300, 8, 4, 2.0, 9);
  SyntheticDataset b = generate_dataset(300, 8, 4, 2.0, 9);
  SyntheticDataset c = generate_dataset(300, 8, 4, 2.0, 10);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.means == b.means);
  CHECK(a.x != c.x);
}

TEST_CASE("dataset parameter validation") {
  CHECK_THROWS_AS(generate_dataset(10, 0, 2, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_dataset(10, 5, 1, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_dataset(1, 5, 2, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_dataset(10, 5, 2, -1.0, 1), ConfigError);
}

TEST_CASE("wide separation is linearly learnable to high accuracy") {
  SyntheticDataset ds = generate_dataset(500, 10, 4, 10.0, 7);
  LogisticModel model(10, 4);
  WorkerState ws;
  ws.id = "w";
  ws.shard.resize(ds.n);
  std::iota(ws.shard.begin(), ws.shard.end(), 0);

  ModelVector global;
  global.w.assign(model.dim(), 0.0);
  std::mt19937_64 shuffle(3);
  LocalTrainingResult res =
      run_local_training(ws, 30, 50, 0.5, 0.0, model, ds, global, shuffle);
  EvalResult ev = evaluate(model, res.model, ds);
  CHECK(ev.accuracy > 0.99);
  CHECK(ev.loss < 0.1);
}

TEST_CASE("iid partitions are disjoint, covering and balanced") {
  SyntheticDataset ds = generate_dataset(2000, 5, 4, 2.0, 11);
  PartitionSpec spec;
  auto shards = partition_dataset(ds, 2, spec, 21);
  REQUIRE(shards.size() == 2);

  std::set<int> seen;
  for (const auto& s : shards)
    for (int i : s) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 2000);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 1999);

  // Binomial(2000, 1/2): three sigmas is ~67
  CHECK(std::abs(static_cast<int>(shards[0].size()) - 1000) < 80);

  auto again = partition_dataset(ds, 2, spec, 21);
  CHECK(shards == again);
  auto other = partition_dataset(ds, 2, spec, 22);
  CHECK(shards != other);
}

namespace {

// mean over workers of the total-variation distance between the shard's
// class histogram and the global class histogram
double mean_tv(const SyntheticDataset& ds, const std::vector<std::vector<int>>& shards) {
  int classes = ds.classes;
  std::vector<double> global(classes, 0);
  for (int label : ds.y) global[label] += 1.0 / ds.n;
  double acc = 0;
  for (const auto& s : shards) {
    std::vector<double> h(classes, 0);
    for (int i : s) h[ds.y[i]] += 1.0 / s.size();
    double tv = 0;
    for (int c = 0; c < classes; ++c) tv += std::abs(h[c] - global[c]);
    acc += tv / 2;
  }
  return acc / shards.size();
}

}  // namespace

TEST_CASE("dirichlet skew responds to the concentration parameter") {
  SyntheticDataset ds = generate_dataset(3000, 4, 5, 2.0, 13);

  SUBCASE("huge beta approaches the uniform split") {
    PartitionSpec spec;
    spec.mode = PartitionSpec::Mode::Dirichlet;
    spec.beta = 1000;
    auto shards = partition_dataset(ds, 5, spec, 31);
    std::size_t total = 0;
    for (const auto& s : shards) {
      CHECK(std::abs(static_cast<int>(s.size()) - 600) < 60);
      total += s.size();
    }
    CHECK(total == 3000);
    CHECK(mean_tv(ds, shards) < 0.05);
  }

  SUBCASE("mean skew falls as beta rises") {
    auto average_over_draws = [&](double beta) {
      PartitionSpec spec;
      spec.mode = PartitionSpec::Mode::Dirichlet;
      spec.beta = beta;
      double acc = 0;
      for (std::uint64_t s = 0; s < 100; ++s)
        acc += mean_tv(ds, partition_dataset(ds, 5, spec, 1000 + s));
      return acc / 100;
    };
    double tv_low = average_over_draws(0.1);
    double tv_mid = average_over_draws(0.5);
    double tv_high = average_over_draws(10.0);
    CHECK(tv_low > tv_mid);
    CHECK(tv_mid > tv_high);
    CHECK(tv_low > 0.3);   // strongly non-iid
    CHECK(tv_high < 0.15);  // close to iid
  }
}

TEST_CASE("shard floor is enforced or rejected") {
  SyntheticDataset ds = generate_dataset(200, 4, 4, 2.0, 17);

  PartitionSpec spec;
  spec.mode = PartitionSpec::Mode::Dirichlet;
  spec.beta = 0.1;
  spec.min_shard = 10;
  auto shards = partition_dataset(ds, 4, spec, 5);
  for (const auto& s : shards) CHECK(s.size() >= 10);

  SUBCASE("impossible floor") {
    SyntheticDataset tiny = generate_dataset(10, 4, 2, 2.0, 17);
    PartitionSpec bad;
    bad.min_shard = 5;
    CHECK_THROWS_AS(partition_dataset(tiny, 5, bad, 1), ConfigError);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(partition_dataset(ds, 0, spec, 1), ConfigError);
    PartitionSpec nb;
    nb.mode = PartitionSpec::Mode::Dirichlet;
    nb.beta = 0;
    CHECK_THROWS_AS(partition_dataset(ds, 2, nb, 1), ConfigError);
  }
}

TEST_CASE("straggler assignment rounds half up and is seeded") {
  StragglerSpec spec;
  spec.straggler_epochs = 1;
  spec.normal_epochs = 5;

  SUBCASE("zero fraction") {
    spec.fraction = 0;
    auto epochs = assign_stragglers(10, spec, 1);
    CHECK(epochs == std::vector<int>(10, 5));
  }
  SUBCASE("half of nine rounds to five") {
    spec.fraction = 0.5;
    auto epochs = assign_stragglers(9, spec, 1);
    CHECK(std::count(epochs.begin(), epochs.end(), 1) == 5);
    CHECK(std::count(epochs.begin(), epochs.end(), 5) == 4);
  }
  SUBCASE("ninety percent of ten") {
    spec.fraction = 0.9;
    auto epochs = assign_stragglers(10, spec, 1);
    CHECK(std::count(epochs.begin(), epochs.end(), 1) == 9);
  }
  SUBCASE("full fraction") {
    spec.fraction = 1.0;
    auto epochs = assign_stragglers(4, spec, 1);
    CHECK(epochs == std::vector<int>(4, 1));
  }
  SUBCASE("seed determinism") {
    spec.fraction = 0.4;
    CHECK(assign_stragglers(10, spec, 3) == assign_stragglers(10, spec, 3));
    bool any_diff = false;
    for (std::uint64_t s = 4; s < 14 && !any_diff; ++s)
      any_diff = assign_stragglers(10, spec, 3) != assign_stragglers(10, spec, s);
    CHECK(any_diff);
  }
  SUBCASE("bad arguments") {
    spec.fraction = 1.5;
    CHECK_THROWS_AS(assign_stragglers(10, spec, 1), ConfigError);
    spec.fraction = 0.5;
    spec.straggler_epochs = 0;
    CHECK_THROWS_AS(assign_stragglers(10, spec, 1), ConfigError);
    CHECK_THROWS_AS(assign_stragglers(0, StragglerSpec{}, 1), ConfigError);
  }
}
