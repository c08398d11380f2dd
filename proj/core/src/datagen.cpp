#include "fedmesh/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fedmesh/errors.hpp"
#include "fedmesh/util.hpp"

namespace fedmesh {

SyntheticDataset generate_dataset(int n, int d, int classes, double separation,
                                  std::uint64_t seed) {
  if (d < 1) throw ConfigError("datagen: d must be >= 1");
  if (classes < 2) throw ConfigError("datagen: need at least 2 classes");
  if (n < classes) throw ConfigError("datagen: n must be >= class count");
  if (separation < 0) throw ConfigError("datagen: negative separation");

  SyntheticDataset ds;
  ds.n = n;
  ds.d = d;
  ds.classes = classes;
  ds.means.assign(static_cast<std::size_t>(classes) * d, 0.0);

  std::mt19937_64 rng(derive_seed(seed, "dataset"));
  if (classes <= d) {
    // scaled standard-basis corners: pairwise distance is exactly `separation`
    const double scale = separation / std::sqrt(2.0);
    for (int c = 0; c < classes; ++c) ds.means[static_cast<std::size_t>(c) * d + c] = scale;
  } else {
    // random placement, rescaled until the closest pair clears the separation
    std::normal_distribution<double> g(0, 1);
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (auto& m : ds.means) m = g(rng) * separation;
      double min_dist = std::numeric_limits<double>::infinity();
      for (int a = 0; a < classes; ++a)
        for (int b = a + 1; b < classes; ++b) {
          double s = 0;
          for (int j = 0; j < d; ++j) {
            const double diff = ds.means[static_cast<std::size_t>(a) * d + j] -
                                ds.means[static_cast<std::size_t>(b) * d + j];
            s += diff * diff;
          }
          min_dist = std::min(min_dist, std::sqrt(s));
        }
      if (min_dist >= separation) break;
      if (attempt == 63) throw ConfigError("datagen: failed to separate class means");
    }
  }

  // balanced labels, remainder spread over the first classes
  std::vector<int> labels;
  labels.reserve(n);
  const int base = n / classes;
  const int extra = n % classes;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < base + (c < extra ? 1 : 0); ++i) labels.push_back(c);
  std::shuffle(labels.begin(), labels.end(), rng);

  ds.x.assign(static_cast<std::size_t>(n) * d, 0.0);
  ds.y = std::move(labels);
  std::normal_distribution<double> noise(0, 1);
  for (int i = 0; i < n; ++i) {
    const double* mu = ds.means.data() + static_cast<std::size_t>(ds.y[i]) * d;
    double* row = ds.x.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) row[j] = mu[j] + noise(rng);
  }
  return ds;
}

std::vector<std::vector<int>> partition_dataset(const SyntheticDataset& ds, int workers,
                                                const PartitionSpec& spec, std::uint64_t seed) {
  if (workers < 1) throw ConfigError("partition: need at least one worker");
  if (ds.n < workers * spec.min_shard)
    throw ConfigError("partition: dataset too small for the requested shard floor");
  if (spec.mode == PartitionSpec::Mode::Dirichlet && !(spec.beta > 0))
    throw ConfigError("partition: dirichlet beta must be positive");

  std::mt19937_64 rng(derive_seed(seed, "partition"));
  constexpr int kMaxRetries = 100;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    std::vector<std::vector<int>> shards(workers);
    if (spec.mode == PartitionSpec::Mode::Iid) {
      std::uniform_int_distribution<int> pick(0, workers - 1);
      for (int i = 0; i < ds.n; ++i) shards[pick(rng)].push_back(i);
    } else {
      // per-worker class proportions q_k ~ Dir(beta); each class's samples are
      // apportioned across workers by the normalized column q_k(c)
      std::gamma_distribution<double> gamma(spec.beta, 1.0);
      std::vector<double> q(static_cast<std::size_t>(workers) * ds.classes);
      for (int k = 0; k < workers; ++k) {
        double sum = 0;
        for (int c = 0; c < ds.classes; ++c) {
          double g = gamma(rng);
          q[static_cast<std::size_t>(k) * ds.classes + c] = g;
          sum += g;
        }
        for (int c = 0; c < ds.classes; ++c) q[static_cast<std::size_t>(k) * ds.classes + c] /= sum;
      }
      std::vector<std::vector<int>> by_class(ds.classes);
      for (int i = 0; i < ds.n; ++i) by_class[ds.y[i]].push_back(i);
      for (int c = 0; c < ds.classes; ++c) {
        auto& members = by_class[c];
        std::shuffle(members.begin(), members.end(), rng);
        const int m = static_cast<int>(members.size());
        double col_sum = 0;
        for (int k = 0; k < workers; ++k) col_sum += q[static_cast<std::size_t>(k) * ds.classes + c];
        // largest-remainder apportionment keeps counts exact
        std::vector<int> counts(workers, 0);
        std::vector<std::pair<double, int>> rem;
        int assigned = 0;
        for (int k = 0; k < workers; ++k) {
          const double share = q[static_cast<std::size_t>(k) * ds.classes + c] / col_sum * m;
          counts[k] = static_cast<int>(std::floor(share));
          assigned += counts[k];
          rem.push_back({share - counts[k], k});
        }
        std::stable_sort(rem.begin(), rem.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (int i = 0; i < m - assigned; ++i) ++counts[rem[i].second];
        int pos = 0;
        for (int k = 0; k < workers; ++k)
          for (int i = 0; i < counts[k]; ++i) shards[k].push_back(members[pos++]);
      }
      for (auto& s : shards) std::sort(s.begin(), s.end());
    }
    const bool ok = std::all_of(shards.begin(), shards.end(), [&](const auto& s) {
      return static_cast<int>(s.size()) >= spec.min_shard;
    });
    if (ok) return shards;
  }
  throw ConfigError("partition: could not satisfy the shard floor in " +
                    std::to_string(kMaxRetries) + " draws");
}

std::vector<int> assign_stragglers(int workers, const StragglerSpec& spec, std::uint64_t seed) {
  if (workers < 1) throw ConfigError("stragglers: need at least one worker");
  if (!(spec.fraction >= 0 && spec.fraction <= 1))
    throw ConfigError("stragglers: fraction must be in [0,1]");
  if (spec.straggler_epochs < 1 || spec.normal_epochs < 1)
    throw ConfigError("stragglers: epoch counts must be >= 1");

  // round half up: fraction 0.5 of 9 workers -> 5 stragglers
  const int count = static_cast<int>(std::floor(spec.fraction * workers + 0.5));
  std::vector<int> idx(workers);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, "stragglers"));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> epochs(workers, spec.normal_epochs);
  for (int i = 0; i < count; ++i) epochs[idx[i]] = spec.straggler_epochs;
  return epochs;
}

}  // namespace fedmesh
