#ifndef FEDMESH_DATAGEN_HPP
#define FEDMESH_DATAGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fedmesh {

// Gaussian-mixture classification set: one unit-variance blob per class,
// class means kept at pairwise distance >= separation.
struct SyntheticDataset {
  int n = 0;
  int d = 0;
  int classes = 0;
  std::vector<double> x;  // row-major, n * d
  std::vector<int> y;     // n labels in [0, classes)
  std::vector<double> means;  // classes * d

  const double* sample(int i) const { return x.data() + static_cast<std::size_t>(i) * d; }
};

SyntheticDataset generate_dataset(int n, int d, int classes, double separation,
                                  std::uint64_t seed);

struct PartitionSpec {
  enum class Mode { Iid, Dirichlet };
  Mode mode = Mode::Iid;
  double beta = 0.5;  // Dirichlet concentration; lower = more skewed shards
  int min_shard = 1;  // resample until every shard has at least this many samples
};

// Split sample indices across `workers` shards. IID assigns each sample to a
// uniformly random shard; Dirichlet draws per-worker class proportions and
// apportions each class accordingly. Shards are disjoint and cover the set.
std::vector<std::vector<int>> partition_dataset(const SyntheticDataset& ds, int workers,
                                                const PartitionSpec& spec, std::uint64_t seed);

struct StragglerSpec {
  double fraction = 0;     // share of workers trained with the reduced epoch count
  int straggler_epochs = 1;
  int normal_epochs = 5;
};

// Per-worker local epoch counts; round(fraction * workers) workers (ties up)
// are picked without replacement as stragglers.
std::vector<int> assign_stragglers(int workers, const StragglerSpec& spec, std::uint64_t seed);

}  // namespace fedmesh

#endif
