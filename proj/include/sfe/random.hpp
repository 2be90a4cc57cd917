#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sfe/measure.hpp"
#include "sfe/types.hpp"

namespace sfe {

// Seed for stream `index` of a run seeded with `seed` (splitmix64 mixing),
// so per-item streams do not depend on how work is split across threads.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

using Rng = std::mt19937_64;

// Draws from a density on its support. In one dimension this is the exact
// inverse CDF of the cell-uniform density; otherwise a cell is chosen by
// alias sampling and the point is jittered uniformly inside the cell cube.
class DensitySampler {
 public:
  explicit DensitySampler(const Density& p);

  Eigen::RowVectorXd operator()(Rng& rng) const;
  // Index of the cell a draw falls in, without jitter.
  std::size_t cell(Rng& rng) const;

 private:
  SupportPtr support_;
  int dim_;
  // One-dimensional inverse CDF over cells sorted by coordinate.
  std::vector<std::size_t> order_;
  std::vector<double> cumulative_;
  // Alias table.
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

// n draws, draw i from stream_seed(seed, i).
RowMat sample_density(const Density& p, std::size_t n, std::uint64_t seed);

}  // namespace sfe
