#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gscls/gs_ply.hpp"
#include "gscls/real.hpp"

namespace gscls {

struct SampleIndices {
  std::vector<std::size_t> indices;
  std::size_t source_size = 0;
};

// Greedy farthest point sampling over N x 3 positions. The first index is
// seeded-uniform over [0, N); each subsequent pick maximizes the min distance
// to the chosen set, ties broken by lowest index. When m > N, all N indices
// are followed by seeded resampling with replacement up to length m.
SampleIndices farthest_point_sample(std::span<const Real> positions, std::size_t m,
                                    std::uint64_t seed);

// Gathers all per-point attributes in index order.
GaussianCloud gather(const GaussianCloud& cloud, const SampleIndices& idx);

}  // namespace gscls
