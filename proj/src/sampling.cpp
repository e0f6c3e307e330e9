#include "gscls/sampling.hpp"

#include <fmt/format.h>
#include <limits>

#include "gscls/error.hpp"
#include "gscls/rng.hpp"

namespace gscls {

SampleIndices farthest_point_sample(std::span<const Real> positions, std::size_t m,
                                    std::uint64_t seed) {
  if (positions.empty() || positions.size() % 3 != 0) {
    throw Error(ErrorCode::EmptyInput, "positions must be a non-empty N x 3 array");
  }
  if (m == 0) {
    throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  }
  const std::size_t n = positions.size() / 3;

  Rng rng(seed);
  SampleIndices out;
  out.source_size = n;
  out.indices.reserve(m);

  const std::size_t target = std::min(m, n);
  const std::size_t start = static_cast<std::size_t>(rng.below(n));
  out.indices.push_back(start);

  // min_dist2[i] tracks the squared distance from i to the chosen set.
  std::vector<Real> min_dist2(n, std::numeric_limits<Real>::infinity());
  auto relax = [&](std::size_t chosen) {
    const Real* p = positions.data() + chosen * 3;
    for (std::size_t i = 0; i < n; ++i) {
      const Real dx = positions[i * 3] - p[0];
      const Real dy = positions[i * 3 + 1] - p[1];
      const Real dz = positions[i * 3 + 2] - p[2];
      const Real d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < min_dist2[i]) min_dist2[i] = d2;
    }
  };
  relax(start);

  while (out.indices.size() < target) {
    std::size_t best = 0;
    Real best_d2 = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_dist2[i] > best_d2) {  // strict: ties keep the lowest index
        best_d2 = min_dist2[i];
        best = i;
      }
    }
    out.indices.push_back(best);
    relax(best);
  }

  while (out.indices.size() < m) {
    out.indices.push_back(static_cast<std::size_t>(rng.below(n)));
  }
  return out;
}

GaussianCloud gather(const GaussianCloud& cloud, const SampleIndices& idx) {
  cloud.validate();
  if (idx.source_size != cloud.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                fmt::format("indices built for {} points, cloud has {}", idx.source_size,
                            cloud.size()));
  }
  GaussianCloud out;
  const std::size_t m = idx.indices.size();
  const std::size_t w = cloud.payload_width;
  out.payload_width = w;
  out.positions.resize(m * 3);
  out.opacity.resize(m);
  out.scale.resize(m * 3);
  out.rotation.resize(m * 4);
  out.color_payload.resize(m * w);

  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = idx.indices[j];
    if (i >= cloud.size()) {
      throw Error(ErrorCode::IndexOutOfRange,
                  fmt::format("index {} out of range for {} points", i, cloud.size()));
    }
    for (int c = 0; c < 3; ++c) out.positions[j * 3 + c] = cloud.positions[i * 3 + c];
    out.opacity[j] = cloud.opacity[i];
    for (int c = 0; c < 3; ++c) out.scale[j * 3 + c] = cloud.scale[i * 3 + c];
    for (int c = 0; c < 4; ++c) out.rotation[j * 4 + c] = cloud.rotation[i * 4 + c];
    for (std::size_t c = 0; c < w; ++c) out.color_payload[j * w + c] = cloud.color_payload[i * w + c];
  }
  return out;
}

}  // namespace gscls
