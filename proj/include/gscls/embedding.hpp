#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gscls/real.hpp"

namespace gscls {

struct EmbeddingConfig {
  Real perplexity = 30;
  std::size_t iterations = 1000;       // >= 250
  Real early_exaggeration = 12;        // applied for the first 250 iterations
  std::size_t exaggeration_iters = 250;
  Real learning_rate = 200;
  Real momentum_start = 0.5;
  Real momentum_late = 0.8;            // after iteration 250
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;              // reserved; init is deterministic PCA
};

// Projection of row-major n x d data onto the top out_dims principal
// components (eigen-decomposition of the centered covariance). Deterministic
// sign: each component's largest-magnitude loading is positive.
std::vector<Real> pca(std::span<const Real> X, std::size_t n, std::size_t d,
                      std::size_t out_dims);

// Row-conditional Gaussian affinities P(j|i) (n x n, zero diagonal, rows sum
// to 1) with per-row bandwidths bisected so each row's perplexity matches the
// target within 1e-3.
std::vector<Real> conditional_affinities(std::span<const Real> X, std::size_t n, std::size_t d,
                                         Real perplexity);

struct TsneResult {
  std::vector<Real> embedding;  // n x 2
  std::vector<Real> kl_trace;   // KL(P || Q) per iteration, exaggeration removed
};

// Exact t-SNE: symmetrized affinities, Student-t low-dimensional kernel,
// gradient descent with early exaggeration and momentum, PCA init scaled to
// 1e-4 std, re-centered every iteration.
TsneResult tsne(std::span<const Real> X, std::size_t n, std::size_t d,
                const EmbeddingConfig& config);

// Mean silhouette coefficient over all points (Euclidean distances).
Real silhouette(std::span<const Real> X, std::size_t n, std::size_t d,
                std::span<const std::size_t> labels);

std::string embedding_csv(std::span<const Real> embedding, std::span<const std::size_t> labels,
                          const std::vector<std::string>& class_names);

}  // namespace gscls
