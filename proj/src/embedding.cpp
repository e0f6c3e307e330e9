#include "gscls/embedding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "gscls/error.hpp"

namespace gscls {

namespace {

using MatrixR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<Real> pairwise_sq_distances(std::span<const Real> X, std::size_t n, std::size_t d) {
  std::vector<Real> D(n * n, Real(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      Real acc = 0;
      for (std::size_t c = 0; c < d; ++c) {
        const Real diff = X[i * d + c] - X[j * d + c];
        acc += diff * diff;
      }
      D[i * n + j] = acc;
      D[j * n + i] = acc;
    }
  }
  return D;
}

// Natural-log entropy of the row distribution for the given precision beta;
// fills `row` with p(j|i). Stabilized by shifting distances by the row min.
Real row_perplexity(const std::vector<Real>& D, std::size_t n, std::size_t i, Real beta,
                    std::vector<Real>& row) {
  Real min_d = std::numeric_limits<Real>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) min_d = std::min(min_d, D[i * n + j]);
  }
  Real sum = 0, weighted = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0;
      continue;
    }
    const Real shifted = D[i * n + j] - min_d;
    row[j] = std::exp(-beta * shifted);
    sum += row[j];
    weighted += shifted * row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  const Real entropy = std::log(sum) + beta * weighted / sum;
  return std::exp(entropy);
}

}  // namespace

std::vector<Real> pca(std::span<const Real> X, std::size_t n, std::size_t d,
                      std::size_t out_dims) {
  if (n == 0 || d == 0 || X.size() != n * d) {
    throw Error(ErrorCode::ShapeMismatch, "pca input must be a non-empty n x d matrix");
  }
  if (out_dims == 0 || out_dims > d || n <= out_dims) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("pca with n={}, d={} cannot produce {} components", n, d, out_dims));
  }

  Eigen::Map<const MatrixR> data(X.data(), static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(d));
  MatrixR centered = data.rowwise() - data.colwise().mean();
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> cov =
      (centered.transpose() * centered) / static_cast<Real>(n - 1);
  if (cov.trace() <= Real(1e-30)) {
    throw Error(ErrorCode::DegenerateData, "pca input has zero variance");
  }

  // Eigenvalues ascend; take the top out_dims columns in descending order.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::DegenerateData, "pca eigen-decomposition failed");
  }
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> components(d, out_dims);
  for (std::size_t c = 0; c < out_dims; ++c) {
    Eigen::Matrix<Real, Eigen::Dynamic, 1> v =
        solver.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
    Eigen::Index max_at = 0;
    for (Eigen::Index r = 1; r < v.size(); ++r) {
      if (std::abs(v[r]) > std::abs(v[max_at])) max_at = r;
    }
    if (v[max_at] < 0) v = -v;  // deterministic sign
    components.col(static_cast<Eigen::Index>(c)) = v;
  }

  MatrixR projected = centered * components;
  return {projected.data(), projected.data() + n * out_dims};
}

std::vector<Real> conditional_affinities(std::span<const Real> X, std::size_t n, std::size_t d,
                                         Real perplexity) {
  if (n < 2 || X.size() != n * d) {
    throw Error(ErrorCode::ShapeMismatch, "affinities need at least 2 points of n x d data");
  }
  if (!(perplexity > 0)) {
    throw Error(ErrorCode::InvalidArgument, "perplexity must be positive");
  }

  const std::vector<Real> D = pairwise_sq_distances(X, n, d);
  std::vector<Real> P(n * n, Real(0));
  std::vector<Real> row(n);

  for (std::size_t i = 0; i < n; ++i) {
    Real lo = 1e-20, hi = 1e20;
    Real beta = 1;
    Real realized = row_perplexity(D, n, i, beta, row);
    for (int iter = 0; iter < 64 && std::abs(realized - perplexity) > 1e-3; ++iter) {
      if (realized > perplexity) {
        lo = beta;  // too spread out: sharpen
      } else {
        hi = beta;
      }
      beta = std::sqrt(lo * hi);  // bisect in log space
      realized = row_perplexity(D, n, i, beta, row);
    }
    if (std::abs(realized - perplexity) > 1e-3) {
      throw Error(ErrorCode::PerplexityInfeasible,
                  fmt::format("row {}: bandwidth search reached perplexity {} for target {}", i,
                              realized, perplexity));
    }
    for (std::size_t j = 0; j < n; ++j) P[i * n + j] = row[j];
  }
  return P;
}

TsneResult tsne(std::span<const Real> X, std::size_t n, std::size_t d,
                const EmbeddingConfig& config) {
  if (n < 10) {
    throw Error(ErrorCode::InvalidArgument, "tsne needs at least 10 points");
  }
  if (!(config.perplexity < static_cast<Real>(n - 1) / 3)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("perplexity {} too large for {} points", config.perplexity, n));
  }
  if (config.iterations < 250) {
    throw Error(ErrorCode::InvalidArgument, "tsne needs at least 250 iterations");
  }

  // Symmetrized joint affinities.
  const std::vector<Real> cond = conditional_affinities(X, n, d, config.perplexity);
  std::vector<Real> P(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      P[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2 * static_cast<Real>(n));
    }
  }

  // PCA init, rescaled to 1e-4 standard deviation.
  std::vector<Real> Y = pca(X, n, d, 2);
  {
    Real var = 0;
    for (Real v : Y) var += v * v;  // columns are centered
    const Real std_dev = std::sqrt(var / static_cast<Real>(Y.size()));
    const Real target = 1e-4;
    for (Real& v : Y) v = v / std_dev * target;
  }

  std::vector<Real> velocity(n * 2, Real(0));
  std::vector<Real> gains(n * 2, Real(1));
  std::vector<Real> Q(n * n);
  std::vector<Real> gradient(n * 2);
  TsneResult result;
  result.kl_trace.reserve(config.iterations + 1);

  auto compute_q = [&]() {
    Real z = 0;
    for (std::size_t i = 0; i < n; ++i) {
      Q[i * n + i] = 0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const Real dx = Y[i * 2] - Y[j * 2];
        const Real dy = Y[i * 2 + 1] - Y[j * 2 + 1];
        const Real w = Real(1) / (Real(1) + dx * dx + dy * dy);
        Q[i * n + j] = w;
        Q[j * n + i] = w;
        z += 2 * w;
      }
    }
    return z;
  };
  auto kl_divergence = [&](Real z) {
    Real kl = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || P[i * n + j] <= 0) continue;
        const Real q = std::max(Q[i * n + j] / z, Real(1e-12));
        kl += P[i * n + j] * std::log(P[i * n + j] / q);
      }
    }
    return kl;
  };

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const Real exaggeration = iter < config.exaggeration_iters ? config.early_exaggeration : 1;
    const Real momentum =
        iter < config.momentum_switch ? config.momentum_start : config.momentum_late;

    const Real z = compute_q();
    result.kl_trace.push_back(kl_divergence(z));

    std::fill(gradient.begin(), gradient.end(), Real(0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const Real w = Q[i * n + j];  // unnormalized kernel value
        // Reference-implementation convention: the constant factor of the KL
        // gradient is folded into the learning-rate scale.
        const Real coeff = (exaggeration * P[i * n + j] - w / z) * w;
        gradient[i * 2] += coeff * (Y[i * 2] - Y[j * 2]);
        gradient[i * 2 + 1] += coeff * (Y[i * 2 + 1] - Y[j * 2 + 1]);
      }
    }

    for (std::size_t i = 0; i < n * 2; ++i) {
      // Per-coordinate adaptive gains (the reference implementation's scheme):
      // grow when the gradient keeps its direction, shrink when it flips.
      gains[i] = (gradient[i] > 0) != (velocity[i] > 0) ? gains[i] + Real(0.2)
                                                        : gains[i] * Real(0.8);
      gains[i] = std::max(gains[i], Real(0.01));
      velocity[i] = momentum * velocity[i] - config.learning_rate * gains[i] * gradient[i];
      Y[i] += velocity[i];
    }
    // Re-center each iteration.
    Real mean_x = 0, mean_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_x += Y[i * 2];
      mean_y += Y[i * 2 + 1];
    }
    mean_x /= static_cast<Real>(n);
    mean_y /= static_cast<Real>(n);
    for (std::size_t i = 0; i < n; ++i) {
      Y[i * 2] -= mean_x;
      Y[i * 2 + 1] -= mean_y;
    }
  }
  result.kl_trace.push_back(kl_divergence(compute_q()));
  result.embedding = std::move(Y);
  return result;
}

Real silhouette(std::span<const Real> X, std::size_t n, std::size_t d,
                std::span<const std::size_t> labels) {
  if (labels.size() != n || X.size() != n * d || n < 2) {
    throw Error(ErrorCode::ShapeMismatch, "silhouette needs n x d data with n labels");
  }
  const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t label : labels) ++counts[label];
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw Error(ErrorCode::InvalidArgument, "silhouette needs at least 2 clusters");
  }

  Real total = 0;
  std::vector<Real> mean_dist(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(mean_dist.begin(), mean_dist.end(), Real(0));
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      Real acc = 0;
      for (std::size_t c = 0; c < d; ++c) {
        const Real diff = X[i * d + c] - X[j * d + c];
        acc += diff * diff;
      }
      mean_dist[labels[j]] += std::sqrt(acc);
    }
    const std::size_t own = labels[i];
    if (counts[own] == 1) continue;  // singleton clusters contribute 0
    const Real a = mean_dist[own] / static_cast<Real>(counts[own] - 1);
    Real b = std::numeric_limits<Real>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own || counts[c] == 0) continue;
      b = std::min(b, mean_dist[c] / static_cast<Real>(counts[c]));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<Real>(n);
}

std::string embedding_csv(std::span<const Real> embedding, std::span<const std::size_t> labels,
                          const std::vector<std::string>& class_names) {
  if (embedding.size() != labels.size() * 2) {
    throw Error(ErrorCode::ShapeMismatch, "embedding must be n x 2 with n labels");
  }
  std::string out = "x,y,label,class\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_names.size()) {
      throw Error(ErrorCode::InvalidLabel,
                  fmt::format("label {} out of range for {} classes", labels[i],
                              class_names.size()));
    }
    out += fmt::format("{},{},{},{}\n", embedding[i * 2], embedding[i * 2 + 1], labels[i],
                       class_names[labels[i]]);
  }
  return out;
}

}  // namespace gscls
