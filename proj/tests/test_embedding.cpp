#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gscls/embedding.hpp"
#include "gscls/error.hpp"
#include "gscls/rng.hpp"

using namespace gscls;

namespace {

// Natural-log Shannon perplexity of one affinity row.
Real row_perplexity(std::span<const Real> row) {
  Real h = 0;
  for (Real p : row) {
    if (p > 0) h -= p * std::log(p);
  }
  return std::exp(h);
}

// Two well-separated Gaussian blobs in `d` dimensions.
std::vector<Real> two_blobs(Rng& rng, std::size_t per_cluster, std::size_t d, Real gap,
                            std::vector<std::size_t>* labels) {
  std::vector<Real> X;
  for (std::size_t i = 0; i < 2 * per_cluster; ++i) {
    const std::size_t label = i < per_cluster ? 0 : 1;
    if (labels) labels->push_back(label);
    for (std::size_t c = 0; c < d; ++c) {
      X.push_back(rng.normal() * 0.5 + (c == 0 ? (label ? gap : 0.0) : 0.0));
    }
  }
  return X;
}

}  // namespace

TEST_CASE("pca recovers a 1-D line exactly") {
  // Points on the line (t, 2t, -t): first component captures everything.
  std::vector<Real> X;
  for (int i = -5; i <= 5; ++i) {
    const Real t = static_cast<Real>(i);
    X.insert(X.end(), {t, 2 * t, -t});
  }
  const std::vector<Real> Y = pca(X, 11, 3, 2);
  REQUIRE(Y.size() == 22);
  // Second component is numerically zero; first is monotone in t.
  for (std::size_t i = 0; i < 11; ++i) CHECK(std::abs(Y[i * 2 + 1]) < 1e-9);
  for (std::size_t i = 0; i + 1 < 11; ++i) CHECK(Y[i * 2] < Y[(i + 1) * 2]);
}

TEST_CASE("pca output dimensions are uncorrelated and variance-ordered") {
  Rng rng(3);
  const std::size_t n = 200, d = 6;
  std::vector<Real> X(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      // Decreasing variance per raw axis, with some mixing.
      X[i * d + c] = rng.normal() * static_cast<Real>(d - c) + 0.3 * rng.normal();
    }
  }
  const std::vector<Real> Y = pca(X, n, d, 3);
  std::vector<Real> mean(3, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) mean[c] += Y[i * 3 + c];
  }
  for (Real& m : mean) m /= static_cast<Real>(n);
  std::vector<Real> cov(9, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        cov[a * 3 + b] += (Y[i * 3 + a] - mean[a]) * (Y[i * 3 + b] - mean[b]);
      }
    }
  }
  for (Real& v : cov) v /= static_cast<Real>(n - 1);
  CHECK(cov[0] >= cov[4]);
  CHECK(cov[4] >= cov[8]);
  CHECK(std::abs(cov[1]) < 1e-6 * cov[0]);
  CHECK(std::abs(cov[2]) < 1e-6 * cov[0]);
  CHECK(std::abs(cov[5]) < 1e-6 * cov[0]);

  // Determinism including component signs.
  CHECK(pca(X, n, d, 3) == Y);
}

TEST_CASE("three equidistant points at perplexity 2 split affinities evenly") {
  // Equilateral triangle: each row must be (0.5, 0.5) over the two neighbors.
  const std::vector<Real> X{0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2};
  const std::vector<Real> P = conditional_affinities(X, 3, 2, 2.0);
  REQUIRE(P.size() == 9);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(P[i * 3 + i] == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) CHECK(P[i * 3 + j] == doctest::Approx(0.5).epsilon(1e-6));
    }
  }
}

TEST_CASE("affinity rows hit the target perplexity within 1e-3") {
  Rng rng(7);
  const std::size_t n = 60, d = 8;
  std::vector<Real> X(n * d);
  for (Real& v : X) v = rng.normal();
  for (const Real perplexity : {5.0, 15.0, 19.0}) {
    const std::vector<Real> P = conditional_affinities(X, n, d, perplexity);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Real> row(P.begin() + i * n, P.begin() + (i + 1) * n);
      Real total = 0;
      for (Real p : row) total += p;
      CHECK(std::abs(total - 1.0) < 1e-9);
      CHECK(row[i] == 0.0);
      CHECK(row_perplexity(row) == doctest::Approx(perplexity).epsilon(1e-3 / perplexity));
    }
  }
}

TEST_CASE("infeasible perplexity targets are rejected") {
  const std::vector<Real> X{0, 0, 1, 1};  // n = 2: max achievable perplexity is 1
  CHECK_THROWS_AS(conditional_affinities(X, 2, 2, 30.0), Error);
}

TEST_CASE("tsne validates its inputs") {
  Rng rng(11);
  std::vector<Real> X(30 * 4);
  for (Real& v : X) v = rng.normal();
  EmbeddingConfig config;

  config.perplexity = 30;  // >= (n - 1) / 3
  CHECK_THROWS_AS(tsne(X, 30, 4, config), Error);

  config.perplexity = 5;
  config.iterations = 100;  // < 250
  CHECK_THROWS_AS(tsne(X, 30, 4, config), Error);

  std::vector<Real> tiny(5 * 4);
  for (Real& v : tiny) v = rng.normal();
  config.iterations = 300;
  config.perplexity = 1.2;
  CHECK_THROWS_AS(tsne(tiny, 5, 4, config), Error);  // n < 10
}

TEST_CASE("tsne reduces KL and separates two 50-D clusters") {
  Rng rng(13);
  std::vector<std::size_t> labels;
  const std::vector<Real> X = two_blobs(rng, 15, 50, 40.0, &labels);

  EmbeddingConfig config;
  config.perplexity = 8;
  config.iterations = 400;
  const TsneResult result = tsne(X, 30, 50, config);

  REQUIRE(result.embedding.size() == 60);
  REQUIRE(result.kl_trace.size() == 401);  // per-iteration trace plus the final state
  CHECK(result.kl_trace.back() < result.kl_trace.front());
  for (Real kl : result.kl_trace) CHECK(kl >= -1e-12);

  // The embedding is centered each iteration.
  Real cx = 0, cy = 0;
  for (std::size_t i = 0; i < 30; ++i) {
    cx += result.embedding[i * 2];
    cy += result.embedding[i * 2 + 1];
  }
  CHECK(std::abs(cx / 30) < 1e-9);
  CHECK(std::abs(cy / 30) < 1e-9);

  CHECK(silhouette(result.embedding, 30, 2, labels) > 0.8);
}

TEST_CASE("tsne is deterministic") {
  Rng rng(17);
  const std::size_t n = 20, d = 10;
  std::vector<Real> X(n * d);
  for (Real& v : X) v = rng.normal();
  EmbeddingConfig config;
  config.perplexity = 5;
  config.iterations = 260;
  const TsneResult a = tsne(X, n, d, config);
  const TsneResult b = tsne(X, n, d, config);
  CHECK(a.embedding == b.embedding);
  CHECK(a.kl_trace == b.kl_trace);
}

TEST_CASE("silhouette: separated clusters near 1, merged clusters near 0") {
  Rng rng(19);
  std::vector<std::size_t> labels;
  const std::vector<Real> far = two_blobs(rng, 20, 2, 50.0, &labels);
  CHECK(silhouette(far, 40, 2, labels) > 0.9);

  std::vector<std::size_t> same_labels = labels;
  const std::vector<Real> merged = two_blobs(rng, 20, 2, 0.0, nullptr);
  CHECK(std::abs(silhouette(merged, 40, 2, same_labels)) < 0.25);

  // Permuted labels on separated clusters score poorly.
  std::vector<std::size_t> wrong(labels.rbegin(), labels.rend());
  std::vector<std::size_t> half_wrong = labels;
  for (std::size_t i = 0; i < 10; ++i) half_wrong[i] = 1;
  CHECK(silhouette(far, 40, 2, half_wrong) < 0.5);
}

TEST_CASE("silhouette requires at least two populated clusters") {
  const std::vector<Real> X{0, 0, 1, 1, 2, 2};
  const std::vector<std::size_t> one_cluster{0, 0, 0};
  CHECK_THROWS_AS(silhouette(X, 3, 2, one_cluster), Error);
}

TEST_CASE("singleton clusters contribute zero silhouette") {
  // Two points in cluster 0, one alone in cluster 1.
  const std::vector<Real> X{0, 0, 1, 0, 10, 0};
  const std::vector<std::size_t> labels{0, 0, 1};
  // Point 0: a = 1, b = 10 -> (10-1)/10 = 0.9. Point 1: a = 1, b = 9 -> 8/9.
  // Point 2: singleton -> 0.
  const Real expected = (0.9 + 8.0 / 9.0 + 0.0) / 3.0;
  CHECK(silhouette(X, 3, 2, labels) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("embedding CSV has the documented header and one row per point") {
  const std::vector<Real> embedding{1.5, -2.25, 0.125, 3.0};
  const std::vector<std::size_t> labels{1, 0};
  const std::vector<std::string> names{"alpha", "beta"};
  const std::string csv = embedding_csv(embedding, labels, names);
  CHECK(csv.rfind("x,y,label,class\n", 0) == 0);
  CHECK(csv.find("1.5,-2.25,1,beta\n") != std::string::npos);
  CHECK(csv.find("0.125,3,0,alpha\n") != std::string::npos);
}
