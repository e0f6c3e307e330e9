#pragma once

// Shared reference implementations the test suites check the library against.
// Everything here is deliberately written independently of src/.

#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "gscls/gs_ply.hpp"
#include "gscls/real.hpp"
#include "gscls/rng.hpp"
#include "gscls/tensor.hpp"

namespace oracles {

// Central finite-difference check of dLoss/dLeaf for every leaf tensor.
// `build_loss` must be deterministic (re-seed any internal randomness).
inline double max_gradient_error(const std::vector<gscls::TensorPtr>& leaves,
                                 const std::function<gscls::TensorPtr()>& build_loss,
                                 double h = 1e-5) {
  for (const auto& leaf : leaves) leaf->zero_grad();
  gscls::TensorPtr loss = build_loss();
  gscls::backward(loss);
  std::vector<std::vector<gscls::Real>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    leaf->ensure_grad();
    analytic.push_back(leaf->grad);
  }

  double worst = 0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    gscls::Tensor& leaf = *leaves[li];
    for (std::size_t i = 0; i < leaf.data.size(); ++i) {
      const gscls::Real saved = leaf.data[i];
      leaf.data[i] = saved + h;
      const double plus = build_loss()->data[0];
      leaf.data[i] = saved - h;
      const double minus = build_loss()->data[0];
      leaf.data[i] = saved;
      const double fd = (plus - minus) / (2 * h);
      const double a = analytic[li][i];
      const double err = std::abs(fd - a) / std::max(std::abs(fd) + std::abs(a), 1e-3);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Exhaustive greedy farthest-point selection from a fixed start index.
inline std::vector<std::size_t> fps_reference(std::span<const gscls::Real> positions,
                                              std::size_t m, std::size_t start) {
  const std::size_t n = positions.size() / 3;
  std::vector<std::size_t> chosen{start};
  while (chosen.size() < std::min(m, n)) {
    std::size_t best = 0;
    gscls::Real best_min = -1;
    for (std::size_t i = 0; i < n; ++i) {
      gscls::Real min_d = std::numeric_limits<gscls::Real>::infinity();
      for (std::size_t c : chosen) {
        gscls::Real d2 = 0;
        for (int a = 0; a < 3; ++a) {
          const gscls::Real diff = positions[i * 3 + a] - positions[c * 3 + a];
          d2 += diff * diff;
        }
        min_d = std::min(min_d, d2);
      }
      if (min_d > best_min) {  // strict comparison keeps the lowest index on ties
        best_min = min_d;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

// Random storage-space cloud with finite fields and usable quaternions.
inline gscls::RawGaussianCloud random_raw_cloud(gscls::Rng& rng, std::size_t n,
                                                std::size_t rest_triples) {
  gscls::RawGaussianCloud cloud;
  cloud.positions.resize(n * 3);
  cloud.normals.resize(n * 3);
  cloud.color_dc.resize(n * 3);
  cloud.color_rest.resize(n * 3 * rest_triples);
  cloud.opacity_logit.resize(n);
  cloud.log_scale.resize(n * 3);
  cloud.raw_rotation.resize(n * 4);
  for (auto* field : {&cloud.positions, &cloud.normals, &cloud.color_dc, &cloud.color_rest}) {
    for (gscls::Real& v : *field) v = rng.normal();
  }
  for (gscls::Real& v : cloud.opacity_logit) v = rng.uniform(-5, 5);
  for (gscls::Real& v : cloud.log_scale) v = rng.uniform(-6, 0);
  for (std::size_t i = 0; i < n; ++i) {
    gscls::Real norm2 = 0;
    do {
      norm2 = 0;
      for (int c = 0; c < 4; ++c) {
        cloud.raw_rotation[i * 4 + c] = rng.normal();
        norm2 += cloud.raw_rotation[i * 4 + c] * cloud.raw_rotation[i * 4 + c];
      }
    } while (norm2 < 1e-6);
  }
  return cloud;
}

// Random activated cloud satisfying every GaussianCloud invariant.
inline gscls::GaussianCloud random_cloud(gscls::Rng& rng, std::size_t n) {
  gscls::GaussianCloud cloud;
  cloud.positions.resize(n * 3);
  cloud.opacity.resize(n);
  cloud.scale.resize(n * 3);
  cloud.rotation.resize(n * 4);
  cloud.payload_width = 3;
  cloud.color_payload.resize(n * 3);
  for (gscls::Real& v : cloud.positions) v = rng.normal();
  for (gscls::Real& v : cloud.opacity) v = rng.uniform(0.01, 0.99);
  for (gscls::Real& v : cloud.scale) v = std::exp(rng.uniform(-4, 0));
  for (gscls::Real& v : cloud.color_payload) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    std::array<gscls::Real, 4> q;
    gscls::Real norm2 = 0;
    do {
      norm2 = 0;
      for (int c = 0; c < 4; ++c) {
        q[c] = rng.normal();
        norm2 += q[c] * q[c];
      }
    } while (norm2 < 1e-6);
    q = gscls::canonical_unit_quaternion(q);
    for (int c = 0; c < 4; ++c) cloud.rotation[i * 4 + c] = q[c];
  }
  return cloud;
}

inline std::array<gscls::Real, 4> random_unit_quaternion(gscls::Rng& rng) {
  std::array<gscls::Real, 4> q;
  gscls::Real norm2 = 0;
  do {
    norm2 = 0;
    for (int c = 0; c < 4; ++c) {
      q[c] = rng.normal();
      norm2 += q[c] * q[c];
    }
  } while (norm2 < 1e-6);
  return gscls::canonical_unit_quaternion(q);
}

}  // namespace oracles
