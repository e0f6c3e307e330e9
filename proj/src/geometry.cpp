#include "gscls/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "gscls/error.hpp"

namespace gscls {

FeatureMode parse_feature_mode(const std::string& name) {
  if (name == "p") return FeatureMode::p;
  if (name == "po") return FeatureMode::po;
  if (name == "psq") return FeatureMode::psq;
  if (name == "posq") return FeatureMode::posq;
  throw Error(ErrorCode::InvalidArgument,
              fmt::format("unknown feature mode \"{}\" (expected p, po, psq, posq)", name));
}

const char* feature_mode_name(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::p: return "p";
    case FeatureMode::po: return "po";
    case FeatureMode::psq: return "psq";
    case FeatureMode::posq: return "posq";
  }
  return "?";
}

std::size_t channel_count(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::p: return 3;
    case FeatureMode::po: return 4;
    case FeatureMode::psq: return 10;
    case FeatureMode::posq: return 11;
  }
  return 0;
}

std::pair<GaussianCloud, NormalizationRecord> normalize_cloud(const GaussianCloud& cloud) {
  cloud.validate();
  const std::size_t n = cloud.size();

  NormalizationRecord record;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) record.centroid[c] += cloud.positions[i * 3 + c];
  }
  for (int c = 0; c < 3; ++c) record.centroid[c] /= static_cast<Real>(n);

  Real max_dist2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Real d2 = 0;
    for (int c = 0; c < 3; ++c) {
      const Real d = cloud.positions[i * 3 + c] - record.centroid[c];
      d2 += d * d;
    }
    max_dist2 = std::max(max_dist2, d2);
  }
  record.radius = std::sqrt(max_dist2);
  if (!(record.radius > 0)) {
    throw Error(ErrorCode::ZeroRadius, "all points coincide; nothing to normalize");
  }

  GaussianCloud out = cloud;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.positions[i * 3 + c] = (cloud.positions[i * 3 + c] - record.centroid[c]) / record.radius;
      out.scale[i * 3 + c] = cloud.scale[i * 3 + c] / record.radius;
    }
  }
  return {std::move(out), record};
}

FeatureMatrix assemble_features(const GaussianCloud& cloud, FeatureMode mode,
                                bool log_scale_channels) {
  cloud.validate();
  const std::size_t n = cloud.size();
  const std::size_t c = channel_count(mode);
  const bool with_opacity = mode == FeatureMode::po || mode == FeatureMode::posq;
  const bool with_shape = mode == FeatureMode::psq || mode == FeatureMode::posq;

  FeatureMatrix features;
  features.mode = mode;
  features.rows = n;
  features.data.resize(n * c);

  for (std::size_t i = 0; i < n; ++i) {
    Real* row = features.data.data() + i * c;
    std::size_t at = 0;
    for (int k = 0; k < 3; ++k) row[at++] = cloud.positions[i * 3 + k];
    if (with_opacity) row[at++] = cloud.opacity[i];
    if (with_shape) {
      for (int k = 0; k < 3; ++k) {
        const Real s = cloud.scale[i * 3 + k];
        row[at++] = log_scale_channels ? std::log(s) : s;
      }
      for (int k = 0; k < 4; ++k) row[at++] = cloud.rotation[i * 4 + k];
    }
  }
  return features;
}

SurfaceDescriptor anisotropy_stats(const GaussianCloud& cloud) {
  cloud.validate();
  const std::size_t n = cloud.size();

  SurfaceDescriptor desc;
  desc.elongation.resize(n);
  desc.flatness.resize(n);

  // 32 log-spaced bin edges over [1, 1e3]; ratios beyond land in the top bin.
  constexpr Real kLogSpan = 3.0;  // log10(1e3)
  auto bin_of = [](Real ratio) {
    const Real t = std::log10(ratio) / kLogSpan * SurfaceDescriptor::kBins;
    const auto b = static_cast<long>(t);
    return static_cast<std::size_t>(std::clamp<long>(b, 0, SurfaceDescriptor::kBins - 1));
  };

  for (std::size_t i = 0; i < n; ++i) {
    Real s[3] = {cloud.scale[i * 3], cloud.scale[i * 3 + 1], cloud.scale[i * 3 + 2]};
    std::sort(s, s + 3, std::greater<Real>());
    desc.elongation[i] = s[0] / s[1];
    desc.flatness[i] = s[1] / s[2];
    ++desc.elongation_hist[bin_of(desc.elongation[i])];
    ++desc.flatness_hist[bin_of(desc.flatness[i])];
  }
  return desc;
}

std::array<Real, 3> quat_rotate(const std::array<Real, 4>& q, const std::array<Real, 3>& v) {
  const Real norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (std::abs(norm - 1.0) > 1e-6) {
    throw Error(ErrorCode::NonUnitQuaternion,
                fmt::format("quaternion norm {} too far from 1", norm));
  }
  // v' = v + 2w(u x v) + 2(u x (u x v)) with q = (w, u)
  const Real w = q[0];
  const std::array<Real, 3> u{q[1], q[2], q[3]};
  const std::array<Real, 3> uv{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                               u[0] * v[1] - u[1] * v[0]};
  const std::array<Real, 3> uuv{u[1] * uv[2] - u[2] * uv[1], u[2] * uv[0] - u[0] * uv[2],
                                u[0] * uv[1] - u[1] * uv[0]};
  return {v[0] + 2 * (w * uv[0] + uuv[0]), v[1] + 2 * (w * uv[1] + uuv[1]),
          v[2] + 2 * (w * uv[2] + uuv[2])};
}

std::array<Real, 9> quat_to_matrix(const std::array<Real, 4>& q) {
  const Real w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

std::array<Real, 4> matrix_to_quat(const std::array<Real, 9>& m) {
  // Shepperd's method: branch on the largest diagonal-derived magnitude.
  const Real trace = m[0] + m[4] + m[8];
  std::array<Real, 4> q;
  if (trace > 0) {
    const Real s = std::sqrt(trace + 1.0) * 2;
    q = {s / 4, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s};
  } else if (m[0] > m[4] && m[0] > m[8]) {
    const Real s = std::sqrt(1.0 + m[0] - m[4] - m[8]) * 2;
    q = {(m[7] - m[5]) / s, s / 4, (m[1] + m[3]) / s, (m[2] + m[6]) / s};
  } else if (m[4] > m[8]) {
    const Real s = std::sqrt(1.0 + m[4] - m[0] - m[8]) * 2;
    q = {(m[2] - m[6]) / s, (m[1] + m[3]) / s, s / 4, (m[5] + m[7]) / s};
  } else {
    const Real s = std::sqrt(1.0 + m[8] - m[0] - m[4]) * 2;
    q = {(m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, s / 4};
  }
  return canonical_unit_quaternion(q);
}

std::array<Real, 4> quat_multiply(const std::array<Real, 4>& q2, const std::array<Real, 4>& q1) {
  return {q2[0] * q1[0] - q2[1] * q1[1] - q2[2] * q1[2] - q2[3] * q1[3],
          q2[0] * q1[1] + q2[1] * q1[0] + q2[2] * q1[3] - q2[3] * q1[2],
          q2[0] * q1[2] - q2[1] * q1[3] + q2[2] * q1[0] + q2[3] * q1[1],
          q2[0] * q1[3] + q2[1] * q1[2] - q2[2] * q1[1] + q2[3] * q1[0]};
}

}  // namespace gscls
