#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gscls/gs_ply.hpp"
#include "gscls/real.hpp"

namespace gscls {

// Input-channel modes. Channel order is fixed:
//   [x, y, z | o | s_x, s_y, s_z, q1, q2, q3, q4]
// with absent blocks omitted.
enum class FeatureMode { p, po, psq, posq };

FeatureMode parse_feature_mode(const std::string& name);
const char* feature_mode_name(FeatureMode mode);
std::size_t channel_count(FeatureMode mode);  // 3, 4, 10, 11

struct NormalizationRecord {
  std::array<Real, 3> centroid{0, 0, 0};
  Real radius = 1;  // max centered distance, > 0
};

struct FeatureMatrix {
  std::vector<Real> data;  // rows x cols, row-major
  std::size_t rows = 0;
  FeatureMode mode = FeatureMode::p;

  std::size_t cols() const { return channel_count(mode); }
};

// Per-point ellipsoid shape ratios with 32-bin log-spaced histograms
// covering [1, 1e3]; out-of-range ratios land in the last bin.
struct SurfaceDescriptor {
  static constexpr std::size_t kBins = 32;
  std::vector<Real> elongation;  // s_max / s_mid, >= 1
  std::vector<Real> flatness;    // s_mid / s_min, >= 1
  std::array<std::size_t, kBins> elongation_hist{};
  std::array<std::size_t, kBins> flatness_hist{};
};

// Centers positions at the centroid and divides positions and scales by the
// max centered distance. Opacity and rotation are unchanged.
std::pair<GaussianCloud, NormalizationRecord> normalize_cloud(const GaussianCloud& cloud);

// Assembles the N x C input matrix for the given mode. `log_scale_channels`
// feeds ln(scale) instead of linear scale (experimental, off by default).
FeatureMatrix assemble_features(const GaussianCloud& cloud, FeatureMode mode,
                                bool log_scale_channels = false);

SurfaceDescriptor anisotropy_stats(const GaussianCloud& cloud);

// Rotates v by the unit quaternion q (scalar-first). Throws NonUnitQuaternion
// when |norm(q) - 1| > 1e-6.
std::array<Real, 3> quat_rotate(const std::array<Real, 4>& q, const std::array<Real, 3>& v);

// Row-major 3x3 rotation matrix of a unit quaternion.
std::array<Real, 9> quat_to_matrix(const std::array<Real, 4>& q);

// Unit quaternion (canonical sign) of a row-major rotation matrix.
std::array<Real, 4> matrix_to_quat(const std::array<Real, 9>& m);

// Hamilton product q2 * q1 (apply q1 first).
std::array<Real, 4> quat_multiply(const std::array<Real, 4>& q2, const std::array<Real, 4>& q1);

}  // namespace gscls
