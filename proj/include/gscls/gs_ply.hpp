#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gscls/error.hpp"
#include "gscls/real.hpp"

namespace gscls {

/// Gaussian-splat checkpoint contents in storage space: opacity as a logit,
/// scale as natural log, rotation as an unnormalized scalar-first quaternion.
/// All per-point arrays are flat row-major buffers sharing the same N.
struct RawGaussianCloud {
  std::vector<Real> positions;      // N x 3
  std::vector<Real> normals;        // N x 3, carried but never interpreted
  std::vector<Real> color_dc;       // N x 3
  std::vector<Real> color_rest;     // N x 3m, opaque SH payload
  std::vector<Real> opacity_logit;  // N
  std::vector<Real> log_scale;      // N x 3
  std::vector<Real> raw_rotation;   // N x 4, scalar first

  std::size_t size() const { return opacity_logit.size(); }
  std::size_t rest_width() const {
    return size() == 0 ? 0 : color_rest.size() / size();
  }
  int sh_degree() const;

  /// Throws on invariant violation: N >= 1, consistent lengths, rest width a
  /// multiple of 3, all values finite.
  void validate() const;
};

/// Geometric-space Gaussian cloud: opacity in [0,1], positive scales, unit
/// quaternions with canonical sign. Color stays an opaque per-point payload.
struct GaussianCloud {
  std::vector<Real> positions;      // N x 3
  std::vector<Real> opacity;        // N
  std::vector<Real> scale;          // N x 3
  std::vector<Real> rotation;       // N x 4, scalar first, canonical sign
  std::vector<Real> color_payload;  // N x payload_width
  std::size_t payload_width = 0;

  std::size_t size() const { return opacity.size(); }
  void validate() const;
};

/// Parses the binary little-endian GS PLY layout. Properties may appear in
/// any order in the header; the body is decoded in declared order. Unknown
/// properties are rejected. Errors carry byte offsets where meaningful.
RawGaussianCloud parse_ply(std::span<const std::uint8_t> bytes);

/// Serializes with the canonical property order
/// (x,y,z,nx,ny,nz,f_dc_*,f_rest_*,opacity,scale_*,rot_*), float32 body.
/// parse_ply(write_ply(c)) reproduces c exactly.
std::vector<std::uint8_t> write_ply(const RawGaussianCloud& cloud);

RawGaussianCloud read_ply_file(const std::string& path);
void write_ply_file(const RawGaussianCloud& cloud, const std::string& path);

/// Storage space -> geometric space: sigmoid(opacity), exp(scale), normalized
/// canonical-sign quaternions. Positions and color payload are copied through.
GaussianCloud activate(const RawGaussianCloud& raw);

/// Inverse of activate for persisting in-memory clouds; optional normals are
/// stored verbatim (zeros otherwise).
RawGaussianCloud deactivate(const GaussianCloud& cloud,
                            std::span<const Real> normals = {});

/// Position matrix only (N x 3), order preserved.
std::vector<Real> strip_to_points(const GaussianCloud& cloud);

/// Normalizes q and applies the canonical sign convention: the first
/// component with magnitude > 1e-12 is made positive. Throws
/// DegenerateQuaternion when |q| < 1e-12.
std::array<Real, 4> canonical_unit_quaternion(const std::array<Real, 4>& q);

}  // namespace gscls
