#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "gscls/error.hpp"
#include "gscls/geometry.hpp"
#include "gscls/gs_ply.hpp"
#include "gscls/rng.hpp"
#include "oracles.hpp"

using namespace gscls;

namespace {

Real median_of(std::vector<Real> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
}

}  // namespace

TEST_CASE("feature modes parse, print, and report channel counts") {
  CHECK(parse_feature_mode("p") == FeatureMode::p);
  CHECK(parse_feature_mode("po") == FeatureMode::po);
  CHECK(parse_feature_mode("psq") == FeatureMode::psq);
  CHECK(parse_feature_mode("posq") == FeatureMode::posq);
  CHECK_THROWS_AS(parse_feature_mode("pq"), Error);

  CHECK(channel_count(FeatureMode::p) == 3);
  CHECK(channel_count(FeatureMode::po) == 4);
  CHECK(channel_count(FeatureMode::psq) == 10);
  CHECK(channel_count(FeatureMode::posq) == 11);
  CHECK(std::string(feature_mode_name(FeatureMode::posq)) == "posq");
}

TEST_CASE("normalize centers at the centroid and scales the max radius to 1") {
  GaussianCloud cloud;
  cloud.positions = {1, 0, 0, 3, 0, 0};  // centroid (2,0,0), max distance 1
  cloud.opacity = {0.5, 0.5};
  cloud.scale = {2, 2, 2, 4, 4, 4};
  cloud.rotation = {1, 0, 0, 0, 1, 0, 0, 0};

  const auto [out, record] = normalize_cloud(cloud);
  CHECK(record.centroid[0] == doctest::Approx(2.0));
  CHECK(record.radius == doctest::Approx(1.0));
  CHECK(out.positions[0] == doctest::Approx(-1.0));
  CHECK(out.positions[3] == doctest::Approx(1.0));
  CHECK(out.positions[1] == 0.0);
  // Scales divide by the same radius (1 here), so they are unchanged.
  CHECK(out.scale[0] == doctest::Approx(2.0));

  GaussianCloud wide = cloud;
  wide.positions = {0, 0, 0, 4, 0, 0};  // centroid (2,0,0), max distance 2
  const auto [wout, wrecord] = normalize_cloud(wide);
  CHECK(wrecord.radius == doctest::Approx(2.0));
  CHECK(wout.positions[0] == doctest::Approx(-1.0));
  CHECK(wout.positions[3] == doctest::Approx(1.0));
  CHECK(wout.scale[0] == doctest::Approx(1.0));
  CHECK(wout.scale[3] == doctest::Approx(2.0));
}

TEST_CASE("normalize is invariant to uniform scaling and idempotent") {
  Rng rng(7);
  for (int round = 0; round < 20; ++round) {
    const GaussianCloud cloud = oracles::random_cloud(rng, 12);
    const auto [base, base_record] = normalize_cloud(cloud);

    const Real lambda = rng.uniform(0.1, 10.0);
    GaussianCloud scaled = cloud;
    for (Real& v : scaled.positions) v *= lambda;
    for (Real& v : scaled.scale) v *= lambda;
    const auto [rescaled, rescaled_record] = normalize_cloud(scaled);
    CHECK(rescaled_record.radius == doctest::Approx(base_record.radius * lambda).epsilon(1e-9));

    for (std::size_t i = 0; i < base.positions.size(); ++i) {
      CHECK(rescaled.positions[i] == doctest::Approx(base.positions[i]).epsilon(1e-9));
    }
    for (std::size_t i = 0; i < base.scale.size(); ++i) {
      CHECK(rescaled.scale[i] == doctest::Approx(base.scale[i]).epsilon(1e-9));
    }

    const auto [twice, twice_record] = normalize_cloud(base);
    CHECK(twice_record.radius == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t i = 0; i < base.positions.size(); ++i) {
      CHECK(twice.positions[i] == doctest::Approx(base.positions[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("normalize rejects coincident point sets") {
  GaussianCloud cloud;
  cloud.positions = {5, 5, 5, 5, 5, 5};
  cloud.opacity = {0.5, 0.5};
  cloud.scale = {1, 1, 1, 1, 1, 1};
  cloud.rotation = {1, 0, 0, 0, 1, 0, 0, 0};
  try {
    normalize_cloud(cloud);
    FAIL("expected ZeroRadius");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroRadius);
  }
}

TEST_CASE("assemble_features lays channels out as [xyz | o | s | q]") {
  GaussianCloud cloud;
  cloud.positions = {0.1, 0.2, 0.3};
  cloud.opacity = {0.7};
  cloud.scale = {0.01, 0.02, 0.03};
  cloud.rotation = {1, 0, 0, 0};

  const FeatureMatrix p = assemble_features(cloud, FeatureMode::p);
  CHECK(p.rows == 1);
  CHECK(p.cols() == 3);
  CHECK(p.data == std::vector<Real>{0.1, 0.2, 0.3});

  const FeatureMatrix po = assemble_features(cloud, FeatureMode::po);
  CHECK(po.data == std::vector<Real>{0.1, 0.2, 0.3, 0.7});

  const FeatureMatrix psq = assemble_features(cloud, FeatureMode::psq);
  CHECK(psq.data == std::vector<Real>{0.1, 0.2, 0.3, 0.01, 0.02, 0.03, 1, 0, 0, 0});

  const FeatureMatrix posq = assemble_features(cloud, FeatureMode::posq);
  CHECK(posq.data == std::vector<Real>{0.1, 0.2, 0.3, 0.7, 0.01, 0.02, 0.03, 1, 0, 0, 0});

  // Each richer mode starts with the plain position block.
  for (int c = 0; c < 3; ++c) {
    CHECK(posq.data[c] == p.data[c]);
    CHECK(psq.data[c] == p.data[c]);
    CHECK(po.data[c] == p.data[c]);
  }
}

TEST_CASE("mode p ignores every non-position attribute") {
  Rng rng(11);
  GaussianCloud cloud = oracles::random_cloud(rng, 6);
  const FeatureMatrix before = assemble_features(cloud, FeatureMode::p);
  for (Real& v : cloud.opacity) v = rng.next_double();
  for (Real& v : cloud.scale) v = rng.uniform(0.5, 2.0);
  const FeatureMatrix after = assemble_features(cloud, FeatureMode::p);
  CHECK(before.data == after.data);
}

TEST_CASE("optional log-scale channels apply log to scales only") {
  GaussianCloud cloud;
  cloud.positions = {0.1, 0.2, 0.3};
  cloud.opacity = {0.7};
  cloud.scale = {1.0, std::exp(1.0), std::exp(-2.0)};
  cloud.rotation = {1, 0, 0, 0};
  const FeatureMatrix f = assemble_features(cloud, FeatureMode::psq, true);
  CHECK(f.data[3] == doctest::Approx(0.0));
  CHECK(f.data[4] == doctest::Approx(1.0));
  CHECK(f.data[5] == doctest::Approx(-2.0));
  CHECK(f.data[0] == doctest::Approx(0.1));
}

TEST_CASE("anisotropy statistics recover elongation and flatness") {
  GaussianCloud wire;
  wire.positions = {0, 0, 0};
  wire.opacity = {0.5};
  wire.scale = {15, 1, 1};
  wire.rotation = {1, 0, 0, 0};
  const SurfaceDescriptor ws = anisotropy_stats(wire);
  REQUIRE(ws.elongation.size() == 1);
  CHECK(ws.elongation[0] == doctest::Approx(15.0));
  CHECK(ws.flatness[0] == doctest::Approx(1.0));

  GaussianCloud flat;
  flat.positions = {0, 0, 0};
  flat.opacity = {0.5};
  flat.scale = {1, 15, 15};  // order-free: sorted descending before ratios
  flat.rotation = {1, 0, 0, 0};
  const SurfaceDescriptor fs = anisotropy_stats(flat);
  CHECK(fs.elongation[0] == doctest::Approx(1.0));
  CHECK(fs.flatness[0] == doctest::Approx(15.0));
  CHECK(median_of(fs.flatness) == doctest::Approx(15.0));
}

TEST_CASE("anisotropy histograms have 32 bins summing to the point count") {
  Rng rng(13);
  const GaussianCloud cloud = oracles::random_cloud(rng, 100);
  const SurfaceDescriptor stats = anisotropy_stats(cloud);
  REQUIRE(stats.elongation_hist.size() == 32);
  REQUIRE(stats.flatness_hist.size() == 32);
  std::size_t esum = 0, fsum = 0;
  for (std::size_t c : stats.elongation_hist) esum += c;
  for (std::size_t c : stats.flatness_hist) fsum += c;
  CHECK(esum == 100);
  CHECK(fsum == 100);
  CHECK(stats.elongation.size() == 100);
}

TEST_CASE("quat_rotate: identity and axis flips") {
  const std::array<Real, 4> identity{1, 0, 0, 0};
  const std::array<Real, 3> v{0.3, -0.4, 0.5};
  const auto same = quat_rotate(identity, v);
  for (int i = 0; i < 3; ++i) CHECK(same[i] == doctest::Approx(v[i]));

  // 180 degrees about z: (x,y,z) -> (-x,-y,z).
  const std::array<Real, 4> half_turn_z{0, 0, 0, 1};
  const auto flipped = quat_rotate(half_turn_z, v);
  CHECK(flipped[0] == doctest::Approx(-v[0]));
  CHECK(flipped[1] == doctest::Approx(-v[1]));
  CHECK(flipped[2] == doctest::Approx(v[2]));

  // 90 degrees about z: (1,0,0) -> (0,1,0).
  const Real s = std::sin(std::numbers::pi / 4), c = std::cos(std::numbers::pi / 4);
  const auto turned = quat_rotate({c, 0, 0, s}, {1, 0, 0});
  CHECK(turned[0] == doctest::Approx(0.0));
  CHECK(turned[1] == doctest::Approx(1.0));
  CHECK(turned[2] == doctest::Approx(0.0));
}

TEST_CASE("quat_rotate agrees with the rotation-matrix oracle") {
  Rng rng(17);
  for (int round = 0; round < 100; ++round) {
    const auto q = oracles::random_unit_quaternion(rng);
    const std::array<Real, 3> v{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const auto direct = quat_rotate(q, v);
    const auto m = quat_to_matrix(q);
    for (int r = 0; r < 3; ++r) {
      const Real via_matrix = m[3 * r] * v[0] + m[3 * r + 1] * v[1] + m[3 * r + 2] * v[2];
      CHECK(std::abs(direct[r] - via_matrix) < 1e-9);
    }
    // Rotations preserve length.
    const Real n_in = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    const Real n_out =
        std::sqrt(direct[0] * direct[0] + direct[1] * direct[1] + direct[2] * direct[2]);
    CHECK(std::abs(n_in - n_out) < 1e-9);
  }
}

TEST_CASE("quaternion composition matches sequential rotation") {
  Rng rng(19);
  for (int round = 0; round < 50; ++round) {
    const auto q1 = oracles::random_unit_quaternion(rng);
    const auto q2 = oracles::random_unit_quaternion(rng);
    const std::array<Real, 3> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto sequential = quat_rotate(q2, quat_rotate(q1, v));
    auto product = quat_multiply(q2, q1);
    // quat_multiply returns the raw Hamilton product; normalize the sign for
    // quat_rotate, which accepts any unit quaternion.
    const auto composed = quat_rotate(product, v);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(sequential[i] - composed[i]) < 1e-9);
  }
}

TEST_CASE("matrix_to_quat inverts quat_to_matrix up to sign canonicalization") {
  Rng rng(23);
  for (int round = 0; round < 200; ++round) {
    const auto q = oracles::random_unit_quaternion(rng);
    const auto back = matrix_to_quat(quat_to_matrix(q));
    for (int i = 0; i < 4; ++i) CHECK(std::abs(back[i] - q[i]) < 1e-9);
  }
}

TEST_CASE("quat_rotate rejects non-unit quaternions") {
  try {
    quat_rotate({2, 0, 0, 0}, {1, 0, 0});
    FAIL("expected NonUnitQuaternion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonUnitQuaternion);
  }
}
