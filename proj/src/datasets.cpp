#include "gscls/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "gscls/error.hpp"
#include "gscls/geometry.hpp"
#include "gscls/rng.hpp"

namespace fs = std::filesystem;

namespace gscls {

DatasetManifest load_dataset(const std::string& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::UnreadableFile, fmt::format("{} is not a directory", root));
  }

  DatasetManifest manifest;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  for (std::size_t ci = 0; ci < class_dirs.size(); ++ci) {
    const std::string class_name = class_dirs[ci].filename().string();
    manifest.classes.push_back(class_name);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[ci])) {
      if (entry.is_regular_file() && entry.path().extension() == ".ply") {
        files.push_back(entry.path());
      }
    }
    if (files.empty()) {
      throw Error(ErrorCode::EmptyClass, fmt::format("class \"{}\" has no .ply files", class_name));
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
      ManifestItem item;
      item.id = class_name + "/" + file.stem().string();
      item.path = file.string();
      item.class_index = ci;
      manifest.items.push_back(std::move(item));
    }
  }
  if (manifest.classes.empty()) {
    throw Error(ErrorCode::EmptyDataset, fmt::format("{} contains no class directories", root));
  }
  return manifest;
}

DatasetManifest split(const DatasetManifest& manifest, Real test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("test fraction {} outside (0, 1)", test_fraction));
  }

  DatasetManifest out = manifest;
  const std::uint64_t salt = derive_seed(seed, "split");

  std::vector<std::vector<std::size_t>> per_class(manifest.classes.size());
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    per_class.at(manifest.items[i].class_index).push_back(i);
  }

  for (std::size_t ci = 0; ci < per_class.size(); ++ci) {
    auto& members = per_class[ci];
    const std::size_t n = members.size();
    if (n < 2) {
      throw Error(ErrorCode::ClassTooSmall,
                  fmt::format("class \"{}\" has {} items; need at least 2 to split",
                              manifest.classes[ci], n));
    }
    const auto n_test =
        static_cast<std::size_t>(std::lround(test_fraction * static_cast<Real>(n)));
    if (n_test == 0 || n_test == n) {
      throw Error(ErrorCode::ClassTooSmall,
                  fmt::format("fraction {} leaves one side of class \"{}\" empty", test_fraction,
                              manifest.classes[ci]));
    }
    // Rank by seeded hash of the object name (the id with the class prefix
    // stripped): independent of enumeration order, and aligned across classes
    // that reuse object names, so paired objects land on the same side.
    auto object_name = [](const std::string& id) {
      const std::size_t slash = id.rfind('/');
      return std::string_view(id).substr(slash == std::string::npos ? 0 : slash + 1);
    };
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const std::uint64_t ka =
          detail::mix64(salt ^ detail::fnv1a64(object_name(manifest.items[a].id)));
      const std::uint64_t kb =
          detail::mix64(salt ^ detail::fnv1a64(object_name(manifest.items[b].id)));
      if (ka != kb) return ka < kb;
      return manifest.items[a].id < manifest.items[b].id;
    });
    for (std::size_t rank = 0; rank < n; ++rank) {
      out.items[members[rank]].split = rank < n_test ? "test" : "train";
    }
  }
  return out;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["classes"] = manifest.classes;
  doc["items"] = nlohmann::ordered_json::array();
  for (const ManifestItem& item : manifest.items) {
    doc["items"].push_back({{"id", item.id},
                            {"path", item.path},
                            {"class_index", item.class_index},
                            {"split", item.split}});
  }
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest manifest;
  try {
    const auto doc = nlohmann::json::parse(text);
    manifest.classes = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& item : doc.at("items")) {
      ManifestItem out;
      out.id = item.at("id").get<std::string>();
      out.path = item.at("path").get<std::string>();
      out.class_index = item.at("class_index").get<std::size_t>();
      out.split = item.at("split").get<std::string>();
      if (out.class_index >= manifest.classes.size()) {
        throw Error(ErrorCode::InvalidLabel,
                    fmt::format("item \"{}\" references class {}", out.id, out.class_index));
      }
      manifest.items.push_back(std::move(out));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, fmt::format("malformed manifest JSON: {}", e.what()));
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

namespace {

enum class Family { cylinder = 0, sphere = 1 };
enum class Variant { flat_opaque, flat_transparent, wire_opaque };

struct ClassDef {
  Family family;
  Variant variant;
  const char* name;
};

// Sorted lexicographically; class index equals position here.
constexpr ClassDef kClasses[] = {
    {Family::cylinder, Variant::flat_opaque, "cylinder_flat_opaque"},
    {Family::cylinder, Variant::flat_transparent, "cylinder_flat_transparent"},
    {Family::cylinder, Variant::wire_opaque, "cylinder_wire_opaque"},
    {Family::sphere, Variant::flat_opaque, "sphere_flat_opaque"},
    {Family::sphere, Variant::flat_transparent, "sphere_flat_transparent"},
    {Family::sphere, Variant::wire_opaque, "sphere_wire_opaque"},
};

struct Vec3 {
  Real x, y, z;
};

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

Vec3 normalized(const Vec3& v) {
  const Real n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
  return {v.x / n, v.y / n, v.z / n};
}

// Deterministic orthonormal tangent basis (a, b) of the unit normal n.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
  const Real ax = std::abs(n.x), ay = std::abs(n.y), az = std::abs(n.z);
  Vec3 e{1, 0, 0};
  if (ay <= ax && ay <= az) {
    e = {0, 1, 0};
  } else if (az < ax && az < ay) {
    e = {0, 0, 1};
  }
  const Vec3 a = normalized(cross(n, e));
  const Vec3 b = cross(n, a);
  return {a, b};
}

// One anchor on the family surface plus its outward unit normal. All variants
// of a family consume the stream identically, keeping positions exchangeable.
std::pair<Vec3, Vec3> sample_surface(Family family, Rng& rng) {
  if (family == Family::sphere) {
    Vec3 d{0, 0, 0};
    Real norm = 0;
    do {
      d = {rng.normal(), rng.normal(), rng.normal()};
      norm = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    } while (norm < 1e-9);
    const Vec3 n{d.x / norm, d.y / norm, d.z / norm};
    return {n, n};  // unit-radius shell
  }
  // Lateral cylinder shell, radius 0.5, height 2.
  const Real z = rng.uniform(-1, 1);
  const Real theta = rng.uniform(0, 2 * std::numbers::pi_v<Real>);
  const Vec3 n{std::cos(theta), std::sin(theta), 0};
  return {{Real(0.5) * n.x, Real(0.5) * n.y, z}, n};
}

GaussianCloud make_object(const ClassDef& def, std::size_t object_index, const SynthSpec& spec) {
  const auto family = static_cast<std::uint64_t>(def.family);
  // Variant-independent streams: positions/jitter, frame angles, and the
  // underlying opacity uniforms are shared by every variant of (family, j).
  Rng pos_rng(derive_seed(spec.seed, "positions", family, object_index));
  Rng frame_rng(derive_seed(spec.seed, "frame", family, object_index));
  Rng opacity_rng(derive_seed(spec.seed, "opacity", family, object_index));

  const std::size_t n = spec.anchors_per_object;
  GaussianCloud cloud;
  cloud.positions.resize(n * 3);
  cloud.opacity.resize(n);
  cloud.scale.resize(n * 3);
  cloud.rotation.resize(n * 4);
  cloud.payload_width = 3;
  cloud.color_payload.assign(n * 3, Real(0.5));

  const bool wire = def.variant == Variant::wire_opaque;
  const bool transparent = def.variant == Variant::flat_transparent;

  for (std::size_t i = 0; i < n; ++i) {
    auto [p, normal] = sample_surface(def.family, pos_rng);
    p.x += spec.jitter_sigma * pos_rng.normal();
    p.y += spec.jitter_sigma * pos_rng.normal();
    p.z += spec.jitter_sigma * pos_rng.normal();
    cloud.positions[i * 3] = p.x;
    cloud.positions[i * 3 + 1] = p.y;
    cloud.positions[i * 3 + 2] = p.z;

    const Real phi = frame_rng.uniform(0, 2 * std::numbers::pi_v<Real>);
    const auto [a, b] = tangent_basis(normal);
    const Vec3 t1{std::cos(phi) * a.x + std::sin(phi) * b.x,
                  std::cos(phi) * a.y + std::sin(phi) * b.y,
                  std::cos(phi) * a.z + std::sin(phi) * b.z};
    const Vec3 t2 = cross(normal, t1);

    // Columns of the rotation matrix are the ellipsoid axes in world space:
    // flat discs span the tangent plane (thin axis along the normal); wires
    // stretch along the first tangent direction.
    const std::array<Real, 9> rot{t1.x, t2.x, normal.x, t1.y, t2.y,
                                  normal.y, t1.z, t2.z, normal.z};
    if (wire) {
      cloud.scale[i * 3] = Real(0.12);
      cloud.scale[i * 3 + 1] = Real(0.008);
      cloud.scale[i * 3 + 2] = Real(0.008);
    } else {
      cloud.scale[i * 3] = Real(0.15);
      cloud.scale[i * 3 + 1] = Real(0.15);
      cloud.scale[i * 3 + 2] = Real(0.01);
    }
    const std::array<Real, 4> q = matrix_to_quat(rot);
    for (int c = 0; c < 4; ++c) cloud.rotation[i * 4 + c] = q[c];

    const Real u = opacity_rng.next_double();
    cloud.opacity[i] = transparent ? Real(0.05) + Real(0.20) * u : Real(0.9) + Real(0.1) * u;
  }
  return cloud;
}

}  // namespace

const std::vector<std::string>& synth_class_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const ClassDef& def : kClasses) out.emplace_back(def.name);
    return out;
  }();
  return names;
}

SynthDataset synth_generate(const SynthSpec& spec) {
  if (spec.anchors_per_object == 0 || spec.objects_per_class == 0) {
    throw Error(ErrorCode::InvalidArgument, "anchors and objects per class must be positive");
  }
  SynthDataset dataset;
  dataset.classes = synth_class_names();
  dataset.items.reserve(6 * spec.objects_per_class);
  for (std::size_t ci = 0; ci < 6; ++ci) {
    for (std::size_t j = 0; j < spec.objects_per_class; ++j) {
      LabeledCloud item;
      item.cloud = make_object(kClasses[ci], j, spec);
      item.label = ci;
      item.id = fmt::format("{}/obj_{:04}", kClasses[ci].name, j);
      dataset.items.push_back(std::move(item));
    }
  }
  return dataset;
}

DatasetManifest synth_persist(const SynthDataset& dataset, const std::string& out_root) {
  DatasetManifest manifest;
  manifest.classes = dataset.classes;
  fs::create_directories(out_root);
  for (const std::string& name : dataset.classes) {
    fs::create_directories(fs::path(out_root) / name);
  }
  for (const LabeledCloud& item : dataset.items) {
    const fs::path path = fs::path(out_root) / (item.id + ".ply");
    write_ply_file(deactivate(item.cloud), path.string());
    ManifestItem entry;
    entry.id = item.id;
    entry.path = path.string();
    entry.class_index = item.label;
    manifest.items.push_back(std::move(entry));
  }
  std::ofstream out(fs::path(out_root) / "manifest.json");
  if (!out) {
    throw Error(ErrorCode::IoError, fmt::format("cannot write manifest under {}", out_root));
  }
  out << manifest_to_json(manifest);
  return manifest;
}

}  // namespace gscls
