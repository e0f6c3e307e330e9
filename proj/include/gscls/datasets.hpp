#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gscls/gs_ply.hpp"
#include "gscls/real.hpp"

namespace gscls {

struct ManifestItem {
  std::string id;    // "<class_name>/<stem>"
  std::string path;  // on-disk PLY path ("" for in-memory items)
  std::size_t class_index = 0;
  std::string split;  // "train" or "test" ("" before splitting)
};

struct DatasetManifest {
  std::vector<std::string> classes;  // sorted, k entries
  std::vector<ManifestItem> items;
};

// Enumerates `root/<class_name>/<stem>.ply` deterministically (classes and
// stems sorted lexicographically).
DatasetManifest load_dataset(const std::string& root);

// Per-class stratified split by seeded hash of the object name (the id minus
// its class prefix); assignment is independent of item enumeration order, and
// classes that reuse object names put paired objects on the same side.
// n_test = round(fraction * n_class).
DatasetManifest split(const DatasetManifest& manifest, Real test_fraction, std::uint64_t seed);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

// --- synthetic ambiguity benchmark ---
// 6 classes = {cylinder, sphere} shells x {flat_opaque, flat_transparent,
// wire_opaque}. Within a family all variants draw anchor positions (and
// jitter) from the same variant-independent stream, so position-only inputs
// cannot separate variants; flat_opaque and flat_transparent additionally
// share scale/rotation draw-for-draw and differ only in opacity.
struct SynthSpec {
  std::size_t anchors_per_object = 512;
  Real jitter_sigma = 0.01;
  std::size_t objects_per_class = 100;
  std::uint64_t seed = 0;
};

struct LabeledCloud {
  GaussianCloud cloud;
  std::size_t label = 0;
  std::string id;
};

struct SynthDataset {
  std::vector<std::string> classes;  // sorted, 6 entries
  std::vector<LabeledCloud> items;
};

const std::vector<std::string>& synth_class_names();

SynthDataset synth_generate(const SynthSpec& spec);

// Writes `out_root/<class_name>/<stem>.ply` for every item plus
// `out_root/manifest.json`; returns the manifest.
DatasetManifest synth_persist(const SynthDataset& dataset, const std::string& out_root);

}  // namespace gscls
