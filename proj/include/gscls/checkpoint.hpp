#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace gscls {

// Named-tensor container behind the on-disk checkpoint format:
//   magic "GSCLSCK1" | u64 header length | header JSON | f64 payloads.
// The header JSON holds the metadata map and a tensor directory (name, shape)
// in name order; payloads follow in the same order, little-endian float64.
struct Checkpoint {
  struct Entry {
    std::vector<std::size_t> shape;
    std::vector<double> data;
  };
  std::map<std::string, std::string> metadata;
  std::map<std::string, Entry> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gscls
