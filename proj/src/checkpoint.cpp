#include "gscls/checkpoint.hpp"

#include <cstring>
#include <fmt/format.h>
#include <fstream>

#include <json.hpp>

#include "gscls/error.hpp"

namespace gscls {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'C', 'L', 'S', 'C', 'K', '1'};

using OrderedJson = nlohmann::ordered_json;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  OrderedJson header;
  header["metadata"] = OrderedJson::object();
  for (const auto& [key, value] : ckpt.metadata) header["metadata"][key] = value;
  header["tensors"] = OrderedJson::array();
  for (const auto& [name, entry] : ckpt.tensors) {
    if (entry.data.size() !=
        [&] {
          std::size_t p = 1;
          for (std::size_t d : entry.shape) p *= d;
          return p;
        }()) {
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("tensor \"{}\" data does not match its shape", name));
    }
    header["tensors"].push_back({{"name", name}, {"shape", entry.shape}});
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, fmt::format("cannot open {} for writing", path));
  }
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, entry] : ckpt.tensors) {
    out.write(reinterpret_cast<const char*>(entry.data.data()),
              static_cast<std::streamsize>(entry.data.size() * sizeof(double)));
  }
  if (!out) {
    throw Error(ErrorCode::IoError, fmt::format("short write to {}", path));
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::UnreadableFile, path);
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: bad magic", path));
  }
  std::uint64_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len))) {
    throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: truncated header length", path));
  }
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: truncated header", path));
  }

  OrderedJson header;
  try {
    header = OrderedJson::parse(header_text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: header is not JSON ({})", path, e.what()));
  }

  Checkpoint ckpt;
  try {
    for (const auto& [key, value] : header.at("metadata").items()) {
      ckpt.metadata[key] = value.get<std::string>();
    }
    for (const auto& item : header.at("tensors")) {
      const std::string name = item.at("name").get<std::string>();
      Checkpoint::Entry entry;
      entry.shape = item.at("shape").get<std::vector<std::size_t>>();
      std::size_t count = 1;
      for (std::size_t d : entry.shape) count *= d;
      entry.data.resize(count);
      if (!in.read(reinterpret_cast<char*>(entry.data.data()),
                   static_cast<std::streamsize>(count * sizeof(double)))) {
        throw Error(ErrorCode::BadCheckpoint,
                    fmt::format("{}: truncated payload for tensor \"{}\"", path, name));
      }
      ckpt.tensors.emplace(name, std::move(entry));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: malformed header ({})", path, e.what()));
  }
  return ckpt;
}

}  // namespace gscls
