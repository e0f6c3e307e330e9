#include "gscls/gs_ply.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "gs_ply assumes a little-endian host");

namespace gscls {

namespace {

constexpr Real kQuatEps = 1e-12;

void require_finite(std::span<const Real> values, const char* field) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFiniteValue,
                  fmt::format("non-finite value in {} at flat index {}", field, i));
    }
  }
}

void require_length(std::size_t actual, std::size_t expected, const char* field) {
  if (actual != expected) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} has {} values, expected {}", field, actual, expected));
  }
}

// Fixed field layout of one parsed record slot.
enum class FieldKind { Position, Normal, ColorDc, ColorRest, Opacity, Scale, Rotation };

struct PropertySlot {
  FieldKind kind;
  std::size_t component;  // index within the destination field
};

}  // namespace

int RawGaussianCloud::sh_degree() const {
  // rest_width = 3 * ((d+1)^2 - 1) for integer degrees; -1 when not of that form.
  const std::size_t m = rest_width() / 3;
  for (int d = 0; d <= 8; ++d) {
    const std::size_t coeffs = static_cast<std::size_t>((d + 1) * (d + 1) - 1);
    if (coeffs == m) return d;
  }
  return -1;
}

void RawGaussianCloud::validate() const {
  const std::size_t n = size();
  if (n == 0) {
    throw Error(ErrorCode::EmptyInput, "cloud must contain at least one point");
  }
  require_length(positions.size(), n * 3, "positions");
  require_length(normals.size(), n * 3, "normals");
  require_length(color_dc.size(), n * 3, "color_dc");
  require_length(log_scale.size(), n * 3, "log_scale");
  require_length(raw_rotation.size(), n * 4, "raw_rotation");
  if (color_rest.size() % (3 * n) != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("color_rest length {} is not N x 3m for N={}", color_rest.size(), n));
  }
  require_finite(positions, "positions");
  require_finite(normals, "normals");
  require_finite(color_dc, "color_dc");
  require_finite(color_rest, "color_rest");
  require_finite(opacity_logit, "opacity_logit");
  require_finite(log_scale, "log_scale");
  require_finite(raw_rotation, "raw_rotation");
}

void GaussianCloud::validate() const {
  const std::size_t n = size();
  if (n == 0) {
    throw Error(ErrorCode::EmptyInput, "cloud must contain at least one point");
  }
  require_length(positions.size(), n * 3, "positions");
  require_length(scale.size(), n * 3, "scale");
  require_length(rotation.size(), n * 4, "rotation");
  require_length(color_payload.size(), n * payload_width, "color_payload");
  require_finite(positions, "positions");
  require_finite(color_payload, "color_payload");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(opacity[i] >= 0.0 && opacity[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("opacity[{}] = {} outside [0,1]", i, opacity[i]));
    }
    for (int c = 0; c < 3; ++c) {
      if (!(scale[i * 3 + c] > 0.0) || !std::isfinite(scale[i * 3 + c])) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("scale[{}][{}] = {} not positive", i, c, scale[i * 3 + c]));
      }
    }
    Real norm2 = 0.0;
    for (int c = 0; c < 4; ++c) norm2 += rotation[i * 4 + c] * rotation[i * 4 + c];
    if (std::abs(std::sqrt(norm2) - 1.0) >= 1e-9) {
      throw Error(ErrorCode::NonUnitQuaternion,
                  fmt::format("rotation[{}] has norm {}", i, std::sqrt(norm2)));
    }
  }
}

std::array<Real, 4> canonical_unit_quaternion(const std::array<Real, 4>& q) {
  const Real norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(norm >= kQuatEps)) {
    throw Error(ErrorCode::DegenerateQuaternion,
                fmt::format("quaternion norm {} below {}", norm, kQuatEps));
  }
  std::array<Real, 4> unit{q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm};
  for (Real component : unit) {
    if (std::abs(component) > kQuatEps) {
      if (component < 0.0) {
        for (Real& c : unit) c = -c;
      }
      break;
    }
  }
  return unit;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

struct HeaderInfo {
  std::size_t vertex_count = 0;
  std::vector<std::string> property_names;  // in declared order
  std::size_t body_offset = 0;
};

HeaderInfo parse_header(std::span<const std::uint8_t> bytes) {
  static constexpr std::string_view kEndMarker = "end_header\n";
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const std::size_t end_pos = text.find(kEndMarker);
  if (end_pos == std::string_view::npos) {
    throw Error(ErrorCode::MalformedHeader, "no end_header line found");
  }

  HeaderInfo info;
  info.body_offset = end_pos + kEndMarker.size();

  std::size_t line_start = 0;
  std::size_t line_index = 0;
  bool seen_vertex_element = false;
  while (line_start < end_pos) {
    std::size_t line_end = text.find('\n', line_start);
    const std::string_view line = text.substr(line_start, line_end - line_start);

    if (line_index == 0) {
      if (line != "ply") {
        throw Error(ErrorCode::MalformedHeader,
                    fmt::format("missing 'ply' magic at byte 0 (got \"{}\")", line));
      }
    } else if (line_index == 1) {
      if (line != "format binary_little_endian 1.0") {
        throw Error(ErrorCode::MalformedHeader,
                    fmt::format("unsupported format line at byte {}: \"{}\"", line_start, line));
      }
    } else if (line.starts_with("comment")) {
      // ignored
    } else if (line.starts_with("element ")) {
      if (seen_vertex_element || !line.starts_with("element vertex ")) {
        throw Error(ErrorCode::MalformedHeader,
                    fmt::format("unsupported element at byte {}: \"{}\"", line_start, line));
      }
      const std::string_view count_text = line.substr(std::string_view("element vertex ").size());
      std::size_t count = 0;
      for (char c : count_text) {
        if (c < '0' || c > '9') {
          throw Error(ErrorCode::MalformedHeader,
                      fmt::format("bad vertex count \"{}\" at byte {}", count_text, line_start));
        }
        count = count * 10 + static_cast<std::size_t>(c - '0');
      }
      info.vertex_count = count;
      seen_vertex_element = true;
    } else if (line.starts_with("property ")) {
      if (!seen_vertex_element) {
        throw Error(ErrorCode::MalformedHeader,
                    fmt::format("property before element at byte {}", line_start));
      }
      if (!line.starts_with("property float ")) {
        throw Error(ErrorCode::MalformedHeader,
                    fmt::format("only float32 properties supported, got \"{}\" at byte {}",
                                line, line_start));
      }
      info.property_names.emplace_back(line.substr(std::string_view("property float ").size()));
    } else {
      throw Error(ErrorCode::MalformedHeader,
                  fmt::format("unrecognized header line at byte {}: \"{}\"", line_start, line));
    }

    line_start = line_end + 1;
    ++line_index;
  }

  if (line_index < 2) {
    throw Error(ErrorCode::MalformedHeader, "header ended before format line");
  }
  if (!seen_vertex_element) {
    throw Error(ErrorCode::MalformedHeader, "missing 'element vertex' line");
  }
  return info;
}

// Maps declared property names to record slots; rejects unknown names and
// non-contiguous f_rest blocks.
std::vector<PropertySlot> map_properties(const std::vector<std::string>& names) {
  static const std::map<std::string_view, PropertySlot> fixed = {
      {"x", {FieldKind::Position, 0}},   {"y", {FieldKind::Position, 1}},
      {"z", {FieldKind::Position, 2}},   {"nx", {FieldKind::Normal, 0}},
      {"ny", {FieldKind::Normal, 1}},    {"nz", {FieldKind::Normal, 2}},
      {"f_dc_0", {FieldKind::ColorDc, 0}}, {"f_dc_1", {FieldKind::ColorDc, 1}},
      {"f_dc_2", {FieldKind::ColorDc, 2}}, {"opacity", {FieldKind::Opacity, 0}},
      {"scale_0", {FieldKind::Scale, 0}},  {"scale_1", {FieldKind::Scale, 1}},
      {"scale_2", {FieldKind::Scale, 2}},  {"rot_0", {FieldKind::Rotation, 0}},
      {"rot_1", {FieldKind::Rotation, 1}}, {"rot_2", {FieldKind::Rotation, 2}},
      {"rot_3", {FieldKind::Rotation, 3}},
  };

  std::vector<PropertySlot> slots(names.size());
  std::vector<bool> fixed_seen(fixed.size(), false);
  std::vector<bool> rest_seen;

  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& name = names[i];
    if (auto it = fixed.find(name); it != fixed.end()) {
      const std::size_t ordinal = static_cast<std::size_t>(std::distance(fixed.begin(), it));
      if (fixed_seen[ordinal]) {
        throw Error(ErrorCode::MalformedHeader, fmt::format("duplicate property \"{}\"", name));
      }
      fixed_seen[ordinal] = true;
      slots[i] = it->second;
    } else if (name.starts_with("f_rest_")) {
      const std::string index_text = name.substr(7);
      std::size_t index = 0;
      if (index_text.empty()) {
        throw Error(ErrorCode::MalformedHeader, fmt::format("bad property name \"{}\"", name));
      }
      for (char c : index_text) {
        if (c < '0' || c > '9') {
          throw Error(ErrorCode::MalformedHeader, fmt::format("bad property name \"{}\"", name));
        }
        index = index * 10 + static_cast<std::size_t>(c - '0');
      }
      if (index >= rest_seen.size()) rest_seen.resize(index + 1, false);
      if (rest_seen[index]) {
        throw Error(ErrorCode::MalformedHeader, fmt::format("duplicate property \"{}\"", name));
      }
      rest_seen[index] = true;
      slots[i] = {FieldKind::ColorRest, index};
    } else {
      throw Error(ErrorCode::MalformedHeader, fmt::format("unknown property \"{}\"", name));
    }
  }

  std::size_t ordinal = 0;
  for (const auto& [name, slot] : fixed) {
    if (!fixed_seen[ordinal]) {
      throw Error(ErrorCode::MissingProperty, fmt::format("required property \"{}\" absent", name));
    }
    ++ordinal;
  }
  for (std::size_t i = 0; i < rest_seen.size(); ++i) {
    if (!rest_seen[i]) {
      throw Error(ErrorCode::MalformedHeader,
                  fmt::format("f_rest indices not contiguous: f_rest_{} absent", i));
    }
  }
  if (rest_seen.size() % 3 != 0) {
    throw Error(ErrorCode::MalformedHeader,
                fmt::format("f_rest width {} is not a multiple of 3", rest_seen.size()));
  }
  return slots;
}

}  // namespace

RawGaussianCloud parse_ply(std::span<const std::uint8_t> bytes) {
  const HeaderInfo header = parse_header(bytes);
  const std::vector<PropertySlot> slots = map_properties(header.property_names);

  const std::size_t n = header.vertex_count;
  const std::size_t record_size = 4 * slots.size();
  const std::size_t expected_body = n * record_size;
  const std::size_t actual_body = bytes.size() - header.body_offset;
  if (actual_body != expected_body) {
    throw Error(ErrorCode::TruncatedBody,
                fmt::format("body at byte {} has {} bytes, expected {} ({} records x {} bytes)",
                            header.body_offset, actual_body, expected_body, n, record_size));
  }

  std::size_t rest_width = 0;
  for (const PropertySlot& s : slots) {
    if (s.kind == FieldKind::ColorRest) rest_width = std::max(rest_width, s.component + 1);
  }

  RawGaussianCloud cloud;
  cloud.positions.resize(n * 3);
  cloud.normals.resize(n * 3);
  cloud.color_dc.resize(n * 3);
  cloud.color_rest.resize(n * rest_width);
  cloud.opacity_logit.resize(n);
  cloud.log_scale.resize(n * 3);
  cloud.raw_rotation.resize(n * 4);

  const std::uint8_t* body = bytes.data() + header.body_offset;
  for (std::size_t point = 0; point < n; ++point) {
    const std::uint8_t* record = body + point * record_size;
    for (std::size_t p = 0; p < slots.size(); ++p) {
      float value;
      std::memcpy(&value, record + p * 4, 4);
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteValue,
                    fmt::format("non-finite \"{}\" in record {} at byte {}",
                                header.property_names[p], point,
                                header.body_offset + point * record_size + p * 4));
      }
      const PropertySlot& slot = slots[p];
      const Real v = static_cast<Real>(value);
      switch (slot.kind) {
        case FieldKind::Position: cloud.positions[point * 3 + slot.component] = v; break;
        case FieldKind::Normal: cloud.normals[point * 3 + slot.component] = v; break;
        case FieldKind::ColorDc: cloud.color_dc[point * 3 + slot.component] = v; break;
        case FieldKind::ColorRest: cloud.color_rest[point * rest_width + slot.component] = v; break;
        case FieldKind::Opacity: cloud.opacity_logit[point] = v; break;
        case FieldKind::Scale: cloud.log_scale[point * 3 + slot.component] = v; break;
        case FieldKind::Rotation: cloud.raw_rotation[point * 4 + slot.component] = v; break;
      }
    }
  }

  cloud.validate();
  return cloud;
}

std::vector<std::uint8_t> write_ply(const RawGaussianCloud& cloud) {
  cloud.validate();
  const std::size_t n = cloud.size();
  const std::size_t rest_width = cloud.rest_width();

  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << n << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    header << "property float " << name << "\n";
  }
  for (std::size_t i = 0; i < rest_width; ++i) {
    header << "property float f_rest_" << i << "\n";
  }
  header << "property float opacity\n";
  for (int i = 0; i < 3; ++i) header << "property float scale_" << i << "\n";
  for (int i = 0; i < 4; ++i) header << "property float rot_" << i << "\n";
  header << "end_header\n";

  const std::string header_text = header.str();
  const std::size_t record_floats = 17 + rest_width;

  std::vector<std::uint8_t> out(header_text.size() + n * record_floats * 4);
  std::memcpy(out.data(), header_text.data(), header_text.size());

  std::uint8_t* body = out.data() + header_text.size();
  auto put = [&body](Real v) {
    const float f = static_cast<float>(v);
    std::memcpy(body, &f, 4);
    body += 4;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) put(cloud.positions[i * 3 + c]);
    for (int c = 0; c < 3; ++c) put(cloud.normals[i * 3 + c]);
    for (int c = 0; c < 3; ++c) put(cloud.color_dc[i * 3 + c]);
    for (std::size_t c = 0; c < rest_width; ++c) put(cloud.color_rest[i * rest_width + c]);
    put(cloud.opacity_logit[i]);
    for (int c = 0; c < 3; ++c) put(cloud.log_scale[i * 3 + c]);
    for (int c = 0; c < 4; ++c) put(cloud.raw_rotation[i * 4 + c]);
  }
  return out;
}

RawGaussianCloud read_ply_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::UnreadableFile, path);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_ply(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path, e.what()));
  }
}

void write_ply_file(const RawGaussianCloud& cloud, const std::string& path) {
  const std::vector<std::uint8_t> bytes = write_ply(cloud);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, fmt::format("cannot open {} for writing", path));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoError, fmt::format("short write to {}", path));
  }
}

GaussianCloud activate(const RawGaussianCloud& raw) {
  raw.validate();
  const std::size_t n = raw.size();
  const std::size_t rest_width = raw.rest_width();

  GaussianCloud cloud;
  cloud.positions = raw.positions;
  cloud.opacity.resize(n);
  cloud.scale.resize(n * 3);
  cloud.rotation.resize(n * 4);
  cloud.payload_width = 3 + rest_width;
  cloud.color_payload.resize(n * cloud.payload_width);

  for (std::size_t i = 0; i < n; ++i) {
    cloud.opacity[i] = Real(1) / (Real(1) + std::exp(-raw.opacity_logit[i]));
    for (int c = 0; c < 3; ++c) {
      cloud.scale[i * 3 + c] = std::exp(raw.log_scale[i * 3 + c]);
    }
    std::array<Real, 4> q{raw.raw_rotation[i * 4 + 0], raw.raw_rotation[i * 4 + 1],
                          raw.raw_rotation[i * 4 + 2], raw.raw_rotation[i * 4 + 3]};
    std::array<Real, 4> unit;
    try {
      unit = canonical_unit_quaternion(q);
    } catch (const Error& e) {
      throw Error(ErrorCode::DegenerateQuaternion, fmt::format("point {}: {}", i, e.what()));
    }
    for (int c = 0; c < 4; ++c) cloud.rotation[i * 4 + c] = unit[c];

    Real* payload = cloud.color_payload.data() + i * cloud.payload_width;
    for (int c = 0; c < 3; ++c) payload[c] = raw.color_dc[i * 3 + c];
    for (std::size_t c = 0; c < rest_width; ++c) payload[3 + c] = raw.color_rest[i * rest_width + c];
  }
  return cloud;
}

RawGaussianCloud deactivate(const GaussianCloud& cloud, std::span<const Real> normals) {
  cloud.validate();
  const std::size_t n = cloud.size();
  if (cloud.payload_width < 3) {
    throw Error(ErrorCode::ShapeMismatch, "color payload must include the 3 DC components");
  }
  if (!normals.empty() && normals.size() != n * 3) {
    throw Error(ErrorCode::ShapeMismatch, "normals must be N x 3");
  }
  const std::size_t rest_width = cloud.payload_width - 3;

  RawGaussianCloud raw;
  raw.positions = cloud.positions;
  raw.normals = normals.empty() ? std::vector<Real>(n * 3, Real(0))
                                : std::vector<Real>(normals.begin(), normals.end());
  raw.color_dc.resize(n * 3);
  raw.color_rest.resize(n * rest_width);
  raw.opacity_logit.resize(n);
  raw.log_scale.resize(n * 3);
  raw.raw_rotation = cloud.rotation;

  for (std::size_t i = 0; i < n; ++i) {
    const Real o = cloud.opacity[i];
    if (!(o > 0.0 && o < 1.0)) {
      throw Error(ErrorCode::NonFiniteValue,
                  fmt::format("opacity[{}] = {} has no finite logit", i, o));
    }
    raw.opacity_logit[i] = std::log(o / (Real(1) - o));
    for (int c = 0; c < 3; ++c) {
      raw.log_scale[i * 3 + c] = std::log(cloud.scale[i * 3 + c]);
    }
    const Real* payload = cloud.color_payload.data() + i * cloud.payload_width;
    for (int c = 0; c < 3; ++c) raw.color_dc[i * 3 + c] = payload[c];
    for (std::size_t c = 0; c < rest_width; ++c) raw.color_rest[i * rest_width + c] = payload[3 + c];
  }
  raw.validate();
  return raw;
}

std::vector<Real> strip_to_points(const GaussianCloud& cloud) {
  return cloud.positions;
}

}  // namespace gscls
