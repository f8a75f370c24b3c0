#include "sparseg/mvol.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace sparseg {

static_assert(std::endian::native == std::endian::little, "MVOL payload code assumes a little-endian host");

namespace {

using ordered_json = nlohmann::ordered_json;

std::string header_line(const Dims& d, const Spacing& s, const char* dtype) {
  ordered_json h;
  h["dims"] = {d.x, d.y, d.z};
  h["spacing"] = {s.sx, s.sy, s.sz};
  h["dtype"] = dtype;
  return h.dump() + "\n";
}

struct Header {
  Dims dims;
  Spacing spacing;
  std::string dtype;
  std::size_t payload_offset = 0;
};

Header parse_header(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) {
    throw MvolError("malformed MVOL header: missing newline terminator");
  }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw MvolError(std::string("malformed MVOL header: ") + e.what());
  }
  Header out;
  try {
    const auto& dims = h.at("dims");
    const auto& spacing = h.at("spacing");
    if (!dims.is_array() || dims.size() != 3 || !spacing.is_array() || spacing.size() != 3) {
      throw MvolError("malformed MVOL header: dims and spacing must have 3 entries");
    }
    for (const auto& v : dims) {
      if (!v.is_number_integer()) throw MvolError("malformed MVOL header: dims must be integers");
    }
    out.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
    out.spacing = {spacing[0].get<double>(), spacing[1].get<double>(), spacing[2].get<double>()};
    out.dtype = h.at("dtype").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MvolError(std::string("malformed MVOL header: ") + e.what());
  }
  if (!out.dims.positive()) throw MvolError("malformed MVOL header: dims must be positive");
  if (!out.spacing.valid()) throw MvolError("malformed MVOL header: spacing must be finite and > 0");
  if (out.dtype != "f32" && out.dtype != "u8") {
    throw MvolError("malformed MVOL header: unknown dtype '" + out.dtype + "'");
  }
  out.payload_offset = nl + 1;
  const std::size_t width = out.dtype == "f32" ? 4 : 1;
  const std::size_t got = bytes.size() - out.payload_offset;
  if (got != out.dims.count() * width) {
    throw MvolError("MVOL payload length mismatch: expected " + std::to_string(out.dims.count() * width) +
                    " bytes, got " + std::to_string(got));
  }
  return out;
}

}  // namespace

std::string encode_mvol(const Volume3D& volume) {
  std::string out = header_line(volume.dims(), volume.spacing(), "f32");
  const auto v = volume.voxels();
  const std::size_t offset = out.size();
  out.resize(offset + v.size() * sizeof(float));
  std::memcpy(out.data() + offset, v.data(), v.size() * sizeof(float));
  return out;
}

std::string encode_mvol(const BinaryMask3D& mask) {
  std::string out = header_line(mask.dims(), mask.spacing(), "u8");
  const auto v = mask.voxels();
  out.append(reinterpret_cast<const char*>(v.data()), v.size());
  return out;
}

Grid decode_mvol(const std::string& bytes) {
  const Header h = parse_header(bytes);
  const char* payload = bytes.data() + h.payload_offset;
  if (h.dtype == "f32") {
    std::vector<float> voxels(h.dims.count());
    std::memcpy(voxels.data(), payload, voxels.size() * sizeof(float));
    try {
      return Volume3D(h.dims, h.spacing, std::move(voxels));
    } catch (const std::invalid_argument& e) {
      throw MvolError(e.what());
    }
  }
  std::vector<std::uint8_t> voxels(payload, payload + h.dims.count());
  try {
    return BinaryMask3D(h.dims, h.spacing, std::move(voxels));
  } catch (const std::invalid_argument& e) {
    throw MvolError(e.what());
  }
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Grid read_mvol(const std::filesystem::path& path) { return decode_mvol(read_file_bytes(path)); }

Volume3D read_volume(const std::filesystem::path& path) {
  auto grid = read_mvol(path);
  if (auto* v = std::get_if<Volume3D>(&grid)) return std::move(*v);
  const auto& m = std::get<BinaryMask3D>(grid);
  const auto src = m.voxels();
  return Volume3D(m.dims(), m.spacing(), std::vector<float>(src.begin(), src.end()));
}

BinaryMask3D read_mask(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  const Header h = parse_header(bytes);
  if (h.dtype != "u8") {
    throw MvolError(path.string() + ": expected a u8 mask, found dtype " + h.dtype);
  }
  return std::get<BinaryMask3D>(decode_mvol(bytes));
}

void write_mvol(const Volume3D& volume, const std::filesystem::path& path) {
  write_file_bytes(path, encode_mvol(volume));
}

void write_mvol(const BinaryMask3D& mask, const std::filesystem::path& path) {
  write_file_bytes(path, encode_mvol(mask));
}

}  // namespace sparseg
