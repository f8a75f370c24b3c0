#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>

#include "sparseg/volume.hpp"

namespace sparseg {

/// MVOL layout: one JSON header line
///   {"dims":[X,Y,Z],"spacing":[sx,sy,sz],"dtype":"f32"|"u8"}\n
/// followed by the raw little-endian payload in x-fastest order.
class MvolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Grid = std::variant<Volume3D, BinaryMask3D>;

std::string encode_mvol(const Volume3D& volume);
std::string encode_mvol(const BinaryMask3D& mask);
Grid decode_mvol(const std::string& bytes);

Grid read_mvol(const std::filesystem::path& path);
/// Reads an f32 file. u8 payloads are promoted to intensities 0/1.
Volume3D read_volume(const std::filesystem::path& path);
/// Reads a u8 file; rejects f32 files and any value outside {0,1}.
BinaryMask3D read_mask(const std::filesystem::path& path);

void write_mvol(const Volume3D& volume, const std::filesystem::path& path);
void write_mvol(const BinaryMask3D& mask, const std::filesystem::path& path);

/// Whole-file helpers shared by the other on-disk formats.
std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sparseg
