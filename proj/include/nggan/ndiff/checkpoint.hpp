#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

// Versioned container for named f32 tensors plus a free-form metadata string.
//
// Layout (little-endian):
//   "NGCK" | u8 version (1) | u32 meta_len | meta bytes |
//   u32 n_blobs | n_blobs * blob
//   blob = u16 name_len | name bytes | u8 rank | rank * u32 dims | prod(dims) f32
namespace nggan::nd {

inline constexpr unsigned char kCheckpointVersion = 1;

struct Blob {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct CheckpointFile {
  std::string meta;
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const;
};

std::vector<unsigned char> encode_checkpoint(const CheckpointFile& file);
CheckpointFile decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const CheckpointFile& file, const std::filesystem::path& path);
CheckpointFile load_checkpoint(const std::filesystem::path& path);

}  // namespace nggan::nd
