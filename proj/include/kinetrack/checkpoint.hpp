#pragma once

// Binary parameter container. Layout (all integers little-endian):
//
//   magic      8 bytes  "KTCKPT01"
//   header_len u32      length of the UTF-8 JSON config header
//   header     bytes
//   count      u32      number of tensors
//   per tensor:
//     name_len u32, name bytes
//     dtype    u8       1 = float32, 2 = float64
//     rank     u32, extents u64[rank]
//     payload  product(extents) scalars, little-endian IEEE-754
//
// See docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kinetrack {

enum class DType : std::uint8_t { Float32 = 1, Float64 = 2 };

struct TensorRecord {
  std::string name;
  DType dtype = DType::Float64;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;  // widened on load; narrowed on save for Float32
};

struct CheckpointFile {
  std::string header;  // JSON text
  std::vector<TensorRecord> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& ckpt);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

}  // namespace kinetrack
