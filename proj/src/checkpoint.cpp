#include "kinetrack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kinetrack {
namespace {

constexpr char kMagic[8] = {'K', 'T', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated: " + path.string());
  return v;
}

std::string get_string(std::ifstream& in, std::uint32_t len, const std::filesystem::path& path) {
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint truncated: " + path.string());
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.header.size()));
  out.write(ckpt.header.data(), static_cast<std::streamsize>(ckpt.header.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    std::uint64_t count = 1;
    for (auto e : t.shape) count *= e;
    if (count != t.data.size()) {
      throw std::invalid_argument("checkpoint tensor '" + t.name + "' payload/shape mismatch");
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) put<std::uint64_t>(out, e);
    for (double v : t.data) {
      if (t.dtype == DType::Float32) {
        put<float>(out, static_cast<float>(v));
      } else {
        put<double>(out, v);
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path.string());
  }
  CheckpointFile ckpt;
  ckpt.header = get_string(in, get<std::uint32_t>(in, path), path);
  const auto count = get<std::uint32_t>(in, path);
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord t;
    t.name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto dtype = get<std::uint8_t>(in, path);
    if (dtype != 1 && dtype != 2) {
      throw std::runtime_error("checkpoint tensor '" + t.name + "' has unknown dtype " +
                               std::to_string(dtype));
    }
    t.dtype = static_cast<DType>(dtype);
    const auto rank = get<std::uint32_t>(in, path);
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get<std::uint64_t>(in, path));
      n *= t.shape.back();
    }
    t.data.resize(n);
    for (auto& v : t.data) {
      v = t.dtype == DType::Float32 ? static_cast<double>(get<float>(in, path)) : get<double>(in, path);
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace kinetrack
