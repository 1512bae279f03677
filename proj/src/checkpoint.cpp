#include "nucgrade/checkpoint.hpp"

#include "nucgrade/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace nucgrade {
namespace {

constexpr char kMagic[8] = {'N', 'G', 'C', 'K', 'P', 'T', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  os.write(buf, 4);
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
  char buf[4];
  if (!is.read(buf, 4)) throw DataError(path + ": truncated checkpoint");
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

std::string read_string(std::istream& is, const std::string& path) {
  const std::uint32_t n = read_u32(is, path);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), std::streamsize(n))) throw DataError(path + ": truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open checkpoint for writing");
  os.write(kMagic, sizeof(kMagic));
  write_string(os, ckpt.config_text);
  write_u32(os, std::uint32_t(ckpt.meta.size()));
  for (const auto& [key, value] : ckpt.meta) {
    write_string(os, key);
    write_string(os, value);
  }
  write_u32(os, std::uint32_t(ckpt.arrays.size()));
  for (const auto& [name, tensor] : ckpt.arrays) {
    write_string(os, name);
    for (int d : tensor.shape()) write_u32(os, std::uint32_t(d));
    os.write(reinterpret_cast<const char*>(tensor.data()),
             std::streamsize(std::size_t(tensor.size()) * sizeof(float)));
  }
  if (!os) throw DataError(path + ": checkpoint write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open checkpoint");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(path + ": not a checkpoint file");
  }
  Checkpoint ckpt;
  ckpt.config_text = read_string(is, path);
  const std::uint32_t n_meta = read_u32(is, path);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = read_string(is, path);
    ckpt.meta[key] = read_string(is, path);
  }
  const std::uint32_t n_arrays = read_u32(is, path);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    const std::string name = read_string(is, path);
    int dims[4];
    for (int& d : dims) d = int(read_u32(is, path));
    Tensor<float> t(dims[0], dims[1], dims[2], dims[3]);
    if (!is.read(reinterpret_cast<char*>(t.data()),
                 std::streamsize(std::size_t(t.size()) * sizeof(float)))) {
      throw DataError(path + ": truncated array " + name);
    }
    ckpt.arrays.emplace(name, t);
  }
  return ckpt;
}

}  // namespace nucgrade
