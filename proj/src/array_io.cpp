#include "egogaze/array_io.hpp"

#include <cstring>
#include <fstream>

namespace egogaze {

namespace {
constexpr char kMagic[4] = {'E', 'G', 'C', '1'};
constexpr uint32_t kMaxRank = 8;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(what + ": truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
}  // namespace

void write_array(std::ostream& os, const Tensor<float>& t) {
  if (t.rank() == 0 || t.rank() > static_cast<int>(kMaxRank))
    throw std::invalid_argument("array rank out of range");
  os.write(kMagic, 4);
  put_u32(os, static_cast<uint32_t>(t.rank()));
  for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
  // host is little-endian; payload written verbatim
  os.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!os) throw std::runtime_error("array write failed");
}

Tensor<float> read_array(std::istream& is, const std::string& what) {
  char magic[4];
  if (!is.read(magic, 4)) throw std::runtime_error(what + ": truncated header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error(what + ": bad magic, not an EGC1 array");
  uint32_t rank = get_u32(is, what);
  if (rank == 0 || rank > kMaxRank) throw std::runtime_error(what + ": invalid rank " + std::to_string(rank));
  std::vector<int> shape(rank);
  int64_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    uint32_t d = get_u32(is, what);
    if (d > (1u << 30)) throw std::runtime_error(what + ": dimension too large");
    shape[i] = static_cast<int>(d);
    n *= d;
  }
  Tensor<float> t;
  t.shape = shape;
  t.data.resize(static_cast<size_t>(n));
  if (!is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(n * sizeof(float))))
    throw std::runtime_error(what + ": truncated payload (length mismatch)");
  return t;
}

void save_array(const std::string& path, const Tensor<float>& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_array(f, t);
}

Tensor<float> load_array(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_array(f, path);
}

void save_array(const std::string& path, const Tensor<double>& t) { save_array(path, t.cast<float>()); }

Tensor<double> load_array_f64(const std::string& path) { return load_array(path).cast<double>(); }

}  // namespace egogaze
