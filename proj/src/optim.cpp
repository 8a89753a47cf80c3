#include "geoflow/optim.hpp"

#include <fstream>

#include "geoflow/errors.hpp"

namespace geoflow {

namespace {
constexpr uint32_t kCkptMagic = 0x314d4647;  // "GFM1" little-endian
constexpr uint32_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const ParameterStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  auto w = [&](const void* p, size_t n) { out.write(reinterpret_cast<const char*>(p), std::streamsize(n)); };
  w(&kCkptMagic, 4);
  w(&kCkptVersion, 4);
  uint32_t count = uint32_t(store.entries.size());
  w(&count, 4);
  for (const auto& [name, entry] : store.entries) {
    uint16_t len = uint16_t(name.size());
    w(&len, 2);
    w(name.data(), name.size());
    uint8_t rank = uint8_t(entry.value.rank());
    w(&rank, 1);
    for (int d : entry.value.shape) {
      uint32_t dim = uint32_t(d);
      w(&dim, 4);
    }
    w(entry.value.data.data(), entry.value.numel() * 4);
  }
  if (!out) throw FormatError("short write on checkpoint: " + path);
}

ParameterStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  auto r = [&](void* p, size_t n) {
    in.read(reinterpret_cast<char*>(p), std::streamsize(n));
    if (size_t(in.gcount()) != n) throw FormatError("truncated checkpoint: " + path);
  };
  uint32_t magic = 0, version = 0, count = 0;
  r(&magic, 4);
  if (magic != kCkptMagic) throw FormatError("not a GFM1 checkpoint: " + path);
  r(&version, 4);
  if (version != kCkptVersion) throw FormatError("unsupported checkpoint version: " + path);
  r(&count, 4);
  ParameterStore store;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = 0;
    r(&len, 2);
    std::string name(len, '\0');
    r(name.data(), len);
    uint8_t rank = 0;
    r(&rank, 1);
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      uint32_t dim = 0;
      r(&dim, 4);
      d = int(dim);
    }
    Tensor& t = store.create(name, shape);
    r(t.data.data(), t.numel() * 4);
  }
  return store;
}

}  // namespace geoflow
