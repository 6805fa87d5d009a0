#include <cstring>
#include <fstream>

#include "peddet/params.hpp"

namespace peddet {

namespace {

// All multi-byte fields are little-endian on disk.
void put_u16(std::ostream& out, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, const float* data, size_t count) {
  uint32_t bits;
  for (size_t i = 0; i < count; ++i) {
    std::memcpy(&bits, &data[i], 4);
    put_u32(out, bits);
  }
}

uint8_t get_u8(std::istream& in, const std::string& what) {
  unsigned char b;
  if (!in.read(reinterpret_cast<char*>(&b), 1)) {
    throw ParseError("truncated file while reading " + what);
  }
  return b;
}

uint16_t get_u16(std::istream& in, const std::string& what) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) {
    throw ParseError("truncated file while reading " + what);
  }
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw ParseError("truncated file while reading " + what);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void get_f32(std::istream& in, float* data, size_t count,
             const std::string& what) {
  for (size_t i = 0; i < count; ++i) {
    const uint32_t bits = get_u32(in, what);
    std::memcpy(&data[i], &bits, 4);
  }
}

void expect_magic(std::istream& in, const char* magic,
                  const std::string& path) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw ParseError("bad magic in " + path + " (expected " +
                     std::string(magic, 4) + ")");
  }
}

}  // namespace

void check_params_match(const ModelGraph& graph, const ParamSet<float>& set) {
  const std::vector<ParamDesc> descs = graph.param_descs();
  for (const ParamDesc& d : descs) {
    if (!set.has(d.name)) {
      throw ValidationError("weights are missing tensor '" + d.name + "'");
    }
    const TensorF& v = set.at(d.name).value;
    if (v.n() != d.n || v.c() != d.c || v.h() != d.h || v.w() != d.w) {
      throw ValidationError("weights tensor '" + d.name + "' has shape " +
                            v.shape_string() + ", config expects " +
                            TensorF::shape_string(d.n, d.c, d.h, d.w));
    }
  }
  if (set.params.size() != descs.size()) {
    throw ValidationError("weights hold " + std::to_string(set.params.size()) +
                          " tensors, config expects " +
                          std::to_string(descs.size()));
  }
}

void save_weights(const ParamSet<float>& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weights file: " + path);
  out.write("PWTS", 4);
  out.put(1);
  put_u32(out, static_cast<uint32_t>(set.params.size()));
  for (const auto& p : set.params) {
    put_u16(out, static_cast<uint16_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    out.put(4);
    put_u32(out, static_cast<uint32_t>(p.value.n()));
    put_u32(out, static_cast<uint32_t>(p.value.c()));
    put_u32(out, static_cast<uint32_t>(p.value.h()));
    put_u32(out, static_cast<uint32_t>(p.value.w()));
    put_f32(out, p.value.data(), static_cast<size_t>(p.value.size()));
  }
  if (!out) throw IoError("failed writing weights file: " + path);
}

ParamSet<float> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights file: " + path);
  expect_magic(in, "PWTS", path);
  const uint8_t version = get_u8(in, "version");
  if (version != 1) {
    throw ParseError("unsupported PWTS version " + std::to_string(version) +
                     " in " + path);
  }
  const uint32_t count = get_u32(in, "tensor count");
  ParamSet<float> set;
  for (uint32_t t = 0; t < count; ++t) {
    const uint16_t name_len = get_u16(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw ParseError("truncated file while reading tensor name in " + path);
    }
    const uint8_t ndim = get_u8(in, "ndim");
    if (ndim != 4) {
      throw ParseError("tensor '" + name + "' in " + path + " has ndim " +
                       std::to_string(ndim) + ", expected 4");
    }
    uint32_t ext[4];
    for (auto& e : ext) e = get_u32(in, "extent");
    Parameter<float> p;
    p.name = name;
    p.is_bias = name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    p.value = TensorF(static_cast<int>(ext[0]), static_cast<int>(ext[1]),
                      static_cast<int>(ext[2]), static_cast<int>(ext[3]));
    get_f32(in, p.value.data(), static_cast<size_t>(p.value.size()),
            "tensor '" + name + "'");
    p.grad = TensorF(p.value.n(), p.value.c(), p.value.h(), p.value.w());
    p.velocity = TensorF(p.value.n(), p.value.c(), p.value.h(), p.value.w());
    if (set.has(name)) {
      throw ParseError("duplicate tensor '" + name + "' in " + path);
    }
    set.add(std::move(p));
  }
  return set;
}

void save_tensor(const TensorF& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tensor file: " + path);
  out.write("PTEN", 4);
  out.put(1);  // version
  out.put(0);  // dtype f32
  out.put(4);  // ndim
  put_u32(out, static_cast<uint32_t>(t.n()));
  put_u32(out, static_cast<uint32_t>(t.c()));
  put_u32(out, static_cast<uint32_t>(t.h()));
  put_u32(out, static_cast<uint32_t>(t.w()));
  put_f32(out, t.data(), static_cast<size_t>(t.size()));
  if (!out) throw IoError("failed writing tensor file: " + path);
}

TensorF load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file: " + path);
  expect_magic(in, "PTEN", path);
  if (get_u8(in, "version") != 1) throw ParseError("unsupported PTEN version in " + path);
  if (get_u8(in, "dtype") != 0) throw ParseError("unsupported PTEN dtype in " + path);
  if (get_u8(in, "ndim") != 4) throw ParseError("PTEN ndim must be 4 in " + path);
  uint32_t ext[4];
  for (auto& e : ext) e = get_u32(in, "extent");
  TensorF t(static_cast<int>(ext[0]), static_cast<int>(ext[1]),
            static_cast<int>(ext[2]), static_cast<int>(ext[3]));
  get_f32(in, t.data(), static_cast<size_t>(t.size()), "tensor data");
  return t;
}

}  // namespace peddet
