#include "ufg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ufg/errors.hpp"

namespace ufg {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace ckpt {

namespace {

constexpr char kMagic[4] = {'U', 'F', 'G', '1'};
constexpr uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

size_t elem_size(uint8_t dtype) {
  switch (dtype) {
    case f32: return 4;
    case f64: return 8;
    case u64: return 8;
    default: throw IoError("checkpoint: unknown dtype code");
  }
}

}  // namespace

Record Record::from_tensor(const std::string& name, const Tensor& t, Dtype dtype) {
  Record r;
  r.name = name;
  r.dtype = dtype;
  r.dims = t.shape();
  if (dtype == f32) {
    r.bytes.resize(static_cast<size_t>(t.size()) * 4);
    for (int64_t i = 0; i < t.size(); ++i) {
      const float f = static_cast<float>(t[i]);
      std::memcpy(r.bytes.data() + i * 4, &f, 4);
    }
  } else if (dtype == f64) {
    r.bytes.resize(static_cast<size_t>(t.size()) * 8);
    std::memcpy(r.bytes.data(), t.data(), r.bytes.size());
  } else {
    throw IoError("Record::from_tensor: dtype must be f32 or f64");
  }
  return r;
}

Record Record::from_u64(const std::string& name,
                        const std::vector<uint64_t>& values) {
  Record r;
  r.name = name;
  r.dtype = u64;
  r.dims = {static_cast<int>(values.size())};
  r.bytes.resize(values.size() * 8);
  std::memcpy(r.bytes.data(), values.data(), r.bytes.size());
  return r;
}

Tensor Record::to_tensor() const {
  Tensor t(dims);
  if (dtype == f32) {
    for (int64_t i = 0; i < t.size(); ++i) {
      float f;
      std::memcpy(&f, bytes.data() + i * 4, 4);
      t[i] = f;
    }
  } else if (dtype == f64) {
    std::memcpy(t.data(), bytes.data(), bytes.size());
  } else {
    throw IoError("Record::to_tensor: not a float record");
  }
  return t;
}

std::vector<uint64_t> Record::to_u64() const {
  if (dtype != u64) throw IoError("Record::to_u64: not a u64 record");
  std::vector<uint64_t> v(bytes.size() / 8);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

const Record* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

void save(const std::string& path, uint64_t model_digest,
          const std::string& config_json, const std::vector<Record>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put<uint32_t>(os, kVersion);
  put<uint64_t>(os, model_digest);
  put<uint32_t>(os, static_cast<uint32_t>(config_json.size()));
  os.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
  put<uint32_t>(os, static_cast<uint32_t>(records.size()));
  for (const auto& r : records) {
    put<uint32_t>(os, static_cast<uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<uint8_t>(os, r.dtype);
    put<uint8_t>(os, static_cast<uint8_t>(r.dims.size()));
    int64_t n = r.dims.empty() ? 0 : 1;
    for (int d : r.dims) {
      put<int32_t>(os, d);
      n *= d;
    }
    if (r.bytes.size() != static_cast<size_t>(n) * elem_size(r.dtype))
      throw IoError("checkpoint: record " + r.name + " payload size mismatch");
    os.write(reinterpret_cast<const char*>(r.bytes.data()),
             static_cast<std::streamsize>(r.bytes.size()));
  }
  if (!os) throw IoError("checkpoint: write failure for " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  const uint32_t version = get<uint32_t>(is);
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.model_digest = get<uint64_t>(is);
  const uint32_t json_len = get<uint32_t>(is);
  c.config_json.resize(json_len);
  is.read(c.config_json.data(), json_len);
  const uint32_t n_records = get<uint32_t>(is);
  c.records.resize(n_records);
  for (auto& r : c.records) {
    const uint32_t name_len = get<uint32_t>(is);
    r.name.resize(name_len);
    is.read(r.name.data(), name_len);
    r.dtype = get<uint8_t>(is);
    const uint8_t ndim = get<uint8_t>(is);
    r.dims.resize(ndim);
    int64_t n = 1;
    for (auto& d : r.dims) {
      d = get<int32_t>(is);
      n *= d;
    }
    r.bytes.resize(static_cast<size_t>(n) * elem_size(r.dtype));
    is.read(reinterpret_cast<char*>(r.bytes.data()),
            static_cast<std::streamsize>(r.bytes.size()));
  }
  if (!is) throw IoError("checkpoint: truncated file " + path);
  return c;
}

void require_digest(const Checkpoint& c, uint64_t expected) {
  if (c.model_digest != expected)
    throw ConfigError("checkpoint: model digest mismatch (file was written for "
                      "a different architecture)");
}

}  // namespace ckpt
}  // namespace ufg
