#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufg/tensor.hpp"

namespace ufg {

uint64_t fnv1a64(std::string_view s);

namespace ckpt {

enum Dtype : uint8_t { f32 = 0, f64 = 1, u64 = 2 };

struct Record {
  std::string name;
  uint8_t dtype = f32;
  std::vector<int> dims;
  std::vector<unsigned char> bytes;

  static Record from_tensor(const std::string& name, const Tensor& t,
                            Dtype dtype = f32);
  static Record from_u64(const std::string& name,
                         const std::vector<uint64_t>& values);
  Tensor to_tensor() const;
  std::vector<uint64_t> to_u64() const;
};

struct Checkpoint {
  uint64_t model_digest = 0;
  std::string config_json;
  std::vector<Record> records;

  const Record* find(const std::string& name) const;
};

// Versioned container, magic "UFG1". model_digest pins the architecture; a
// loader that was built for a different architecture must refuse the file.
void save(const std::string& path, uint64_t model_digest,
          const std::string& config_json, const std::vector<Record>& records);
Checkpoint load(const std::string& path);

// Throws ConfigError when the checkpoint's digest differs from expected.
void require_digest(const Checkpoint& c, uint64_t expected);

}  // namespace ckpt
}  // namespace ufg
