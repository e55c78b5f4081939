#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hieum::sparse {

struct CheckpointTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;

  bool operator==(const CheckpointTensor&) const = default;
};

// Named float32 tensors plus a free-form JSON metadata document.
struct Checkpoint {
  std::vector<CheckpointTensor> tensors;
  std::string metadata_json = "{}";

  const CheckpointTensor* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

// Layout: "HIEUMCKP", u64 little-endian manifest length, JSON manifest
// {"metadata": ..., "tensors": [{name, shape, dtype, offset, nbytes}]},
// then the raw little-endian blobs at their offsets (relative to the blob section).
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hieum::sparse
