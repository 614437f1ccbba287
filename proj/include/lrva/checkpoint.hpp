#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lrva/params.hpp"

namespace lrva {

inline constexpr char kCheckpointMagic[4] = {'L', 'R', 'V', 'A'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  bool frozen = false;
  Shape dims;
  std::vector<float> values;  // payload is f32 on disk
};

struct Checkpoint {
  std::uint16_t version = kCheckpointVersion;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
  CheckpointTensor& append(const std::string& name, bool frozen, Shape dims);
};

// Converts the full store (frozen + trainable) to a checkpoint image.
Checkpoint snapshot(const ParameterStore& store);

// Binary layout: magic "LRVA", version u16, tensor count u32; per tensor:
// name (u16 length + UTF-8), frozen flag u8, rank u8, dims u32 each, f32
// payload. All integers and floats little-endian.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint_file(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

// Copies checkpoint values into an already-constructed store. Tensor sets
// must match exactly by name; shape or frozen-flag disagreement is an error.
void load_checkpoint(ParameterStore& store, const Checkpoint& ckpt);

}  // namespace lrva
