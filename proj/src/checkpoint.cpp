#include "lrva/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lrva {
namespace {

// The build targets little-endian hosts; serialize via memcpy and assert the
// assumption once rather than byte-swapping everywhere.
void check_host_endianness() {
  static const bool little = [] {
    const std::uint16_t probe = 1;
    std::uint8_t first;
    std::memcpy(&first, &probe, 1);
    return first == 1;
  }();
  if (!little) throw std::runtime_error("checkpoint: big-endian hosts are unsupported");
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const std::size_t at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &value, sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& cursor) {
  if (cursor + sizeof(T) > bytes.size()) throw std::runtime_error("checkpoint: truncated payload");
  T value;
  std::memcpy(&value, bytes.data() + cursor, sizeof(T));
  cursor += sizeof(T);
  return value;
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

CheckpointTensor& Checkpoint::append(const std::string& name, bool frozen, Shape dims) {
  CheckpointTensor t;
  t.name = name;
  t.frozen = frozen;
  t.values.assign(static_cast<std::size_t>(numel_of(dims)), 0.0f);
  t.dims = std::move(dims);
  tensors.push_back(std::move(t));
  return tensors.back();
}

Checkpoint snapshot(const ParameterStore& store) {
  Checkpoint ckpt;
  for (const auto& e : store.entries()) {
    auto& t = ckpt.append(e.name, e.frozen, e.tensor.shape());
    const auto& src = e.tensor.vec();
    for (std::size_t i = 0; i < src.size(); ++i) t.values[i] = static_cast<float>(src[i]);
  }
  return ckpt;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  check_host_endianness();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  put<std::uint16_t>(out, ckpt.version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long");
    if (t.dims.size() > 0xff) throw std::invalid_argument("checkpoint: tensor rank too large");
    if (static_cast<std::int64_t>(t.values.size()) != numel_of(t.dims)) {
      throw std::invalid_argument("checkpoint: payload size mismatch for '" + t.name + "'");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, t.frozen ? 1 : 0);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (int d : t.dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    const std::size_t at = out.size();
    out.resize(at + t.values.size() * sizeof(float));
    std::memcpy(out.data() + at, t.values.data(), t.values.size() * sizeof(float));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  check_host_endianness();
  std::size_t cursor = 0;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  cursor = 4;
  Checkpoint ckpt;
  ckpt.version = take<std::uint16_t>(bytes, cursor);
  if (ckpt.version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(ckpt.version));
  }
  const auto count = take<std::uint32_t>(bytes, cursor);
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    const auto name_len = take<std::uint16_t>(bytes, cursor);
    if (cursor + name_len > bytes.size()) throw std::runtime_error("checkpoint: truncated payload");
    t.name.assign(reinterpret_cast<const char*>(bytes.data() + cursor), name_len);
    cursor += name_len;
    t.frozen = take<std::uint8_t>(bytes, cursor) != 0;
    const auto rank = take<std::uint8_t>(bytes, cursor);
    t.dims.resize(rank);
    for (auto& d : t.dims) d = static_cast<int>(take<std::uint32_t>(bytes, cursor));
    const std::size_t n = static_cast<std::size_t>(numel_of(t.dims));
    if (cursor + n * sizeof(float) > bytes.size()) {
      throw std::runtime_error("checkpoint: truncated payload");
    }
    t.values.resize(n);
    std::memcpy(t.values.data(), bytes.data() + cursor, n * sizeof(float));
    cursor += n * sizeof(float);
    ckpt.tensors.push_back(std::move(t));
  }
  if (cursor != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes");
  return ckpt;
}

void write_checkpoint_file(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open for write: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw std::runtime_error("checkpoint: read failed: " + path.string());
  return decode_checkpoint(bytes);
}

void load_checkpoint(ParameterStore& store, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != store.entries().size()) {
    throw std::runtime_error("checkpoint: tensor count mismatch (" +
                             std::to_string(ckpt.tensors.size()) + " in file, " +
                             std::to_string(store.entries().size()) + " in store)");
  }
  for (const auto& t : ckpt.tensors) {
    if (!store.contains(t.name)) throw std::runtime_error("checkpoint: unexpected tensor '" + t.name + "'");
    Tensor& dst = store.get(t.name);
    if (dst.shape() != t.dims) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + t.name + "': file " +
                               shape_str(t.dims) + " vs store " + shape_str(dst.shape()));
    }
    if (store.is_frozen(t.name) != t.frozen) {
      throw std::runtime_error("checkpoint: frozen flag mismatch for '" + t.name + "'");
    }
    for (std::size_t i = 0; i < t.values.size(); ++i) dst.vec()[i] = static_cast<double>(t.values[i]);
  }
}

}  // namespace lrva
