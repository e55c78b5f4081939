#include "hieum/sparse/checkpoint.hpp"

#include "hieum/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

namespace hieum::sparse {

namespace {

constexpr char kMagic[8] = {'H', 'I', 'E', 'U', 'M', 'C', 'K', 'P'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json manifest;
  manifest["metadata"] = nlohmann::ordered_json::parse(ckpt.metadata_json);
  manifest["tensors"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    std::size_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.data.size()) throw Error(ErrorCode::ShapeMismatch, "tensor " + t.name + " data does not match shape");
    const std::uint64_t nbytes = t.data.size() * 4;
    manifest["tensors"].push_back(
        {{"name", t.name}, {"shape", t.shape}, {"dtype", "float32"}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& t : ckpt.tensors) {
    for (float f : t.data) put_f32(out, f);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error(ErrorCode::Io, "not a checkpoint file");
  }
  const std::uint64_t len = get_u64(bytes.data() + 8);
  if (len > bytes.size() - 16) throw Error(ErrorCode::Io, "truncated checkpoint manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("bad checkpoint manifest: ") + e.what());
  }
  const std::size_t base = 16 + len;
  Checkpoint ckpt;
  try {
    ckpt.metadata_json = manifest.at("metadata").dump();
    for (const auto& entry : manifest.at("tensors")) {
      CheckpointTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (entry.at("dtype").get<std::string>() != "float32") throw Error(ErrorCode::Io, t.name + ": unsupported dtype");
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
      std::size_t count = 1;
      for (auto d : t.shape) count *= d;
      if (nbytes != count * 4 || base + offset + nbytes > bytes.size()) {
        throw Error(ErrorCode::Io, t.name + ": blob out of range");
      }
      t.data.resize(count);
      const auto* p = bytes.data() + base + offset;
      for (std::size_t i = 0; i < count; ++i) t.data[i] = get_f32(p + 4 * i);
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("bad checkpoint manifest: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace hieum::sparse
