#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "kinn/error.hpp"
#include "kinn/trainer.hpp"

namespace kinn {

namespace {

constexpr std::array<char, 4> kMagic = {'K', 'I', 'N', 'N'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 5 * 4;
constexpr std::uint32_t kMaxDim = 1u << 16;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_checkpoint(const NetworkParams& params, std::ostream& os) {
  const auto& a = params.arch();
  if (a.equality_dim != 0) {
    throw ContractViolation("checkpoint format v1 does not store an equality-multiplier head");
  }
  std::vector<unsigned char> bytes(kMagic.begin(), kMagic.end());
  put_u32(bytes, kCheckpointVersion);
  for (const int d : {a.input_dim, a.width, a.blocks, a.primal_dim, a.inequality_dim}) {
    put_u32(bytes, static_cast<std::uint32_t>(d));
  }
  const std::size_t payload_start = bytes.size();
  for (const float f : params.values()) put_u32(bytes, std::bit_cast<std::uint32_t>(f));
  put_u64(bytes, fnv1a64(std::span<const unsigned char>(bytes).subspan(payload_start)));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed to write checkpoint");
}

void save_checkpoint(const NetworkParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  save_checkpoint(params, os);
}

NetworkParams load_checkpoint(std::istream& is) {
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CorruptCheckpoint("bad magic bytes");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw UnsupportedVersion("checkpoint version " + std::to_string(version) +
                             " (supported: " + std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < kHeaderBytes) throw CorruptCheckpoint("truncated header");
  std::array<int, 5> dims{};
  for (int i = 0; i < 5; ++i) {
    const std::uint32_t d = get_u32(bytes.data() + 8 + 4 * i);
    if (d > kMaxDim) throw CorruptCheckpoint("implausible architecture dimension");
    dims[i] = static_cast<int>(d);
  }
  Architecture arch{dims[0], dims[1], dims[2], dims[3], dims[4], 0};
  if (arch.input_dim < 1 || arch.width < 1 || arch.primal_dim < 1) {
    throw CorruptCheckpoint("invalid architecture descriptor");
  }
  NetworkParams params(arch);
  const std::size_t payload = params.size() * 4;
  if (bytes.size() < kHeaderBytes + payload + 8) throw CorruptCheckpoint("truncated payload");
  if (bytes.size() > kHeaderBytes + payload + 8) throw CorruptCheckpoint("trailing bytes");
  const auto body = std::span<const unsigned char>(bytes).subspan(kHeaderBytes, payload);
  if (fnv1a64(body) != get_u64(bytes.data() + kHeaderBytes + payload)) {
    throw CorruptCheckpoint("checksum mismatch");
  }
  auto values = params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(body.data() + 4 * i));
  }
  return params;
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  return load_checkpoint(is);
}

}  // namespace kinn
