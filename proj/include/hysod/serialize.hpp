#pragma once

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "hysod/nn.hpp"

namespace hysod {

// Little-endian primitives, independent of host byte order.

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline void write_f64(std::ostream& os, double d) {
  write_u64(os, std::bit_cast<std::uint64_t>(d));
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) throw DataError("unexpected end of stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw DataError("unexpected end of stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

// Checkpoint container, version 1. All integers little-endian; tensor data is
// raw IEEE-754 binary64. Layout:
//
//   byte 0   8   magic "HYSODCKP"
//   byte 8   4   u32 format version (1)
//   byte 12  8   u64 config length L
//   byte 20  L   config echo, UTF-8 JSON
//   ...      8   u64 entry count N
//   per entry:   u64 name length, name bytes,
//                u32 b, u32 c, u32 h, u32 w,
//                b*c*h*w f64 values
//   trailer  4   u32 CRC-32 of everything after the magic
inline constexpr char kCheckpointMagic[8] = {'H', 'Y', 'S', 'O', 'D', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::string config_json;
  std::vector<CheckpointEntry> entries;

  void write(std::ostream& os) const {
    std::ostringstream body;
    write_u32(body, kCheckpointVersion);
    write_u64(body, config_json.size());
    body.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
    write_u64(body, entries.size());
    for (const auto& e : entries) {
      write_u64(body, e.name.size());
      body.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      write_u32(body, static_cast<std::uint32_t>(e.tensor.b));
      write_u32(body, static_cast<std::uint32_t>(e.tensor.c));
      write_u32(body, static_cast<std::uint32_t>(e.tensor.h));
      write_u32(body, static_cast<std::uint32_t>(e.tensor.w));
      for (double d : e.tensor.v) write_f64(body, d);
    }
    std::string payload = body.str();
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    os.write(kCheckpointMagic, 8);
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    write_u32(os, crc);
  }

  static Checkpoint read(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
      throw DataError("not a hysod checkpoint");
    std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (payload.size() < 4) throw DataError("truncated checkpoint");
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
      stored_crc |= static_cast<std::uint32_t>(
                        static_cast<unsigned char>(payload[payload.size() - 4 + i]))
                    << (8 * i);
    payload.resize(payload.size() - 4);
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    if (crc != stored_crc) throw DataError("checkpoint CRC mismatch");

    std::istringstream body(payload);
    Checkpoint ckpt;
    std::uint32_t version = read_u32(body);
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t cfg_len = read_u64(body);
    ckpt.config_json.resize(cfg_len);
    if (cfg_len && !body.read(ckpt.config_json.data(), static_cast<std::streamsize>(cfg_len)))
      throw DataError("truncated checkpoint config");
    std::uint64_t count = read_u64(body);
    ckpt.entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      CheckpointEntry e;
      std::uint64_t name_len = read_u64(body);
      e.name.resize(name_len);
      if (name_len && !body.read(e.name.data(), static_cast<std::streamsize>(name_len)))
        throw DataError("truncated checkpoint entry name");
      int b = static_cast<int>(read_u32(body));
      int c = static_cast<int>(read_u32(body));
      int h = static_cast<int>(read_u32(body));
      int w = static_cast<int>(read_u32(body));
      e.tensor = Tensor(b, c, h, w);
      for (double& d : e.tensor.v) d = read_f64(body);
      ckpt.entries.push_back(std::move(e));
    }
    return ckpt;
  }
};

/// Snapshots parameters into a checkpoint stream.
inline void save_parameters(std::ostream& os, const std::string& config_json,
                            const std::vector<Parameter*>& params) {
  Checkpoint ckpt;
  ckpt.config_json = config_json;
  ckpt.entries.reserve(params.size());
  for (const Parameter* p : params) ckpt.entries.push_back({p->name, p->value});
  ckpt.write(os);
}

/// Restores parameters by name; every parameter must be present with a
/// matching shape.
inline std::string load_parameters(std::istream& is, const std::vector<Parameter*>& params) {
  Checkpoint ckpt = Checkpoint::read(is);
  for (Parameter* p : params) {
    const CheckpointEntry* found = nullptr;
    for (const auto& e : ckpt.entries)
      if (e.name == p->name) {
        found = &e;
        break;
      }
    if (!found) throw DataError("checkpoint missing parameter " + p->name);
    if (!found->tensor.same_shape(p->value))
      throw DataError("checkpoint shape mismatch for " + p->name);
    p->value = found->tensor;
  }
  return ckpt.config_json;
}

inline std::vector<std::uint8_t> to_bytes(const std::string& s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

}  // namespace hysod
