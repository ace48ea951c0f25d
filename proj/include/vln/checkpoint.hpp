#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vln/tensor.hpp"

// Flat binary parameter checkpoint.
//
//   offset 0  "VLNCKP"            6-byte magic
//   offset 6  version             u8 (currently 1)
//   offset 7  tag                 u8 (payload kind, e.g. encoder kind)
//   offset 8  record count        u32 LE
//   per record:
//     name length u32 LE, name bytes (UTF-8, no terminator)
//     rank u32 LE, rank x u64 LE dims
//     numel x f64 LE values
//
// Records keep their order; encode(decode(bytes)) == bytes.
namespace vln {

inline constexpr char kCheckpointMagic[6] = {'V', 'L', 'N', 'C', 'K', 'P'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::uint8_t tag = 0;
  std::vector<CheckpointRecord> records;

  const Tensor* find(std::string_view name) const;
  const Tensor& at(std::string_view name) const;  // LookupError when missing
  void add(std::string name, const Tensor& t);
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Small file helpers shared by the IO code.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace vln
