#pragma once

#include <filesystem>
#include <string>

#include "biastracer/encoder.hpp"
#include "biastracer/vocab.hpp"

namespace bt {

// Model checkpoint: config + vocabulary + every parameter tensor.
//
// Layout (little-endian):
//   char[8]  magic "BTCKPT\0\0"
//   u32      format version (1)
//   i32 x 6  n_layers, d_model, n_heads, d_ff, vocab_size, max_len
//   u64      seed
//   u32      vocabulary size, then per token: u32 byte length + UTF-8 bytes
//   u32      tensor count, then per tensor: u32 name length + name,
//            u64 element count, f64 x count (row-major)
//   u32      metadata length + JSON text (may be empty)
struct Checkpoint {
  ModelParams params;
  Vocab vocab;
  std::string metadata_json;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bt
