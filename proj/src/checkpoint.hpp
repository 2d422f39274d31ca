// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "config.hpp"
#include "model.hpp"

namespace ernetcl {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

/// Layout:
///   "ernetcl-checkpoint <version>\n"
///   config as `key = value` lines
///   "end-config\n"
///   u32 block count, then per block:
///     u32 name length, name bytes, u32 rank, u64 extents[rank],
///     f64 payload[product of extents]
/// All integers and floats little-endian.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace ernetcl
