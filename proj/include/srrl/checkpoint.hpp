#pragma once

#include <string>
#include <utility>
#include <vector>

#include "srrl/tensor.hpp"

namespace srrl {

// Versioned binary tensor container:
//   magic "SRRL", u32 version, then per entry
//   u32 name length, name bytes, u32 rank, u32 dims[rank], f64 payload.
// All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& entries);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

}  // namespace srrl
