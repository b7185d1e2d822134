#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tokenmixup/numerics/graph.hpp"

namespace tkmx::inline TKMX_ABI {

// Layout: "TKMX", u32 version (=1), then per tensor
// {u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 data[prod(dims)]},
// all little-endian. Values are always stored as f32.

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params);
/// Loads every stored tensor into the parameter of the same name. Unknown
/// names or shape mismatches throw.
void load_checkpoint(const std::filesystem::path& path, ParameterStore& params);
NamedTensors read_checkpoint(const std::filesystem::path& path);

}  // namespace tkmx::inline TKMX_ABI
