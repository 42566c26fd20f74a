#pragma once

#include <filesystem>
#include <string>

#include "msfin/model.hpp"

namespace msfin {

/// Checkpoint layout (little-endian):
///   "MSFN" | u32 version | u32 n | n bytes of JSON {"model": config, "meta": {...}}
///   | u32 tensor count | per tensor: u32 name length, name, u8 dtype (2 = f64),
///   u32 rank, rank x u64 extents, raw values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const model::MsFIN& net, const std::filesystem::path& path,
                     const nlohmann::json& meta = nlohmann::json::object());

/// Builds a model from the stored config and fills every parameter.
model::MsFIN load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

/// Copies stored parameters into `net`. Names and extents must match exactly;
/// nothing is modified when any check fails.
void load_checkpoint_into(model::MsFIN& net, const std::filesystem::path& path);

}  // namespace msfin
