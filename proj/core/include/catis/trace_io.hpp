#pragma once

#include <filesystem>

#include "catis/tokens.hpp"

namespace catis {

// TRC v1 trace file, little-endian:
//
//   "TRC1"            magic, 4 bytes
//   u32 version       = 1
//   u32 model_depth
//   u32 layer_count
//   per layer:
//     u32 N_p, u32 d, u32 flags   (bit0 = cls_attention, bit1 = sizes)
//     f32[N_p * d]                features, row-major
//     f32[N_p]                    cls_attention   (if bit0)
//     u32[N_p]                    sizes           (if bit1)
//
// Rows are patch tokens only; provenance is not stored and is rebuilt as
// contiguous ranges from the sizes.

inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::uint32_t kFlagClsAttention = 1u << 0;
inline constexpr std::uint32_t kFlagSizes = 1u << 1;

/// Reads and validates a trace. Throws IoError if the file cannot be opened,
/// FormatError on a bad header or truncation, ValidationError on invariant
/// violations.
LayerTrace load_trace(const std::filesystem::path& path);

/// Writes a trace. Features and attention are narrowed to f32; sizes are
/// written only when some token has size != 1. Populations carrying a CLS row
/// are rejected (the format stores patch tokens only).
void save_trace(const LayerTrace& trace, const std::filesystem::path& path);

}  // namespace catis
