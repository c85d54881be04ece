#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ferns/model.hpp"

namespace ferns {

/// Checkpoint layout, all integers little-endian:
///
///   offset 0   char[8]  "FERNCKPT"
///          8   u32      format version (kCheckpointVersion)
///         12   u32      input depth, height, width (three u32)
///         24   u32      layer count
///   per layer: u32 kind tag (LayerKind), u32 count k, k x i32 shape ints
///     conv:  z, L, c_y, c_x
///     fern:  z, L, padding, b, then per branch |BD_k| and |BD_k| (dy, dx)
///            pairs; followed by u32 name length and the name bytes
///     dense: inputs, outputs
///     relu, maxpool, flatten: none
///   then for every parameter block in Model::parameters() order:
///     u32 element count, count x f32
///   trailer: u32 CRC-32 (zlib polynomial) of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(Model<float>& model);
Model<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(Model<float>& model, const std::filesystem::path& path);
/// Throws DataError for a bad magic ("not a checkpoint"), an unknown
/// version, truncation or a checksum mismatch, naming the byte offset.
Model<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace ferns
