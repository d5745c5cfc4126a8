// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gscart/grid.hpp"

namespace gsc {

/// A stack of equally shaped float32 grids, as stored on disk.
///
/// File layout (little endian):
///   32-byte header: magic "GSCMAP01" (8 ASCII bytes), u32 count, u32 rows,
///   u32 cols, u32 dtype tag (1 = float32), 8 reserved zero bytes;
///   payload: count*rows*cols float32, row-major within a sample,
///   sample-major overall.
struct MapTensor {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<float> data; // count * rows * cols

    SpectrumMap sample(int k) const;
    void append(const SpectrumMap& m);
};

void write_map_tensor(const std::string& path, const MapTensor& tensor);
MapTensor read_map_tensor(const std::string& path);

/// CRC-32 (IEEE 802.3) of a byte buffer.
std::uint32_t crc32(const void* data, std::size_t len);

/// CRC-32 of the payload bytes of a MapTensor, as recorded in dataset metadata.
std::uint32_t tensor_checksum(const MapTensor& tensor);

/// 8-bit grayscale heatmap; values are mapped linearly from [lo, hi] to 0..255
/// and clamped.
void write_pgm(const std::string& path, const SpectrumMap& map, double lo = 0.0, double hi = 1.0);

/// Whole-file helpers used by the CLI and model store.
void write_file_bytes(const std::string& path, const std::string& bytes);
std::string read_file_bytes(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace gsc
