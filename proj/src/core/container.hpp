#pragma once

#include <string>

#include "core/tensor.hpp"

namespace egs {

// Shared binary grid container. Header: 7-byte magic ("EGSPEC1" for
// spectrograms, "EGVEMB1" for precomputed video embeddings), then
// little-endian u32 rows, cols, sample_rate, window, hop and f32 scale_min,
// scale_max, followed by row-major float32 data. Round trips bit-exactly.
struct GridFile {
    std::string magic = "EGSPEC1";
    uint32_t rows = 0, cols = 0;
    uint32_t sample_rate = 0;
    uint32_t window = 0, hop = 0;
    float scale_min = 0.0f, scale_max = 0.0f;
    Tensor values;  // [rows, cols]
};

void write_grid(const std::string& path, const GridFile& g);
GridFile read_grid(const std::string& path, const std::string& expected_magic = "");

}  // namespace egs
