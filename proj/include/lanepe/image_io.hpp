#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lanepe {

// Binary (P5) PGM, 8-bit. Row-major pixels, top row first.
void write_pgm(const std::string& path, int w, int h,
               const std::vector<std::uint8_t>& pixels);
std::vector<std::uint8_t> read_pgm(const std::string& path, int* w, int* h);

// [0, 1] -> [0, 255] with rounding and clamping
std::uint8_t quantize_unit(double v);

}  // namespace lanepe
