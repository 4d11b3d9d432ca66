#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "chmp/types.hpp"

namespace chmp {

/// 8-bit grayscale PNG from values in [0,1] (clamped, rounded).
void write_gray_png(const std::string& path, const MatX& image);
MatX read_gray_png(const std::string& path);

/// 8-bit RGB PNG from an H*W*3 buffer of values in [0,1].
void write_rgb_png(const std::string& path, const std::vector<double>& rgb, int width,
                   int height);

/// Indexed PNG with an explicit palette (index 0 = background).
void write_indexed_png(const std::string& path, const std::vector<std::uint32_t>& indices,
                       int width, int height,
                       const std::vector<std::array<std::uint8_t, 3>>& palette);

/// Palette used for semantic map exports: entry 0 is black background,
/// entries 1..L are distinct part colors.
std::vector<std::array<std::uint8_t, 3>> semantic_palette(std::uint32_t num_parts);

/// Lossless float dump: "CHMPMAPS" magic, u32 channels/height/width, then
/// row-major f32 data (channel-major planes).
void write_maps_f32(const std::string& path, const std::vector<double>& data, int channels,
                    int height, int width);

struct MapsF32 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // widened back to f64
};

MapsF32 read_maps_f32(const std::string& path);

}  // namespace chmp
