#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enhance/core/canvas.hpp"

namespace enhance::pipeline {

// Decoded raster: one grid (grayscale) or three (RGB), equal dimensions.
// 8- and 16-bit sample values pass through unscaled; ranks are scale-free.
struct DecodedImage {
  std::vector<Grid> channels;
  int bit_depth = 8;

  bool is_color() const { return channels.size() == 3; }
  std::uint32_t width() const { return channels.empty() ? 0 : channels[0].width; }
  std::uint32_t height() const { return channels.empty() ? 0 : channels[0].height; }
};

// PNG (8/16-bit grayscale or RGB, non-interlaced) and PGM/PPM (P2/P3 ASCII,
// P5/P6 binary). Throws DecodeError on anything else.
DecodedImage decode_image(const std::string& path);

// Format picked by extension: .png, .pgm (grayscale), .ppm (color).
// Values are clamped to [0, 2^bit_depth) and rounded.
void encode_image(const DecodedImage& image, const std::string& path);

// Grayscale convenience writer.
void write_gray(const Grid& grid, int bit_depth, const std::string& path);

// Collapse to a single grid; color images average the three channels.
Grid to_luminance(const DecodedImage& image);

}  // namespace enhance::pipeline
