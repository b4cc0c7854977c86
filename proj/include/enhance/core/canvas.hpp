#pragma once

#include <cstdint>
#include <vector>

#include "enhance/core/error.hpp"

namespace enhance {

// Fixed reference pixel grid. Pixel index is row-major: row * width + column.
struct Canvas {
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  Canvas() = default;
  Canvas(std::uint32_t w, std::uint32_t h) : width(w), height(h) {
    if (w < 1 || h < 1) raise(ErrorCode::InvalidValue, "canvas dimensions must be >= 1");
  }

  std::size_t pixel_count() const { return std::size_t(width) * height; }
  std::size_t index(std::uint32_t x, std::uint32_t y) const { return std::size_t(y) * width + x; }

  bool operator==(const Canvas& o) const { return width == o.width && height == o.height; }
  bool operator!=(const Canvas& o) const { return !(*this == o); }
};

// Dense 2-D grid of real pixel values, row-major.
struct Grid {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::uint32_t w, std::uint32_t h, double fill = 0.0)
      : width(w), height(h), values(std::size_t(w) * h, fill) {}

  std::size_t pixel_count() const { return values.size(); }
  double& at(std::uint32_t x, std::uint32_t y) { return values[std::size_t(y) * width + x]; }
  double at(std::uint32_t x, std::uint32_t y) const { return values[std::size_t(y) * width + x]; }
  Canvas canvas() const { return Canvas(width, height); }
};

// Registered data image on a canvas: values plus footprint mask and optional
// per-pixel weights (empty weights mean unit weight inside the mask).
struct ObservedImage {
  Canvas canvas;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  std::vector<double> weights;

  std::size_t masked_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += (m != 0);
    return n;
  }
};

}  // namespace enhance
