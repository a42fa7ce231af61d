#pragma once

// On-disk container for single 2-D images with their pixel spacing.
//
// Layout (little-endian throughout):
//   "TXIM" | u32 version=1 | u32 height | u32 width |
//   f32 dy_mm | f32 dx_mm | u8 element size (4 or 8) |
//   height*width pixel values, row-major, f32 or f64 per the tag.
//
// Pixels are offset-HU (air = 0, water = 1000). The loader always widens
// to double; files written with element size 8 round-trip bitwise. Spacing
// is stored in single precision, so spacing read from a file re-writes
// exactly, while arbitrary doubles are rounded once on the first write.

#include <string>

#include "tmgan/tensor.hpp"

namespace tmgan {

struct ImageData {
    Tensor pixels;  // [H,W]
    double dy_mm = 0.78;
    double dx_mm = 0.78;
};

// Writes via a temp file + rename so a crash never leaves a torn image.
void write_image(const std::string& path, const ImageData& img, int element_size = 8);

// Rejects bad magic, unknown version or element size, non-positive
// dimensions or spacing, truncated payloads, and trailing junk.
ImageData read_image(const std::string& path);

// Element width recorded in the header (4 or 8), without reading the pixels.
int image_element_size(const std::string& path);

}  // namespace tmgan
