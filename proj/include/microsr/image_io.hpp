#pragma once

#include <string>

#include "microsr/image.hpp"

namespace microsr {

struct LoadedImage {
  Image image;
  int bit_depth = 8;  // 8 or 16
};

// Decodes a grayscale 8- or 16-bit PNG/TIFF and normalizes pixel values to
// [0,1] by the bit-depth maximum. Rejects multi-channel inputs.
LoadedImage load_grayscale(const std::string& path);

// Writes [0,1] pixels quantized to the requested bit depth. Format follows
// the file extension (.png or .tif/.tiff).
void save_grayscale(const std::string& path, const Image& img, int bit_depth = 8);

}  // namespace microsr
