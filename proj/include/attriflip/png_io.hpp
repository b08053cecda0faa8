#pragma once

#include <string>

#include "attriflip/image.hpp"

namespace attriflip {

// Lossless PNG I/O for 8-bit grayscale and RGB images (libpng underneath).
void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

}  // namespace attriflip
