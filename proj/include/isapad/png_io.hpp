#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "isapad/image.hpp"

namespace isapad::png {

ByteImage read_gray(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const ByteImage& image);

/// Interleaved 8-bit RGB, `rows * cols * 3` bytes.
struct RgbImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;
};

void write_rgb(const std::filesystem::path& path, const RgbImage& image);

ByteImage quantize(const Image& image);
Image dequantize(const ByteImage& image);

}  // namespace isapad::png
