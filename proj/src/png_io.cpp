#include "isapad/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>

namespace isapad::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
  return f;
}

void write_rows(const std::filesystem::path& path, int rows, int cols, int color_type,
                int channels, const std::uint8_t* data) {
  auto f = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "cannot encode " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(cols) * channels;
  for (int r = 0; r < rows; ++r) {
    png_write_row(png, const_cast<png_bytep>(data + r * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ByteImage read_gray(const std::filesystem::path& path) {
  auto f = open(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::IoError, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::IoError, "cannot decode " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int cols = static_cast<int>(png_get_image_width(png, info));
  const int rows = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);

  ByteImage out(rows, cols);
  for (int r = 0; r < rows; ++r) png_read_row(png, out.row(r).data(), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_gray(const std::filesystem::path& path, const ByteImage& image) {
  write_rows(path, image.rows(), image.cols(), PNG_COLOR_TYPE_GRAY, 1, image.values().data());
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
  if (image.data.size() != static_cast<std::size_t>(image.rows) * image.cols * 3) {
    fail(ErrorCode::ShapeMismatch, "rgb buffer size does not match dimensions");
  }
  write_rows(path, image.rows, image.cols, PNG_COLOR_TYPE_RGB, 3, image.data.data());
}

ByteImage quantize(const Image& image) {
  ByteImage out(image.rows(), image.cols());
  auto src = image.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = to_byte(src[i]);
  return out;
}

Image dequantize(const ByteImage& image) {
  Image out(image.rows(), image.cols());
  auto src = image.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = from_byte(src[i]);
  return out;
}

}  // namespace isapad::png
