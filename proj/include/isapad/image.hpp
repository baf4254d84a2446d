#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "isapad/error.hpp"

namespace isapad {

/// Dense row-major 2D array. Used for B-scans, patches, binary masks and
/// heatmaps; intensity images hold values in [0,1].
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}
  Grid(int rows, int cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != checked_size(rows, cols)) {
      fail(ErrorCode::ShapeMismatch, "grid data size does not match dimensions");
    }
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int r, int c) noexcept { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const noexcept {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  std::span<T> row(int r) noexcept {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<const T> row(int r) const noexcept {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  static std::size_t checked_size(int rows, int cols) {
    if (rows < 0 || cols < 0) fail(ErrorCode::ShapeMismatch, "negative grid dimension");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Grid<float>;
using ByteImage = Grid<std::uint8_t>;

/// 8-bit level of an intensity in [0,1]: floor(v * 255), clamped. The small
/// epsilon makes k/255 round-trip to k despite float representation error.
inline int to_level(float v) noexcept {
  const double scaled = static_cast<double>(v) * 255.0 + 1e-4;
  if (scaled <= 0.0) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<int>(scaled);
}

/// Nearest 8-bit level, used when writing intensities to disk.
inline std::uint8_t to_byte(float v) noexcept {
  const double scaled = static_cast<double>(v) * 255.0 + 0.5;
  if (scaled <= 0.0) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

inline float from_byte(std::uint8_t b) noexcept { return static_cast<float>(b) / 255.0f; }

}  // namespace isapad
