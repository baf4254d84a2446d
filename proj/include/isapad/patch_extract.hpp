#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "isapad/oct_core.hpp"

namespace isapad {

struct ExtractionConfig {
  int patch_size = 256;
  int z_stride = 256;  // m
  int x_stride = 64;   // n
  double foreground_threshold = 0.01;  // T, as a fraction of patch area
  int kernel_rows = 5;
  int kernel_cols = 5;
  /// Columns summed when locating the surface row; 0 means the full width.
  int sum_width = 0;

  int x_start() const noexcept { return patch_size / 2; }
};

/// Throws ConfigError.
void validate(const ExtractionConfig& cfg);

struct PatchSource {
  std::string sample_id;
  int y = -1;
};

/// A patch_size x patch_size crop of the original B-scan, centred at (x, z);
/// covers rows [z - h, z + h) and columns [x - h, x + h) with h = patch_size/2.
struct Patch {
  Image data;
  int x = 0;
  int z = 0;
  PatchSource source;
};

/// Grey-level dilation: maximum over a kernel_rows x kernel_cols window
/// centred on each pixel, with edge replication at the borders.
Image dilate(const Image& img, int kernel_rows = 5, int kernel_cols = 5);

/// Otsu threshold on the 256-level histogram (levels from `to_level`).
/// Foreground is `level > t`. Returns the smallest maximising t, or 255 when
/// no split has positive between-class variance. Empty image -> DomainError.
int otsu(const Image& img);

/// 0/1 image: level > threshold.
ByteImage binarize(const Image& img, int threshold);

struct SurfaceRow {
  int row = 0;
  bool no_foreground = false;
};

/// Row with the most foreground pixels among columns [0, sum_width); ties go
/// to the smallest row. `sum_width` <= 0 uses the full width.
SurfaceRow surface_row(const ByteImage& binary, int sum_width = 0);

/// Intermediate results of one extraction, exposed for inspection and tests.
struct ExtractionTrace {
  int threshold = 255;
  SurfaceRow surface;
  ByteImage binary;
};

/// Adaptive patch extraction: dilate, Otsu-binarise, find the surface row,
/// then scan the (z, x) grid keeping patches whose binary foreground count
/// exceeds patch_size^2 * T. Out-of-bounds candidates are skipped; output is
/// ordered by (z, x). Throws TooSmall when the B-scan is smaller than a patch.
std::vector<Patch> extract_patches(const BScan& bscan, const ExtractionConfig& cfg,
                                   const std::string& sample_id = {}, ExtractionTrace* trace = nullptr);

Image crop(const Image& img, int center_x, int center_z, int size);
ByteImage crop(const ByteImage& img, int center_x, int center_z, int size);

/// One record of a patch dataset (`index.jsonl`).
struct PatchRecord {
  std::string file;
  std::string sample_id;
  int y = 0;
  int x = 0;
  int z = 0;
  Label label = Label::Bonafide;
  /// Label-map PNG (values 0..3) for patches cut from volumes with masks.
  std::string mask_file;
};

std::string to_jsonl(const PatchRecord& record);
PatchRecord record_from_json(const std::string& line);

/// Writes `<dir>/<file>` PNGs and appends to `<dir>/index.jsonl`.
class PatchDatasetWriter {
 public:
  explicit PatchDatasetWriter(std::filesystem::path dir);

  void add(const Patch& patch, Label label, const ByteImage* mask_labels = nullptr);
  std::size_t count() const noexcept { return count_; }

 private:
  std::filesystem::path dir_;
  std::ofstream index_;
  std::size_t count_ = 0;
};

struct LoadedPatch {
  PatchRecord record;
  Image data;
  std::optional<ByteImage> mask;
};

std::vector<PatchRecord> read_patch_index(const std::filesystem::path& dir);
LoadedPatch load_patch(const std::filesystem::path& dir, const PatchRecord& record);
std::vector<LoadedPatch> load_patch_dataset(const std::filesystem::path& dir);

}  // namespace isapad
