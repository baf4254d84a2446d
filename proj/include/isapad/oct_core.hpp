#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isapad/image.hpp"

namespace isapad {

enum class Label { Bonafide, PA };
enum class PaCategory { None, ExternalPatternSimulated, StructureSimulated };

/// Class index used by the classifier head: 0 = PA, 1 = Bonafide.
constexpr int class_index(Label label) noexcept { return label == Label::Bonafide ? 1 : 0; }

struct SampleMeta {
  std::string sample_id;
  Label label = Label::Bonafide;
  std::string material;
  PaCategory pa_category = PaCategory::None;
  std::string subject_id;

  bool operator==(const SampleMeta&) const = default;
};

/// Throws SchemaError when label/material/category disagree.
void validate(const SampleMeta& meta);

std::string to_string(Label label);
Label parse_label(const std::string& text);

nlohmann::json to_json(const SampleMeta& meta);
SampleMeta meta_from_json(const nlohmann::json& j);

/// One B-scan: Z rows (depth) by X columns (lateral).
struct BScan {
  Image data;
  std::optional<int> source_y;
};

/// Intensity volume with (Z, Y, X) axes, stored row-major in (z, y, x) order.
class OctVolume {
 public:
  OctVolume() = default;
  OctVolume(int depth, int bscans, int width, SampleMeta meta = {});
  OctVolume(int depth, int bscans, int width, std::vector<float> voxels, SampleMeta meta = {});

  int depth() const noexcept { return depth_; }    // Z
  int bscans() const noexcept { return bscans_; }  // Y
  int width() const noexcept { return width_; }    // X

  float& at(int z, int y, int x) noexcept { return voxels_[index(z, y, x)]; }
  float at(int z, int y, int x) const noexcept { return voxels_[index(z, y, x)]; }

  const std::vector<float>& voxels() const noexcept { return voxels_; }
  const SampleMeta& meta() const noexcept { return meta_; }
  void set_meta(SampleMeta meta) { meta_ = std::move(meta); }

  /// Writes the y-th Z x X slice into the volume.
  void set_bscan(int y, const Image& slice);

  bool operator==(const OctVolume&) const = default;

 private:
  std::size_t index(int z, int y, int x) const noexcept {
    return (static_cast<std::size_t>(z) * bscans_ + y) * width_ + x;
  }

  int depth_ = 0;
  int bscans_ = 0;
  int width_ = 0;
  std::vector<float> voxels_;
  SampleMeta meta_;
};

/// Returns a copy of slice y; the volume is never aliased.
BScan get_bscan(const OctVolume& volume, int y);

/// Per-voxel tissue class, one-hot by construction.
enum class Tissue : std::uint8_t { Background = 0, StratumCorneum = 1, ViableEpidermis = 2, SweatGland = 3 };
constexpr int kTissueClasses = 4;

class MaskVolume {
 public:
  MaskVolume() = default;
  MaskVolume(int depth, int bscans, int width)
      : depth_(depth), bscans_(bscans), width_(width),
        labels_(static_cast<std::size_t>(depth) * bscans * width, 0) {}

  int depth() const noexcept { return depth_; }
  int bscans() const noexcept { return bscans_; }
  int width() const noexcept { return width_; }

  Tissue at(int z, int y, int x) const noexcept { return static_cast<Tissue>(labels_[index(z, y, x)]); }
  void set(int z, int y, int x, Tissue t) noexcept { labels_[index(z, y, x)] = static_cast<std::uint8_t>(t); }

  /// 0/1 value of `channel` at a voxel.
  std::uint8_t channel(int c, int z, int y, int x) const noexcept {
    return labels_[index(z, y, x)] == c ? 1 : 0;
  }

  /// Z x X label map of slice y (values 0..3).
  ByteImage slice(int y) const;

  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }
  bool operator==(const MaskVolume&) const = default;

 private:
  std::size_t index(int z, int y, int x) const noexcept {
    return (static_cast<std::size_t>(z) * bscans_ + y) * width_ + x;
  }

  int depth_ = 0;
  int bscans_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
};

enum class VolumeFormat { PngStack, RawBinary };

/// PngStack: `path` is a directory holding bscan_{i:04}.png and meta.json.
/// RawBinary: `path` is a file ("OCTV" header then Z*Y*X bytes) with its
/// metadata in a sibling `<path>.meta.json`.
OctVolume load_volume(const std::filesystem::path& path, VolumeFormat format);
void save_volume(const OctVolume& volume, const std::filesystem::path& path, VolumeFormat format);

/// Picks PngStack for directories, RawBinary for regular files.
VolumeFormat detect_format(const std::filesystem::path& path);

/// PngStack masks live next to the B-scans as mask_{c}_{i:04}.png (0/255);
/// RawBinary masks are `<path>.mask` with an "OCTM" header and channel-major
/// 0/255 bytes.
void save_mask(const MaskVolume& mask, const std::filesystem::path& path, VolumeFormat format);
MaskVolume load_mask(const std::filesystem::path& path, VolumeFormat format);
bool has_mask(const std::filesystem::path& path, VolumeFormat format);

struct ManifestEntry {
  std::filesystem::path path;
  SampleMeta meta;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  bool operator==(const Manifest&) const = default;
};

/// Relative entry paths are resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);
/// Paths inside the manifest directory are written relative to it.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
/// Throws DuplicateId / SchemaError.
void validate(const Manifest& manifest);

}  // namespace isapad
