#include "isapad/patch_extract.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "isapad/png_io.hpp"

namespace fs = std::filesystem;

namespace isapad {
namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

/// 192-bit product of a 128-bit and a 64-bit unsigned value, as three limbs
/// (most significant first) so products can be compared exactly.
std::array<u64, 3> mul_192(u128 a, u64 b) {
  const u128 lo = static_cast<u128>(static_cast<u64>(a)) * b;
  const u128 mid = static_cast<u128>(static_cast<u64>(a >> 64)) * b;
  const u128 t = (lo >> 64) + static_cast<u64>(mid);
  return {static_cast<u64>(mid >> 64) + static_cast<u64>(t >> 64), static_cast<u64>(t), static_cast<u64>(lo)};
}

/// Sliding max along one axis with edge replication.
Image max_filter_rows(const Image& img, int radius) {
  Image out(img.rows(), img.cols());
  for (int r = 0; r < img.rows(); ++r) {
    auto src = img.row(r);
    auto dst = out.row(r);
    const int n = img.cols();
    for (int c = 0; c < n; ++c) {
      float m = src[c];
      for (int d = -radius; d <= radius; ++d) m = std::max(m, src[std::clamp(c + d, 0, n - 1)]);
      dst[c] = m;
    }
  }
  return out;
}

Image max_filter_cols(const Image& img, int radius) {
  Image out(img.rows(), img.cols());
  const int n = img.rows();
  for (int r = 0; r < n; ++r) {
    auto dst = out.row(r);
    std::copy(img.row(r).begin(), img.row(r).end(), dst.begin());
    for (int d = -radius; d <= radius; ++d) {
      auto src = img.row(std::clamp(r + d, 0, n - 1));
      for (int c = 0; c < img.cols(); ++c) dst[c] = std::max(dst[c], src[c]);
    }
  }
  return out;
}

std::string patch_stem(const std::string& sample_id, int y, int z, int x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_y%04d_z%04d_x%04d", y, z, x);
  return (sample_id.empty() ? std::string("patch") : sample_id) + buf;
}

template <typename T>
Grid<T> crop_grid(const Grid<T>& img, int cx, int cz, int size) {
  const int h = size / 2;
  if (cz - h < 0 || cx - h < 0 || cz + h > img.rows() || cx + h > img.cols()) {
    fail(ErrorCode::IndexError, "crop exceeds image bounds");
  }
  Grid<T> out(size, size);
  for (int r = 0; r < size; ++r) {
    auto src = img.row(cz - h + r).subspan(static_cast<std::size_t>(cx - h), static_cast<std::size_t>(size));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

void validate(const ExtractionConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::ConfigError, std::string("extraction config: ") + what);
  };
  require(cfg.patch_size > 0 && cfg.patch_size % 2 == 0, "patch_size must be positive and even");
  require(cfg.z_stride >= 1 && cfg.x_stride >= 1, "strides must be >= 1");
  require(cfg.foreground_threshold > 0.0 && cfg.foreground_threshold < 1.0, "T must be in (0,1)");
  require(cfg.kernel_rows >= 1 && cfg.kernel_cols >= 1 && cfg.kernel_rows % 2 == 1 && cfg.kernel_cols % 2 == 1,
          "kernel must be an odd-sided rectangle");
}

Image dilate(const Image& img, int kernel_rows, int kernel_cols) {
  if (kernel_rows < 1 || kernel_cols < 1 || kernel_rows % 2 == 0 || kernel_cols % 2 == 0) {
    fail(ErrorCode::DomainError, "dilation kernel must be an odd-sided rectangle");
  }
  if (img.empty()) return img;
  return max_filter_cols(max_filter_rows(img, kernel_cols / 2), kernel_rows / 2);
}

int otsu(const Image& img) {
  if (img.empty()) fail(ErrorCode::DomainError, "otsu on an empty image");
  if (img.size() >= (std::size_t{1} << 24)) fail(ErrorCode::DomainError, "otsu image too large");
  std::array<u64, 256> hist{};
  for (float v : img.values()) ++hist[to_level(v)];

  const std::int64_t total = static_cast<std::int64_t>(img.size());
  std::int64_t level_sum = 0;
  for (int l = 0; l < 256; ++l) level_sum += static_cast<std::int64_t>(hist[l]) * l;

  // Between-class variance is proportional to (N*s0 - w0*S)^2 / (w0*(N-w0));
  // candidates are compared by cross-multiplication so ties are exact.
  int best = 255;
  u128 best_num = 0;
  u64 best_den = 1;
  std::int64_t w0 = 0, s0 = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += static_cast<std::int64_t>(hist[t]);
    s0 += static_cast<std::int64_t>(hist[t]) * t;
    const std::int64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const std::int64_t p = total * s0 - w0 * level_sum;
    const u128 ap = static_cast<u128>(p < 0 ? -p : p);
    const u128 num = ap * ap;
    const u64 den = static_cast<u64>(w0) * static_cast<u64>(w1);
    if (num == 0) continue;
    if (mul_192(num, best_den) > mul_192(best_num, den)) {
      best = t;
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

ByteImage binarize(const Image& img, int threshold) {
  ByteImage out(img.rows(), img.cols());
  auto src = img.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = to_level(src[i]) > threshold ? 1 : 0;
  return out;
}

SurfaceRow surface_row(const ByteImage& binary, int sum_width) {
  const int width = sum_width <= 0 ? binary.cols() : std::min(sum_width, binary.cols());
  SurfaceRow best{0, true};
  long best_count = 0;
  for (int r = 0; r < binary.rows(); ++r) {
    long count = 0;
    for (int c = 0; c < width; ++c) count += binary(r, c) != 0;
    if (count > best_count) {
      best_count = count;
      best.row = r;
    }
  }
  best.no_foreground = best_count == 0;
  return best;
}

Image crop(const Image& img, int center_x, int center_z, int size) { return crop_grid(img, center_x, center_z, size); }
ByteImage crop(const ByteImage& img, int center_x, int center_z, int size) {
  return crop_grid(img, center_x, center_z, size);
}

std::vector<Patch> extract_patches(const BScan& bscan, const ExtractionConfig& cfg, const std::string& sample_id,
                                   ExtractionTrace* trace) {
  validate(cfg);
  const Image& src = bscan.data;
  if (src.rows() < cfg.patch_size || src.cols() < cfg.patch_size) {
    fail(ErrorCode::TooSmall, "B-scan smaller than the patch size");
  }
  const Image dilated = dilate(src, cfg.kernel_rows, cfg.kernel_cols);
  const int threshold = otsu(dilated);
  ByteImage binary = binarize(dilated, threshold);
  const SurfaceRow surface = surface_row(binary, cfg.sum_width);

  std::vector<Patch> patches;
  if (!surface.no_foreground) {
    // Summed-area table over the binary image for O(1) window counts.
    const int rows = binary.rows(), cols = binary.cols();
    std::vector<long> sat(static_cast<std::size_t>(rows + 1) * (cols + 1), 0);
    auto at = [&](int r, int c) -> long& { return sat[static_cast<std::size_t>(r) * (cols + 1) + c]; };
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) at(r + 1, c + 1) = binary(r, c) + at(r, c + 1) + at(r + 1, c) - at(r, c);

    const int h = cfg.patch_size / 2;
    const double min_count = static_cast<double>(cfg.patch_size) * cfg.patch_size * cfg.foreground_threshold;
    for (int z = surface.row; z <= rows; z += cfg.z_stride) {
      if (z - h < 0 || z + h > rows) continue;
      for (int x = cfg.x_start(); x <= cols; x += cfg.x_stride) {
        if (x - h < 0 || x + h > cols) continue;
        const long count = at(z + h, x + h) - at(z - h, x + h) - at(z + h, x - h) + at(z - h, x - h);
        if (static_cast<double>(count) > min_count) {
          patches.push_back({crop(src, x, z, cfg.patch_size), x, z, {sample_id, bscan.source_y.value_or(-1)}});
        }
      }
    }
  }
  if (trace) *trace = {threshold, surface, std::move(binary)};
  return patches;
}

std::string to_jsonl(const PatchRecord& r) {
  nlohmann::json j{{"file", r.file}, {"sample_id", r.sample_id}, {"y", r.y},
                   {"x", r.x},       {"z", r.z},                 {"label", to_string(r.label)}};
  if (!r.mask_file.empty()) j["mask"] = r.mask_file;
  return j.dump();
}

PatchRecord record_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    PatchRecord r;
    r.file = j.at("file").get<std::string>();
    r.sample_id = j.at("sample_id").get<std::string>();
    r.y = j.at("y").get<int>();
    r.x = j.at("x").get<int>();
    r.z = j.at("z").get<int>();
    r.label = parse_label(j.at("label").get<std::string>());
    r.mask_file = j.value("mask", std::string{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("index.jsonl: ") + e.what());
  }
}

PatchDatasetWriter::PatchDatasetWriter(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  index_.open(dir_ / "index.jsonl", std::ios::app);
  if (!index_) fail(ErrorCode::IoError, "cannot open " + (dir_ / "index.jsonl").string());
}

void PatchDatasetWriter::add(const Patch& patch, Label label, const ByteImage* mask_labels) {
  PatchRecord r;
  const std::string stem = patch_stem(patch.source.sample_id, patch.source.y, patch.z, patch.x);
  r.file = stem + ".png";
  r.sample_id = patch.source.sample_id;
  r.y = patch.source.y;
  r.x = patch.x;
  r.z = patch.z;
  r.label = label;
  png::write_gray(dir_ / r.file, png::quantize(patch.data));
  if (mask_labels) {
    r.mask_file = stem + "_mask.png";
    png::write_gray(dir_ / r.mask_file, *mask_labels);
  }
  index_ << to_jsonl(r) << '\n';
  index_.flush();
  ++count_;
}

std::vector<PatchRecord> read_patch_index(const fs::path& dir) {
  std::ifstream in(dir / "index.jsonl");
  if (!in) fail(ErrorCode::IoError, "no index.jsonl in " + dir.string());
  std::vector<PatchRecord> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(record_from_json(line));
  }
  return out;
}

LoadedPatch load_patch(const fs::path& dir, const PatchRecord& record) {
  LoadedPatch p{record, png::dequantize(png::read_gray(dir / record.file)), std::nullopt};
  if (!record.mask_file.empty()) {
    ByteImage m = png::read_gray(dir / record.mask_file);
    for (auto v : m.values()) {
      if (v >= kTissueClasses) fail(ErrorCode::LabelError, record.mask_file + " holds a label outside 0..3");
    }
    p.mask = std::move(m);
  }
  return p;
}

std::vector<LoadedPatch> load_patch_dataset(const fs::path& dir) {
  std::vector<LoadedPatch> out;
  for (const auto& record : read_patch_index(dir)) out.push_back(load_patch(dir, record));
  return out;
}

}  // namespace isapad
