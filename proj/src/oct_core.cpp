#include "isapad/oct_core.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "isapad/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace isapad {
namespace {

std::string slice_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "bscan_%04d.png", i);
  return buf;
}

std::string mask_name(int c, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "mask_%d_%04d.png", c, i);
  return buf;
}

fs::path raw_meta_path(const fs::path& path) { return fs::path(path.string() + ".meta.json"); }
fs::path raw_mask_path(const fs::path& path) { return fs::path(path.string() + ".mask"); }

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

struct RawHeader {
  int depth = 0, bscans = 0, width = 0;
};

void write_header(std::ostream& os, const char (&magic)[5], int z, int y, int x) {
  os.write(magic, 4);
  put_u32(os, static_cast<std::uint32_t>(z));
  put_u32(os, static_cast<std::uint32_t>(y));
  put_u32(os, static_cast<std::uint32_t>(x));
}

RawHeader read_header(std::istream& is, const char (&magic)[5], const fs::path& path) {
  std::array<char, 4> m{};
  is.read(m.data(), 4);
  if (!is || !std::equal(m.begin(), m.end(), magic)) {
    fail(ErrorCode::IoError, "bad magic in " + path.string());
  }
  RawHeader h;
  h.depth = static_cast<int>(get_u32(is));
  h.bscans = static_cast<int>(get_u32(is));
  h.width = static_cast<int>(get_u32(is));
  if (!is || h.depth <= 0 || h.bscans <= 0 || h.width <= 0) {
    fail(ErrorCode::ShapeMismatch, "invalid dimensions in " + path.string());
  }
  return h;
}

json read_json(const fs::path& path, ErrorCode code) {
  std::ifstream in(path);
  if (!in) fail(code, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(code, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SampleMeta read_meta(const fs::path& path) {
  const json j = read_json(path, ErrorCode::MetaError);
  try {
    return meta_from_json(j);
  } catch (const Error& e) {
    fail(ErrorCode::MetaError, path.string() + ": " + e.what());
  }
}

/// Count of consecutive slice files starting at index 0; reports the first gap.
int count_slices(const fs::path& dir) {
  int highest = -1;
  int count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    int index = -1;
    char tail[8] = {};
    if (std::sscanf(name.c_str(), "bscan_%d.%4s", &index, tail) == 2 && std::string(tail) == "png") {
      highest = std::max(highest, index);
      ++count;
    }
  }
  if (count == 0) fail(ErrorCode::MissingSlice, "no B-scans in " + dir.string());
  for (int i = 0; i <= highest; ++i) {
    if (!fs::exists(dir / slice_name(i))) {
      fail(ErrorCode::MissingSlice, "missing " + slice_name(i) + " in " + dir.string());
    }
  }
  return highest + 1;
}

}  // namespace

std::string to_string(Label label) { return label == Label::Bonafide ? "bonafide" : "pa"; }

Label parse_label(const std::string& text) {
  if (text == "bonafide") return Label::Bonafide;
  if (text == "pa") return Label::PA;
  fail(ErrorCode::SchemaError, "unknown label '" + text + "'");
}

namespace {

std::string to_string(PaCategory c) {
  switch (c) {
    case PaCategory::ExternalPatternSimulated: return "external";
    case PaCategory::StructureSimulated: return "structure";
    case PaCategory::None: return "none";
  }
  return "none";
}

PaCategory parse_category(const std::string& text) {
  if (text == "external") return PaCategory::ExternalPatternSimulated;
  if (text == "structure") return PaCategory::StructureSimulated;
  if (text == "none") return PaCategory::None;
  fail(ErrorCode::SchemaError, "unknown pa_category '" + text + "'");
}

}  // namespace

void validate(const SampleMeta& meta) {
  if (meta.sample_id.empty()) fail(ErrorCode::SchemaError, "empty sample_id");
  if (meta.label == Label::PA) {
    if (meta.material.empty()) fail(ErrorCode::SchemaError, meta.sample_id + ": PA entry without material");
    if (meta.pa_category == PaCategory::None) {
      fail(ErrorCode::SchemaError, meta.sample_id + ": PA entry without pa_category");
    }
  } else if (meta.pa_category != PaCategory::None) {
    fail(ErrorCode::SchemaError, meta.sample_id + ": bonafide entry with a PA category");
  }
}

json to_json(const SampleMeta& meta) {
  return json{{"sample_id", meta.sample_id},
              {"label", to_string(meta.label)},
              {"material", meta.material},
              {"pa_category", to_string(meta.pa_category)},
              {"subject_id", meta.subject_id}};
}

SampleMeta meta_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::SchemaError, "meta must be an object");
  SampleMeta meta;
  try {
    meta.sample_id = j.at("sample_id").get<std::string>();
    meta.label = parse_label(j.at("label").get<std::string>());
    meta.material = j.value("material", std::string{});
    meta.pa_category = parse_category(j.value("pa_category", std::string{"none"}));
    meta.subject_id = j.value("subject_id", std::string{});
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, e.what());
  }
  validate(meta);
  return meta;
}

OctVolume::OctVolume(int depth, int bscans, int width, SampleMeta meta)
    : OctVolume(depth, bscans, width,
                std::vector<float>(static_cast<std::size_t>(std::max(depth, 0)) * std::max(bscans, 0) *
                                   std::max(width, 0)),
                std::move(meta)) {}

OctVolume::OctVolume(int depth, int bscans, int width, std::vector<float> voxels, SampleMeta meta)
    : depth_(depth), bscans_(bscans), width_(width), voxels_(std::move(voxels)), meta_(std::move(meta)) {
  if (depth <= 0 || bscans <= 0 || width <= 0) fail(ErrorCode::ShapeMismatch, "volume dimensions must be positive");
  if (voxels_.size() != static_cast<std::size_t>(depth) * bscans * width) {
    fail(ErrorCode::ShapeMismatch, "voxel count does not match dimensions");
  }
  for (float v : voxels_) {
    if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorCode::DomainError, "voxel outside [0,1]");
  }
}

void OctVolume::set_bscan(int y, const Image& slice) {
  if (y < 0 || y >= bscans_) fail(ErrorCode::IndexError, "B-scan index out of range");
  if (slice.rows() != depth_ || slice.cols() != width_) fail(ErrorCode::ShapeMismatch, "B-scan shape mismatch");
  for (int z = 0; z < depth_; ++z) {
    auto src = slice.row(z);
    std::copy(src.begin(), src.end(), voxels_.begin() + static_cast<std::ptrdiff_t>(index(z, y, 0)));
  }
}

BScan get_bscan(const OctVolume& volume, int y) {
  if (y < 0 || y >= volume.bscans()) {
    fail(ErrorCode::IndexError,
         "B-scan index " + std::to_string(y) + " outside [0, " + std::to_string(volume.bscans()) + ")");
  }
  Image img(volume.depth(), volume.width());
  for (int z = 0; z < volume.depth(); ++z) {
    auto row = img.row(z);
    for (int x = 0; x < volume.width(); ++x) row[x] = volume.at(z, y, x);
  }
  return {std::move(img), y};
}

ByteImage MaskVolume::slice(int y) const {
  ByteImage out(depth_, width_);
  for (int z = 0; z < depth_; ++z)
    for (int x = 0; x < width_; ++x) out(z, x) = labels_[index(z, y, x)];
  return out;
}

VolumeFormat detect_format(const fs::path& path) {
  return fs::is_directory(path) ? VolumeFormat::PngStack : VolumeFormat::RawBinary;
}

OctVolume load_volume(const fs::path& path, VolumeFormat format) {
  if (!fs::exists(path)) fail(ErrorCode::IoError, "no such volume: " + path.string());
  if (format == VolumeFormat::PngStack) {
    const int bscans = count_slices(path);
    const SampleMeta meta = read_meta(path / "meta.json");
    int depth = 0, width = 0;
    std::vector<float> voxels;
    for (int y = 0; y < bscans; ++y) {
      const ByteImage slice = png::read_gray(path / slice_name(y));
      if (y == 0) {
        depth = slice.rows();
        width = slice.cols();
        voxels.resize(static_cast<std::size_t>(depth) * bscans * width);
      } else if (slice.rows() != depth || slice.cols() != width) {
        fail(ErrorCode::ShapeMismatch, slice_name(y) + " differs in size from bscan_0000.png");
      }
      for (int z = 0; z < depth; ++z)
        for (int x = 0; x < width; ++x)
          voxels[(static_cast<std::size_t>(z) * bscans + y) * width + x] = from_byte(slice(z, x));
    }
    return OctVolume(depth, bscans, width, std::move(voxels), meta);
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  const RawHeader h = read_header(in, "OCTV", path);
  const std::size_t n = static_cast<std::size_t>(h.depth) * h.bscans * h.width;
  std::vector<std::uint8_t> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) fail(ErrorCode::ShapeMismatch, "truncated " + path.string());
  std::vector<float> voxels(n);
  std::transform(bytes.begin(), bytes.end(), voxels.begin(), from_byte);
  return OctVolume(h.depth, h.bscans, h.width, std::move(voxels), read_meta(raw_meta_path(path)));
}

void save_volume(const OctVolume& volume, const fs::path& path, VolumeFormat format) {
  validate(volume.meta());
  if (format == VolumeFormat::PngStack) {
    fs::create_directories(path);
    for (int y = 0; y < volume.bscans(); ++y) {
      png::write_gray(path / slice_name(y), png::quantize(get_bscan(volume, y).data));
    }
    write_json(path / "meta.json", to_json(volume.meta()));
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  write_header(out, "OCTV", volume.depth(), volume.bscans(), volume.width());
  std::vector<std::uint8_t> bytes(volume.voxels().size());
  std::transform(volume.voxels().begin(), volume.voxels().end(), bytes.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  write_json(raw_meta_path(path), to_json(volume.meta()));
}

void save_mask(const MaskVolume& mask, const fs::path& path, VolumeFormat format) {
  if (format == VolumeFormat::PngStack) {
    fs::create_directories(path);
    for (int y = 0; y < mask.bscans(); ++y) {
      const ByteImage labels = mask.slice(y);
      for (int c = 0; c < kTissueClasses; ++c) {
        ByteImage ch(labels.rows(), labels.cols());
        auto src = labels.values();
        auto dst = ch.values();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == c ? 255 : 0;
        png::write_gray(path / mask_name(c, y), ch);
      }
    }
    return;
  }
  const fs::path file = raw_mask_path(path);
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  write_header(out, "OCTM", mask.depth(), mask.bscans(), mask.width());
  std::vector<std::uint8_t> bytes(mask.labels().size());
  for (int c = 0; c < kTissueClasses; ++c) {
    std::transform(mask.labels().begin(), mask.labels().end(), bytes.begin(),
                   [c](std::uint8_t l) -> std::uint8_t { return l == c ? 255 : 0; });
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
}

bool has_mask(const fs::path& path, VolumeFormat format) {
  return format == VolumeFormat::PngStack ? fs::exists(path / mask_name(0, 0)) : fs::exists(raw_mask_path(path));
}

MaskVolume load_mask(const fs::path& path, VolumeFormat format) {
  auto assign = [](MaskVolume& mask, int z, int y, int x, const std::array<bool, kTissueClasses>& on) {
    int hot = -1;
    for (int c = 0; c < kTissueClasses; ++c) {
      if (!on[c]) continue;
      if (hot >= 0) fail(ErrorCode::LabelError, "mask is not one-hot");
      hot = c;
    }
    if (hot < 0) fail(ErrorCode::LabelError, "mask voxel without any class");
    mask.set(z, y, x, static_cast<Tissue>(hot));
  };

  if (format == VolumeFormat::PngStack) {
    const int bscans = count_slices(path);
    MaskVolume mask;
    for (int y = 0; y < bscans; ++y) {
      std::array<ByteImage, kTissueClasses> ch;
      for (int c = 0; c < kTissueClasses; ++c) {
        const fs::path file = path / mask_name(c, y);
        if (!fs::exists(file)) fail(ErrorCode::MissingSlice, "missing " + file.string());
        ch[c] = png::read_gray(file);
      }
      if (y == 0) mask = MaskVolume(ch[0].rows(), bscans, ch[0].cols());
      for (const auto& img : ch) {
        if (img.rows() != mask.depth() || img.cols() != mask.width()) {
          fail(ErrorCode::ShapeMismatch, "mask slice size mismatch at " + std::to_string(y));
        }
      }
      for (int z = 0; z < mask.depth(); ++z)
        for (int x = 0; x < mask.width(); ++x)
          assign(mask, z, y, x, {ch[0](z, x) > 127, ch[1](z, x) > 127, ch[2](z, x) > 127, ch[3](z, x) > 127});
    }
    return mask;
  }

  const fs::path file = raw_mask_path(path);
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + file.string());
  const RawHeader h = read_header(in, "OCTM", file);
  const std::size_t n = static_cast<std::size_t>(h.depth) * h.bscans * h.width;
  std::vector<std::uint8_t> bytes(n * kTissueClasses);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) fail(ErrorCode::ShapeMismatch, "truncated " + file.string());
  MaskVolume mask(h.depth, h.bscans, h.width);
  std::size_t i = 0;
  for (int z = 0; z < h.depth; ++z)
    for (int y = 0; y < h.bscans; ++y)
      for (int x = 0; x < h.width; ++x, ++i)
        assign(mask, z, y, x, {bytes[i] > 127, bytes[n + i] > 127, bytes[2 * n + i] > 127, bytes[3 * n + i] > 127});
  return mask;
}

void validate(const Manifest& manifest) {
  std::set<std::string> seen;
  for (const auto& e : manifest.entries) {
    validate(e.meta);
    if (!seen.insert(e.meta.sample_id).second) {
      fail(ErrorCode::DuplicateId, "duplicate sample_id '" + e.meta.sample_id + "'");
    }
  }
}

Manifest load_manifest(const fs::path& path) {
  const json j = read_json(path, ErrorCode::SchemaError);
  if (!j.is_array()) fail(ErrorCode::SchemaError, "manifest must be a JSON array");
  const fs::path base = path.parent_path();
  Manifest manifest;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("path") || !item.contains("meta")) {
      fail(ErrorCode::SchemaError, "manifest entry needs 'path' and 'meta'");
    }
    fs::path p = item.at("path").get<std::string>();
    if (p.is_relative()) p = base / p;
    manifest.entries.push_back({p.lexically_normal(), meta_from_json(item.at("meta"))});
  }
  validate(manifest);
  for (const auto& e : manifest.entries) {
    if (!fs::exists(e.path)) fail(ErrorCode::IoError, "manifest path not found: " + e.path.string());
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  validate(manifest);
  const fs::path base = fs::absolute(path).parent_path().lexically_normal();
  json j = json::array();
  for (const auto& e : manifest.entries) {
    fs::path p = fs::absolute(e.path).lexically_normal();
    const fs::path rel = p.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") p = rel;
    j.push_back({{"path", p.generic_string()}, {"meta", to_json(e.meta)}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_json(path, j);
}

}  // namespace isapad
