#include "isapad/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace isapad::phantom {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Relative brightness of each structure above the background level.
constexpr double kStratumCorneum = 1.0;
constexpr double kGland = 0.9;
constexpr double kViableEpidermis = 0.55;
constexpr double kDermis = 0.12;
constexpr double kGapTissue = 0.1;
constexpr double kSlab = 0.8;
constexpr double kDoubleBand = 0.85;

constexpr int kFilmThickness = 4;
constexpr int kFilmGap = 3;
constexpr int kDoubleBandThickness = 8;
constexpr int kDoubleBandSpacing = 30;

/// Smooth fingertip surface: three lateral and two elevational sinusoids with
/// seeded phases, bounded by the configured amplitude.
class Surface {
 public:
  explicit Surface(const PhantomConfig& cfg) : cfg_(cfg) {
    std::mt19937_64 rng(splitmix64(cfg.seed));
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    for (auto& p : phases_) p = phase(rng);
  }

  int row(int x, int y) const {
    const double u = static_cast<double>(x) / cfg_.width;
    const double v = static_cast<double>(y) / std::max(cfg_.bscans, 1);
    const double s = 0.35 * std::sin(kTwoPi * 1.3 * u + phases_[0]) +
                     0.2 * std::sin(kTwoPi * 2.7 * u + phases_[1]) +
                     0.1 * std::sin(kTwoPi * 4.1 * u + phases_[2]) +
                     0.25 * std::sin(kTwoPi * 0.7 * v + phases_[3]) +
                     0.1 * std::sin(kTwoPi * 1.6 * v + phases_[4]);
    return static_cast<int>(std::lround(cfg_.surface_depth_mean + cfg_.surface_amplitude * s));
  }

 private:
  const PhantomConfig& cfg_;
  std::array<double, 5> phases_{};
};

struct Gland {
  double x, z;
};

/// Noiseless rendering of one B-scan: intensity above background (before
/// attenuation) and tissue label per pixel.
struct Layout {
  Image relief;
  ByteImage labels;
};

void paint_band(Layout& out, int x, int top, int thickness, double level, Tissue tissue) {
  for (int z = std::max(top, 0); z < std::min(top + thickness, out.relief.rows()); ++z) {
    out.relief(z, x) = static_cast<float>(level);
    out.labels(z, x) = static_cast<std::uint8_t>(tissue);
  }
}

Layout bonafide_layout(const PhantomConfig& cfg, const Surface& surface, int y, std::mt19937_64& rng) {
  Layout out{Image(cfg.depth, cfg.width), ByteImage(cfg.depth, cfg.width)};
  const int sc = cfg.stratum_corneum_thickness;
  const int gap = cfg.epidermis_gap;
  const int ve = cfg.viable_epidermis_thickness;
  for (int x = 0; x < cfg.width; ++x) {
    const int s = surface.row(x, y);
    paint_band(out, x, s, sc, kStratumCorneum, Tissue::StratumCorneum);
    paint_band(out, x, s + sc, gap, kGapTissue, Tissue::Background);
    paint_band(out, x, s + sc + gap, ve, kViableEpidermis, Tissue::ViableEpidermis);
    paint_band(out, x, s + sc + gap + ve, cfg.depth, kDermis, Tissue::Background);
  }

  std::uniform_real_distribution<double> lateral(0.0, cfg.width);
  std::vector<Gland> glands;
  for (int g = 0; g < cfg.gland_count_per_bscan; ++g) {
    const double gx = lateral(rng);
    const int xi = std::clamp(static_cast<int>(gx), 0, cfg.width - 1);
    glands.push_back({gx, surface.row(xi, y) + sc + gap / 2.0});
  }
  const double r2 = cfg.gland_radius * cfg.gland_radius;
  for (const auto& g : glands) {
    const int r = static_cast<int>(std::ceil(cfg.gland_radius));
    for (int z = static_cast<int>(g.z) - r - 1; z <= static_cast<int>(g.z) + r + 1; ++z) {
      for (int x = static_cast<int>(g.x) - r - 1; x <= static_cast<int>(g.x) + r + 1; ++x) {
        if (z < 0 || z >= cfg.depth || x < 0 || x >= cfg.width) continue;
        const double dz = z + 0.5 - g.z, dx = x + 0.5 - g.x;
        if (dz * dz + dx * dx <= r2) {
          out.relief(z, x) = static_cast<float>(kGland);
          out.labels(z, x) = static_cast<std::uint8_t>(Tissue::SweatGland);
        }
      }
    }
  }
  return out;
}

Layout pa_layout(const PhantomConfig& cfg, const Surface& surface, int y, PaKind kind) {
  Layout out{Image(cfg.depth, cfg.width), ByteImage(cfg.depth, cfg.width)};
  const int sc = cfg.stratum_corneum_thickness;
  const int ve = cfg.viable_epidermis_thickness;
  for (int x = 0; x < cfg.width; ++x) {
    const int s = surface.row(x, y);
    switch (kind) {
      case PaKind::HomogeneousSlab:
        paint_band(out, x, s, 2 * sc, kSlab, Tissue::StratumCorneum);
        break;
      case PaKind::ThinFilmOnLayer: {
        paint_band(out, x, s, kFilmThickness, kStratumCorneum, Tissue::StratumCorneum);
        const int sub = s + kFilmThickness + kFilmGap;
        paint_band(out, x, sub, sc, kStratumCorneum, Tissue::StratumCorneum);
        paint_band(out, x, sub + sc + cfg.epidermis_gap, ve, kViableEpidermis, Tissue::ViableEpidermis);
        break;
      }
      case PaKind::DoubleLayer:
        paint_band(out, x, s, kDoubleBandThickness, kDoubleBand, Tissue::StratumCorneum);
        paint_band(out, x, s + kDoubleBandThickness + kDoubleBandSpacing, kDoubleBandThickness, kDoubleBand,
                   Tissue::ViableEpidermis);
        break;
    }
  }
  return out;
}

/// Attenuation below the surface plus multiplicative log-normal speckle.
Image render(const PhantomConfig& cfg, const Surface& surface, int y, const Layout& layout, std::mt19937_64& rng) {
  Image img(cfg.depth, cfg.width);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = cfg.speckle_sigma;
  for (int z = 0; z < cfg.depth; ++z) {
    for (int x = 0; x < cfg.width; ++x) {
      const int s = surface.row(x, y);
      const double att = z >= s ? std::exp(-cfg.attenuation_coefficient * (z - s)) : 1.0;
      double v = cfg.background_level + cfg.layer_contrast * layout.relief(z, x) * att;
      if (sigma > 0.0) v *= std::exp(sigma * gauss(rng) - 0.5 * sigma * sigma);
      img(z, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

std::mt19937_64 bscan_rng(const PhantomConfig& cfg, int y, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(y) * 0x100 + stream)));
}

}  // namespace

void validate(const PhantomConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::ConfigError, std::string("phantom config: ") + what);
  };
  require(cfg.depth > 0 && cfg.bscans > 0 && cfg.width > 0, "dimensions must be positive");
  require(cfg.stratum_corneum_thickness >= 1 && cfg.epidermis_gap >= 1 && cfg.viable_epidermis_thickness >= 1,
          "layer thicknesses must be >= 1");
  require(cfg.surface_amplitude >= 0.0 && cfg.surface_depth_mean - cfg.surface_amplitude >= 0.0,
          "surface must stay inside the volume");
  const double extent = cfg.stratum_corneum_thickness + cfg.epidermis_gap + cfg.viable_epidermis_thickness;
  require(cfg.surface_depth_mean + cfg.surface_amplitude + extent < cfg.depth,
          "surface depth plus layer extent must be < depth");
  require(cfg.layer_contrast > 0.0 && cfg.layer_contrast <= 1.0, "layer_contrast must be in (0,1]");
  require(cfg.speckle_sigma >= 0.0, "speckle_sigma must be >= 0");
  require(cfg.layer_contrast > 2.0 * cfg.speckle_sigma, "layer_contrast must exceed 2 * speckle_sigma");
  require(cfg.gland_count_per_bscan >= 0 && cfg.gland_radius > 0.0, "invalid gland settings");
  require(cfg.attenuation_coefficient >= 0.0, "attenuation must be >= 0");
  require(cfg.background_level >= 0.0 && cfg.background_level + cfg.layer_contrast <= 1.0,
          "background + contrast must stay within [0,1]");
}

PaCategory category(PaKind kind) noexcept {
  return kind == PaKind::HomogeneousSlab ? PaCategory::ExternalPatternSimulated : PaCategory::StructureSimulated;
}

std::string to_string(PaKind kind) {
  switch (kind) {
    case PaKind::HomogeneousSlab: return "slab";
    case PaKind::ThinFilmOnLayer: return "thin_film";
    case PaKind::DoubleLayer: return "double_layer";
  }
  return "slab";
}

PaKind parse_pa_kind(const std::string& text) {
  if (text == "slab") return PaKind::HomogeneousSlab;
  if (text == "thin_film") return PaKind::ThinFilmOnLayer;
  if (text == "double_layer") return PaKind::DoubleLayer;
  fail(ErrorCode::ConfigError, "unknown PA kind '" + text + "'");
}

BonafideSample gen_bonafide(const PhantomConfig& cfg) {
  validate(cfg);
  const Surface surface(cfg);
  BonafideSample out{OctVolume(cfg.depth, cfg.bscans, cfg.width), MaskVolume(cfg.depth, cfg.bscans, cfg.width)};
  for (int y = 0; y < cfg.bscans; ++y) {
    auto geometry_rng = bscan_rng(cfg, y, 1);
    auto noise_rng = bscan_rng(cfg, y, 2);
    const Layout layout = bonafide_layout(cfg, surface, y, geometry_rng);
    out.volume.set_bscan(y, render(cfg, surface, y, layout, noise_rng));
    for (int z = 0; z < cfg.depth; ++z)
      for (int x = 0; x < cfg.width; ++x) out.mask.set(z, y, x, static_cast<Tissue>(layout.labels(z, x)));
  }
  return out;
}

OctVolume gen_pa(const PhantomConfig& cfg, PaKind kind) {
  validate(cfg);
  const Surface surface(cfg);
  OctVolume vol(cfg.depth, cfg.bscans, cfg.width);
  for (int y = 0; y < cfg.bscans; ++y) {
    auto noise_rng = bscan_rng(cfg, y, 2);
    vol.set_bscan(y, render(cfg, surface, y, pa_layout(cfg, surface, y, kind), noise_rng));
  }
  return vol;
}

MaskVolume pa_geometry(const PhantomConfig& cfg, PaKind kind) {
  validate(cfg);
  const Surface surface(cfg);
  MaskVolume mask(cfg.depth, cfg.bscans, cfg.width);
  for (int y = 0; y < cfg.bscans; ++y) {
    const Layout layout = pa_layout(cfg, surface, y, kind);
    for (int z = 0; z < cfg.depth; ++z)
      for (int x = 0; x < cfg.width; ++x) mask.set(z, y, x, static_cast<Tissue>(layout.labels(z, x)));
  }
  return mask;
}

}  // namespace isapad::phantom
