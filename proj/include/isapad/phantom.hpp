#pragma once

#include <cstdint>
#include <string>

#include "isapad/oct_core.hpp"

namespace isapad::phantom {

/// Geometry and noise knobs for synthetic fingertip volumes. Lengths are in
/// pixels (rows for depths).
struct PhantomConfig {
  int depth = 320;   // Z
  int bscans = 16;   // Y
  int width = 512;   // X
  double surface_depth_mean = 150.0;
  double surface_amplitude = 10.0;
  int stratum_corneum_thickness = 12;
  int epidermis_gap = 16;
  int viable_epidermis_thickness = 20;
  int gland_count_per_bscan = 6;
  double gland_radius = 5.0;
  double layer_contrast = 0.6;
  double speckle_sigma = 0.15;
  double attenuation_coefficient = 0.004;
  double background_level = 0.05;
  std::uint64_t seed = 42;
};

/// Throws ConfigError when the thickness, depth or separability constraints
/// fail.
void validate(const PhantomConfig& cfg);

enum class PaKind { HomogeneousSlab, ThinFilmOnLayer, DoubleLayer };

PaCategory category(PaKind kind) noexcept;
std::string to_string(PaKind kind);
PaKind parse_pa_kind(const std::string& text);

struct BonafideSample {
  OctVolume volume;
  MaskVolume mask;
};

/// Layered fingertip: stratum corneum band on a smooth surface, gap with
/// sweat glands, dimmer viable epidermis, faint dermis below. The mask is
/// the noiseless geometry.
BonafideSample gen_bonafide(const PhantomConfig& cfg);

OctVolume gen_pa(const PhantomConfig& cfg, PaKind kind);

/// Noiseless structure used to render a PA volume, labelled with the same
/// channels as a bonafide mask (film -> stratum corneum, substrate -> viable
/// epidermis). Never contains sweat glands.
MaskVolume pa_geometry(const PhantomConfig& cfg, PaKind kind);

}  // namespace isapad::phantom
