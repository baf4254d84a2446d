#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isapad/nn/network.hpp"
#include "isapad/nn/trainer.hpp"
#include "isapad/patch_extract.hpp"
#include "isapad/phantom.hpp"
#include "isapad/scoring.hpp"

namespace isapad::cli {

/// How `synth` lays out a corpus.
struct CorpusConfig {
  int n_bona = 5;
  int n_pa = 5;
  int subjects = 5;   // bonafide volumes are dealt round-robin to subjects
  int materials = 6;  // PA volumes are dealt round-robin to materials
  std::vector<phantom::PaKind> pa_kinds{phantom::PaKind::HomogeneousSlab, phantom::PaKind::ThinFilmOnLayer,
                                        phantom::PaKind::DoubleLayer};
  VolumeFormat format = VolumeFormat::PngStack;
};

struct DataConfig {
  /// Cap on training patches per class after balancing; 0 keeps all.
  int max_patches_per_class = 0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  phantom::PhantomConfig phantom;
  CorpusConfig corpus;
  ExtractionConfig extraction;
  nn::NetConfig model;
  nn::TrainConfig train;
  DataConfig data;
  ScoreConfig score;
  int folds = 3;
};

/// Unknown keys and wrongly typed values raise ConfigError. The top-level
/// seed propagates into every stochastic component.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

/// Parsed config plus the SHA-256 of the file bytes (of "{}" when no file
/// is given, in which case all defaults apply).
struct LoadedConfig {
  RunConfig config;
  std::string sha256;
};

LoadedConfig load_config(const std::filesystem::path& path);
LoadedConfig default_config();

std::string sha256_hex(const std::string& bytes);

extern const char* const kVersion;

/// Writes the provenance sidecar for an artifact: `<file>.run.json` for a
/// file, `<dir>/run.json` for a directory.
void write_run_json(const std::filesystem::path& artifact, const LoadedConfig& cfg, const std::string& command);

}  // namespace isapad::cli
