#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "isapad/cli/config.hpp"
#include "isapad/png_io.hpp"

namespace isapad::cli {

enum class ScoreLevel { BScan, Instance };

/// Parses argv, runs one subcommand, and maps failures to a nonzero status
/// with a single `ERROR <code>: <message>` line on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

void synth(const LoadedConfig& cfg, const std::filesystem::path& out_dir, const std::string& command);

void extract(const LoadedConfig& cfg, const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
             const std::string& command);

/// Balanced training set from a patch directory: the larger class is
/// subsampled (seeded) to the size of the smaller one, then both are capped
/// at `max_per_class` when positive. Only the chosen patches are read.
nn::Dataset training_set(const std::filesystem::path& dir, int max_per_class, std::uint64_t seed);

void train(const LoadedConfig& cfg, const std::filesystem::path& patches, const std::filesystem::path& ckpt,
           const std::string& command, std::ostream& log);

void score(const LoadedConfig& cfg, const std::filesystem::path& ckpt, const std::filesystem::path& manifest,
           ScoreLevel level, const std::filesystem::path& out, const std::string& command, std::ostream& log);

struct EvalOptions {
  std::optional<std::filesystem::path> det;
  std::optional<int> folds;
  std::optional<std::filesystem::path> manifest;
};

void eval(const LoadedConfig& cfg, const std::filesystem::path& scores, const std::filesystem::path& out,
          const EvalOptions& opts, const std::string& command);

void viz_cam(const std::filesystem::path& ckpt, const std::filesystem::path& patch_png, int target_class,
             const std::filesystem::path& out, const LoadedConfig& cfg, const std::string& command);

void viz_features(const std::filesystem::path& ckpt, const std::filesystem::path& patches,
                  const std::filesystem::path& out, const LoadedConfig& cfg, const std::string& command);

/// Grayscale base with the heatmap blended in on a blue-to-red ramp.
png::RgbImage overlay(const Image& base, const Image& heat, double alpha = 0.5);

}  // namespace isapad::cli
