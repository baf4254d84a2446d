#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "isapad/metrics.hpp"
#include "isapad/oct_core.hpp"
#include "isapad/patch_extract.hpp"

namespace isapad {

struct ScoreConfig {
  int n_bscan = 10;    // patches per B-scan for the B-scan score
  int n_instance = 2;  // patches per sampled B-scan for the instance score
  int m_bscans = 10;   // B-scans sampled per instance
  std::uint64_t seed = 0;
};

void validate(const ScoreConfig& cfg);

/// Maps a batch of patches to P(Bonafide) per patch.
using PatchScorer = std::function<std::vector<double>(std::span<const Patch>)>;

/// Generator for one sampling site; keyed so scores do not depend on the
/// order volumes are visited. `y` = -1 keys the instance-level stream.
std::mt19937_64 sampling_rng(std::uint64_t seed, const std::string& sample_id, int y);

/// min(k, n) distinct indices from [0, n), in draw order.
std::vector<int> sample_without_replacement(int n, int k, std::mt19937_64& rng);

/// Mean of the scores of min(n_bscan, available) sampled patches. Throws
/// NoForeground when extraction yields nothing.
double bscan_score(const PatchScorer& scorer, const BScan& bscan, const ExtractionConfig& extraction,
                   const ScoreConfig& cfg, const std::string& sample_id = {});

/// Mean over min(M, Y) sampled B-scans of min(n_instance, available) sampled
/// patches each. Throws NoForeground when no sampled B-scan yields a patch.
double instance_score(const PatchScorer& scorer, const OctVolume& volume, const ExtractionConfig& extraction,
                      const ScoreConfig& cfg);

struct ScoreRow {
  std::string sample_id;
  Label label = Label::Bonafide;
  double score = 0.0;
};

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);
ScoreSet to_score_set(const std::vector<ScoreRow>& rows);

struct Fold {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
};

/// Grouped k-fold split: PA materials and bonafide subject_ids are each
/// shuffled with `seed` and dealt round-robin into k groups; fold i tests on
/// group i. Throws InsufficientGroups when either side has fewer than k groups.
std::vector<Fold> crossval_folds(const Manifest& manifest, int k, std::uint64_t seed);

}  // namespace isapad
