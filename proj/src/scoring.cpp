#include "isapad/scoring.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace isapad {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Seeded shuffle, then round-robin into k groups.
std::map<std::string, int> assign_groups(const std::set<std::string>& keys, int k, std::uint64_t seed) {
  std::vector<std::string> order(keys.begin(), keys.end());
  std::mt19937_64 rng(mix(seed));
  std::shuffle(order.begin(), order.end(), rng);
  std::map<std::string, int> group;
  for (std::size_t i = 0; i < order.size(); ++i) group[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return group;
}

}  // namespace

void validate(const ScoreConfig& cfg) {
  if (cfg.n_bscan < 1 || cfg.n_instance < 1 || cfg.m_bscans < 1) {
    fail(ErrorCode::ConfigError, "score config counts must be >= 1");
  }
}

std::mt19937_64 sampling_rng(std::uint64_t seed, const std::string& sample_id, int y) {
  return std::mt19937_64(mix(seed ^ mix(fnv1a(sample_id) + static_cast<std::uint64_t>(static_cast<std::int64_t>(y)))));
}

std::vector<int> sample_without_replacement(int n, int k, std::mt19937_64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(std::max(n, 0)));
  std::iota(pool.begin(), pool.end(), 0);
  const int take = std::clamp(k, 0, n);
  for (int i = 0; i < take; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

double bscan_score(const PatchScorer& scorer, const BScan& bscan, const ExtractionConfig& extraction,
                   const ScoreConfig& cfg, const std::string& sample_id) {
  validate(cfg);
  const auto patches = extract_patches(bscan, extraction, sample_id);
  if (patches.empty()) fail(ErrorCode::NoForeground, "no patches extracted from B-scan");
  auto rng = sampling_rng(cfg.seed, sample_id, bscan.source_y.value_or(-1));
  std::vector<Patch> chosen;
  for (int i : sample_without_replacement(static_cast<int>(patches.size()), cfg.n_bscan, rng)) {
    chosen.push_back(patches[i]);
  }
  return mean_of(scorer(chosen));
}

double instance_score(const PatchScorer& scorer, const OctVolume& volume, const ExtractionConfig& extraction,
                      const ScoreConfig& cfg) {
  validate(cfg);
  const std::string& id = volume.meta().sample_id;
  auto rng = sampling_rng(cfg.seed, id, -1);
  std::vector<Patch> chosen;
  for (int y : sample_without_replacement(volume.bscans(), cfg.m_bscans, rng)) {
    const auto patches = extract_patches(get_bscan(volume, y), extraction, id);
    for (int i : sample_without_replacement(static_cast<int>(patches.size()), cfg.n_instance, rng)) {
      chosen.push_back(patches[i]);
    }
  }
  if (chosen.empty()) fail(ErrorCode::NoForeground, "no patches extracted from any sampled B-scan of " + id);
  return mean_of(scorer(chosen));
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "sample_id,label,score\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.9f", r.score);
    out << r.sample_id << ',' << to_string(r.label) << ',' << buf << '\n';
  }
}

std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_id,label,score", 0) != 0) {
    fail(ErrorCode::SchemaError, path.string() + ": expected header sample_id,label,score");
  }
  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) fail(ErrorCode::SchemaError, "malformed score row: " + line);
    ScoreRow r;
    r.sample_id = line.substr(0, a);
    r.label = parse_label(line.substr(a + 1, b - a - 1));
    try {
      r.score = std::stod(line.substr(b + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::SchemaError, "malformed score value: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

ScoreSet to_score_set(const std::vector<ScoreRow>& rows) {
  ScoreSet s;
  for (const auto& r : rows) (r.label == Label::Bonafide ? s.bona_scores : s.pa_scores).push_back(r.score);
  return s;
}

std::vector<Fold> crossval_folds(const Manifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::DomainError, "cross-validation needs k >= 2");
  std::set<std::string> materials, subjects;
  for (const auto& e : manifest.entries) {
    if (e.meta.label == Label::PA) {
      materials.insert(e.meta.material);
    } else {
      subjects.insert(e.meta.subject_id);
    }
  }
  if (static_cast<int>(materials.size()) < k || static_cast<int>(subjects.size()) < k) {
    fail(ErrorCode::InsufficientGroups, "need at least " + std::to_string(k) + " PA materials and bonafide subjects, have " +
                                            std::to_string(materials.size()) + " and " + std::to_string(subjects.size()));
  }
  const auto material_group = assign_groups(materials, k, seed);
  const auto subject_group = assign_groups(subjects, k, mix(seed + 1));

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (const auto& e : manifest.entries) {
    const int g = e.meta.label == Label::PA ? material_group.at(e.meta.material) : subject_group.at(e.meta.subject_id);
    for (int f = 0; f < k; ++f) (f == g ? folds[f].test : folds[f].train).push_back(e);
  }
  return folds;
}

}  // namespace isapad
