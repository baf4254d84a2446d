#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace isapad {

/// Scores are P(Bonafide): higher means more live. The decision rule is
/// "classify PA iff score < t".
struct ScoreSet {
  std::vector<double> bona_scores;
  std::vector<double> pa_scores;
};

struct DetPoint {
  double threshold = 0.0;
  double fpr = 0.0;  // bonafide rejected as PA
  double fnr = 0.0;  // PA accepted as bonafide
};

/// Thresholds are the sorted distinct scores plus one sentinel below and one
/// above the observed range. Throws DomainError if either side is empty.
std::vector<DetPoint> det_curve(const ScoreSet& scores);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// DET point minimising |FPR - FNR| (smallest threshold on ties); the EER is
/// the mean of the two rates there, which equals either when they cross.
EerResult eer(const ScoreSet& scores);

double hter(const ScoreSet& scores, double threshold);

/// P(bona > pa) + P(tie)/2 over all pairs.
double auc(const ScoreSet& scores);

struct MetricsReport {
  double eer = 0.0;
  double hter = 0.0;
  double auc = 0.0;
  int n_bona = 0;
  int n_pa = 0;
  int fold = 0;
};

void write_det_csv(const std::filesystem::path& path, const std::vector<DetPoint>& points);
void write_report_json(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace isapad
