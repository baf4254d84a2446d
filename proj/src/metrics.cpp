#include "isapad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "isapad/error.hpp"

namespace isapad {
namespace {

void require_both(const ScoreSet& s) {
  if (s.bona_scores.empty() || s.pa_scores.empty()) {
    fail(ErrorCode::DomainError, "score set needs both bonafide and PA scores");
  }
}

/// Error counts at threshold t, over sorted score lists.
struct Counts {
  std::int64_t bona_below = 0;  // bona with s < t
  std::int64_t pa_at_or_above = 0;  // pa with s >= t
};

Counts count_at(const std::vector<double>& bona_sorted, const std::vector<double>& pa_sorted, double t) {
  const auto b = std::lower_bound(bona_sorted.begin(), bona_sorted.end(), t) - bona_sorted.begin();
  const auto p = pa_sorted.end() - std::lower_bound(pa_sorted.begin(), pa_sorted.end(), t);
  return {b, p};
}

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<double> thresholds(const std::vector<double>& bona, const std::vector<double>& pa) {
  std::vector<double> t;
  t.reserve(bona.size() + pa.size() + 2);
  t.insert(t.end(), bona.begin(), bona.end());
  t.insert(t.end(), pa.begin(), pa.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  const double lo = t.front() - 1.0;
  const double hi = t.back() + 1.0;
  t.insert(t.begin(), lo);
  t.push_back(hi);
  return t;
}

}  // namespace

std::vector<DetPoint> det_curve(const ScoreSet& scores) {
  require_both(scores);
  const auto bona = sorted(scores.bona_scores);
  const auto pa = sorted(scores.pa_scores);
  const double nb = static_cast<double>(bona.size());
  const double np = static_cast<double>(pa.size());
  std::vector<DetPoint> out;
  for (double t : thresholds(bona, pa)) {
    const Counts c = count_at(bona, pa, t);
    out.push_back({t, c.bona_below / nb, c.pa_at_or_above / np});
  }
  return out;
}

EerResult eer(const ScoreSet& scores) {
  require_both(scores);
  const auto bona = sorted(scores.bona_scores);
  const auto pa = sorted(scores.pa_scores);
  const auto nb = static_cast<std::int64_t>(bona.size());
  const auto np = static_cast<std::int64_t>(pa.size());

  // |FPR - FNR| * nb * np, kept integral so ties are exact.
  std::int64_t best_gap = -1;
  EerResult best;
  for (double t : thresholds(bona, pa)) {
    const Counts c = count_at(bona, pa, t);
    const std::int64_t gap = std::llabs(c.bona_below * np - c.pa_at_or_above * nb);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      const double fpr = static_cast<double>(c.bona_below) / static_cast<double>(nb);
      const double fnr = static_cast<double>(c.pa_at_or_above) / static_cast<double>(np);
      best = {(fpr + fnr) / 2.0, t};
    }
  }
  return best;
}

double hter(const ScoreSet& scores, double threshold) {
  require_both(scores);
  if (!std::isfinite(threshold)) fail(ErrorCode::DomainError, "HTER threshold must be finite");
  std::int64_t bona_below = 0, pa_above = 0;
  for (double s : scores.bona_scores) bona_below += s < threshold;
  for (double s : scores.pa_scores) pa_above += s >= threshold;
  return (static_cast<double>(bona_below) / static_cast<double>(scores.bona_scores.size()) +
          static_cast<double>(pa_above) / static_cast<double>(scores.pa_scores.size())) /
         2.0;
}

double auc(const ScoreSet& scores) {
  require_both(scores);
  const auto pa = sorted(scores.pa_scores);
  // Twice the count of wins plus ties, summed per bonafide score.
  std::int64_t twice = 0;
  for (double b : scores.bona_scores) {
    const auto lower = std::lower_bound(pa.begin(), pa.end(), b) - pa.begin();
    const auto upper = std::upper_bound(pa.begin(), pa.end(), b) - pa.begin();
    twice += 2 * lower + (upper - lower);
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(scores.bona_scores.size()) * static_cast<double>(pa.size()));
}

void write_det_csv(const std::filesystem::path& path, const std::vector<DetPoint>& points) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "threshold,fpr,fnr\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", p.threshold, p.fpr, p.fnr);
    out << buf;
  }
}

void write_report_json(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  const nlohmann::json j{{"eer", r.eer}, {"hter", r.hter}, {"auc", r.auc},
                         {"n_bona", r.n_bona}, {"n_pa", r.n_pa}, {"fold", r.fold}};
  out << j.dump(2) << '\n';
}

}  // namespace isapad
