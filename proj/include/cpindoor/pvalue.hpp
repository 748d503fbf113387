#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <vector>

#include "cpindoor/error.hpp"
#include "cpindoor/nonconformity.hpp"
#include "cpindoor/risk_control.hpp"

namespace cpindoor {

/// Conformal p-value (1 + #{i : s_i >= s_test}) / (n + 1). Ties count toward
/// the numerator.
struct PValue {
  double value = 1.0;
  std::size_t numerator = 1;  // 1 + #{s_i >= s_test}, in 1..n+1
  std::size_t n = 0;
};

inline PValue pvalue(const CalibrationScores& cal, const Score& test_score) {
  if (cal.empty()) throw ContractError("pvalue: empty calibration set");
  if (test_score.kind != cal.kind()) throw ContractError("pvalue: score kind does not match calibration");
  const auto values = cal.values();
  const auto first_at_least = std::lower_bound(values.begin(), values.end(), test_score.value);
  const auto at_least = static_cast<std::size_t>(values.end() - first_at_least);
  PValue p;
  p.n = cal.size();
  p.numerator = 1 + at_least;
  p.value = static_cast<double>(p.numerator) / static_cast<double>(p.n + 1);
  return p;
}

struct ScoredPoint {
  std::size_t id = 0;
  Score score;
};

struct FilterDecision {
  std::size_t id = 0;
  double score = 0.0;
  PValue pvalue;
  bool retained = false;
};

struct FilterReport {
  std::vector<FilterDecision> decisions;  // input order
  std::set<std::size_t> retained;
};

/// Keeps exactly the points whose p-value exceeds alpha.
inline FilterReport filter_points(std::span<const ScoredPoint> points, const CalibrationScores& cal, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("filter_points: alpha must lie in (0, 1)");
  FilterReport report;
  report.decisions.reserve(points.size());
  for (const ScoredPoint& point : points) {
    FilterDecision d;
    d.id = point.id;
    d.score = point.score.value;
    d.pvalue = pvalue(cal, point.score);
    d.retained = d.pvalue.value > alpha;
    if (d.retained) report.retained.insert(point.id);
    report.decisions.push_back(d);
  }
  return report;
}

struct SuperUniformityRow {
  double alpha = 0.0;
  double fraction = 0.0;  // empirical P(p <= alpha)
  bool exceeded = false;  // fraction > alpha + slack
};

struct SuperUniformityReport {
  std::vector<SuperUniformityRow> rows;
  bool any_exceeded = false;
};

/// Empirical CDF of null p-values at each alpha, flagged against alpha + slack.
inline SuperUniformityReport superuniformity_check(std::span<const PValue> null_pvalues,
                                                   std::span<const double> alpha_grid, double slack) {
  if (null_pvalues.empty() || alpha_grid.empty()) throw ContractError("superuniformity_check: empty input");
  std::vector<double> sorted;
  sorted.reserve(null_pvalues.size());
  for (const PValue& p : null_pvalues) sorted.push_back(p.value);
  std::sort(sorted.begin(), sorted.end());
  SuperUniformityReport report;
  for (double alpha : alpha_grid) {
    const auto at_most = std::upper_bound(sorted.begin(), sorted.end(), alpha) - sorted.begin();
    SuperUniformityRow row;
    row.alpha = alpha;
    row.fraction = static_cast<double>(at_most) / static_cast<double>(sorted.size());
    row.exceeded = row.fraction > alpha + slack;
    report.any_exceeded = report.any_exceeded || row.exceeded;
    report.rows.push_back(row);
  }
  return report;
}

/// Calibration scores for path units: each path is cut into consecutive
/// windows of `window` points (the last may be shorter) and each window is
/// scored by the maximum distance score of its points.
inline CalibrationScores window_calibration_scores(std::span<const Path> paths, std::size_t window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  std::vector<Score> unit_scores;
  for (const Path& path : paths) {
    for (std::size_t start = 0; start < path.samples.size(); start += window) {
      std::vector<Score> members;
      const std::size_t end = std::min(path.samples.size(), start + window);
      for (std::size_t i = start; i < end; ++i) {
        const PathSample& s = path.samples[i];
        if (!s.predicted) throw StateError("path sample has no prediction");
        members.push_back(distance_score(s.truth, *s.predicted));
      }
      unit_scores.push_back(max_aggregate(members));
    }
  }
  return CalibrationScores::from_scores(unit_scores);
}

}  // namespace cpindoor
