#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/nonconformity.hpp"

namespace cpindoor {

/// Threshold q for prediction sets {y : s(x, y) <= q}.
///
/// k_index = ceil((n + 1)(1 - alpha)). The value is the k_index-th smallest
/// calibration score when 1 <= k_index <= n, +inf when k_index > n (the
/// target coverage cannot be certified with n scores, so nothing may be
/// excluded) and -inf when k_index < 1 (empty sets).
struct ConformalQuantile {
  double value = 0.0;
  double alpha = 0.0;
  std::size_t n = 0;
  std::int64_t k_index = 0;
  ScoreKind kind = ScoreKind::distance;
};

/// ceil((n + 1)(1 - alpha)). The product is taken 1e-9 short before the
/// ceiling so that grid alphas such as 0.1 do not round up a whole rank.
inline std::int64_t conformal_rank(std::size_t n, double alpha) {
  const double target = static_cast<double>(n + 1) * (1.0 - alpha);
  return static_cast<std::int64_t>(std::ceil(target - 1e-9));
}

inline ConformalQuantile conformal_quantile(const CalibrationScores& cal, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("alpha must lie in [0, 1]");
  if (cal.empty()) throw ContractError("conformal_quantile: empty calibration set");
  ConformalQuantile q;
  q.alpha = alpha;
  q.n = cal.size();
  q.kind = cal.kind();
  q.k_index = conformal_rank(cal.size(), alpha);
  if (q.k_index < 1) {
    q.value = -std::numeric_limits<double>::infinity();
  } else if (q.k_index > static_cast<std::int64_t>(cal.size())) {
    q.value = std::numeric_limits<double>::infinity();
  } else {
    q.value = cal.order_statistic(static_cast<std::size_t>(q.k_index));
  }
  return q;
}

struct ClassPredictionSet {
  std::vector<std::size_t> members;  // ascending class ids

  bool contains(std::size_t label) const {
    return std::binary_search(members.begin(), members.end(), label);
  }
  bool contains(int label) const { return label >= 0 && contains(static_cast<std::size_t>(label)); }
  std::size_t size() const { return members.size(); }

  friend bool operator==(const ClassPredictionSet&, const ClassPredictionSet&) = default;
};

/// {y : 1 - probs[y] <= q}.
inline ClassPredictionSet class_prediction_set(std::span<const double> probs, const ConformalQuantile& q) {
  if (q.kind != ScoreKind::classification) {
    throw ContractError("class_prediction_set needs a classification quantile");
  }
  if (!is_probability_vector(probs)) throw ContractError("class_prediction_set: not a probability vector");
  ClassPredictionSet set;
  for (std::size_t y = 0; y < probs.size(); ++y) {
    if (1.0 - probs[y] <= q.value) set.members.push_back(y);
  }
  return set;
}

/// Closed disc {y : |y - center| <= radius}. A radius of -inf is the empty
/// region produced at alpha = 1.
struct RegionPredictionSet {
  Coords center;
  double radius = 0.0;

  bool contains(const Coords& point) const {
    return std::hypot(point.longitude - center.longitude, point.latitude - center.latitude) <= radius;
  }
  bool empty() const { return radius < 0.0; }
};

inline RegionPredictionSet region_prediction_set(const Coords& pred, const ConformalQuantile& q) {
  if (q.kind != ScoreKind::distance) throw ContractError("region_prediction_set needs a distance quantile");
  return {pred, q.value};
}

/// Fraction of positions where sets[i] contains truths[i].
template <typename Set, typename Truth>
double evaluate_coverage(std::span<const Set> sets, std::span<const Truth> truths) {
  if (sets.size() != truths.size()) throw ContractError("evaluate_coverage: length mismatch");
  if (sets.empty()) throw ContractError("evaluate_coverage: empty input");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].contains(truths[i])) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(sets.size());
}

template <typename Set, typename Truth>
double evaluate_coverage(const std::vector<Set>& sets, const std::vector<Truth>& truths) {
  return evaluate_coverage(std::span<const Set>(sets), std::span<const Truth>(truths));
}

inline double average_set_size(std::span<const ClassPredictionSet> sets) {
  if (sets.empty()) throw ContractError("average_set_size: empty input");
  std::size_t total = 0;
  for (const auto& set : sets) total += set.size();
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

}  // namespace cpindoor
