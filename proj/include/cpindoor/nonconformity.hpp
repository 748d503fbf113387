#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/predictor.hpp"

namespace cpindoor {

enum class ScoreKind { classification, distance };

inline std::string_view to_string(ScoreKind kind) {
  return kind == ScoreKind::classification ? "classification" : "distance";
}

/// Non-conformity of a (fingerprint, label) pair; larger means less typical.
/// Classification scores lie in [0, 1], distance scores are in meters.
struct Score {
  double value = 0.0;
  ScoreKind kind = ScoreKind::distance;

  friend bool operator==(const Score&, const Score&) = default;
};

/// What a run calibrates: a class head or the coordinate estimate.
enum class Task { building, floor, coords };

inline std::string_view to_string(Task task) {
  switch (task) {
    case Task::building: return "building";
    case Task::floor: return "floor";
    case Task::coords: return "coords";
  }
  return "?";
}

inline Task parse_task(std::string_view name) {
  if (name == "building") return Task::building;
  if (name == "floor") return Task::floor;
  if (name == "coords") return Task::coords;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

/// Class heads use 1 - p(label); coordinates use Euclidean distance.
constexpr ScoreKind score_kind_for(Task task) {
  return task == Task::coords ? ScoreKind::distance : ScoreKind::classification;
}

/// 1 - probs[label].
inline Score class_score(std::span<const double> probs, std::size_t label) {
  if (!is_probability_vector(probs)) throw ContractError("class_score: not a probability vector");
  if (label >= probs.size()) {
    throw ContractError("class_score: label " + std::to_string(label) + " out of range for " +
                        std::to_string(probs.size()) + " classes");
  }
  return {1.0 - probs[label], ScoreKind::classification};
}

/// Euclidean distance between true and predicted position, in meters.
inline Score distance_score(const Coords& truth, const Coords& pred) {
  if (!std::isfinite(truth.longitude) || !std::isfinite(truth.latitude) ||
      !std::isfinite(pred.longitude) || !std::isfinite(pred.latitude)) {
    throw ContractError("distance_score: non-finite coordinates");
  }
  return {std::hypot(truth.longitude - pred.longitude, truth.latitude - pred.latitude),
          ScoreKind::distance};
}

/// Score of a multi-item calibration unit (e.g. a path window): the maximum.
inline Score max_aggregate(std::span<const Score> scores) {
  if (scores.empty()) throw ContractError("max_aggregate: empty input");
  Score best = scores.front();
  for (const Score& s : scores.subspan(1)) {
    if (s.kind != best.kind) throw ContractError("max_aggregate: mixed score kinds");
    if (s.value > best.value) best.value = s.value;
  }
  return best;
}

/// Score of one labelled record under a prediction, for the given task.
inline Score score_record(const PredictionOutput& prediction, const PositionLabel& label, Task task) {
  switch (task) {
    case Task::building:
      return class_score(prediction.building_probs, static_cast<std::size_t>(label.building));
    case Task::floor:
      return class_score(prediction.floor_probs, static_cast<std::size_t>(label.floor));
    case Task::coords:
      return distance_score(label.coords(), prediction.coords);
  }
  throw ContractError("score_record: unknown task");
}

/// Held-out calibration scores, sorted ascending (stable; ties kept).
class CalibrationScores {
 public:
  CalibrationScores(std::vector<double> values, ScoreKind kind) : values_(std::move(values)), kind_(kind) {
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("scores must be finite and >= 0");
      if (kind_ == ScoreKind::classification && v > 1.0) {
        throw ContractError("classification scores must be <= 1");
      }
    }
    std::stable_sort(values_.begin(), values_.end());
  }

  static CalibrationScores from_scores(std::span<const Score> scores) {
    if (scores.empty()) throw ContractError("no calibration scores");
    std::vector<double> values;
    values.reserve(scores.size());
    for (const Score& s : scores) {
      if (s.kind != scores.front().kind) throw ContractError("mixed score kinds");
      values.push_back(s.value);
    }
    return CalibrationScores(std::move(values), scores.front().kind);
  }

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  ScoreKind kind() const { return kind_; }
  /// k-th smallest score, 1-based.
  double order_statistic(std::size_t k) const { return values_.at(k - 1); }

  friend bool operator==(const CalibrationScores&, const CalibrationScores&) = default;

 private:
  std::vector<double> values_;
  ScoreKind kind_;
};

/// One score per calibration record under `source`, sorted ascending.
template <PredictionSource Source>
CalibrationScores score_calibration_set(const Source& source, const Dataset& cal, Task task) {
  require_coverage(source, cal);
  std::vector<double> values;
  values.reserve(cal.size());
  for (const Record& record : cal.records) {
    values.push_back(score_record(source.predict(record), record.label, task).value);
  }
  return CalibrationScores(std::move(values), score_kind_for(task));
}

}  // namespace cpindoor
