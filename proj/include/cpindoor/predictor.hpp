#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cpindoor/csv.hpp"
#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"

namespace cpindoor {

/// Output of a positioning model for one fingerprint: a point estimate plus
/// independent class-probability heads for building and floor.
struct PredictionOutput {
  Coords coords;
  std::vector<double> building_probs;
  std::vector<double> floor_probs;

  friend bool operator==(const PredictionOutput&, const PredictionOutput&) = default;
};

/// Anything that can produce a prediction for a dataset record.
template <typename S>
concept PredictionSource = requires(const S& source, const Record& record) {
  { source.predict(record) } -> std::convertible_to<PredictionOutput>;
};

inline bool is_probability_vector(std::span<const double> probs, double tolerance = 1e-9) {
  if (probs.empty()) return false;
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) return false;
    sum += p;
  }
  return std::fabs(sum - 1.0) <= tolerance;
}

// ---------------------------------------------------------------------------
// Weighted k-NN fingerprint matcher

enum class Weighting { uniform, inverse_distance };

inline Weighting parse_weighting(std::string_view name) {
  if (name == "uniform") return Weighting::uniform;
  if (name == "inverse_distance") return Weighting::inverse_distance;
  throw ConfigError("unknown k-NN weighting '" + std::string(name) + "'");
}

struct KnnConfig {
  std::size_t k = 5;
  Weighting weighting = Weighting::uniform;
  // Distance is always Euclidean on normalized RSSI.

  friend bool operator==(const KnnConfig&, const KnnConfig&) = default;
};

struct Neighbor {
  double squared_distance = 0.0;
  std::size_t index = 0;  // position in the training set

  friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

/// Immutable after construction; predict() is const and reentrant.
class KnnModel {
 public:
  static constexpr double kWeightRegularizer = 1e-9;

  KnnModel(const Dataset& train, const KnnConfig& config)
      : config_(config),
        num_aps_(train.num_aps),
        num_floors_(train.num_floors),
        num_buildings_(train.num_buildings) {
    if (train.empty()) throw ConfigError("k-NN needs a non-empty training set");
    if (!train.normalized()) throw StateError("k-NN expects a normalized training set");
    if (config.k < 1) throw ConfigError("k must be >= 1");
    if (config.k > train.size()) {
      throw ConfigError("k = " + std::to_string(config.k) + " exceeds the training-set size " +
                        std::to_string(train.size()));
    }
    normalization_ = *train.normalization;
    features_.reserve(train.size() * num_aps_);
    labels_.reserve(train.size());
    for (const Record& record : train.records) {
      if (record.fingerprint.size() != num_aps_) throw ContractError("ragged training set");
      features_.insert(features_.end(), record.fingerprint.begin(), record.fingerprint.end());
      labels_.push_back(record.label);
    }
  }

  const KnnConfig& config() const { return config_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t num_aps() const { return num_aps_; }
  int num_floors() const { return num_floors_; }
  int num_buildings() const { return num_buildings_; }
  const NormalizationMap& normalization() const { return normalization_; }
  const PositionLabel& label(std::size_t index) const { return labels_.at(index); }

  /// The k nearest training fingerprints, nearest first; equal distances
  /// are ordered by training index.
  std::vector<Neighbor> neighbors(std::span<const double> x) const {
    if (x.size() != num_aps_) {
      throw ContractError("fingerprint has " + std::to_string(x.size()) + " values, model expects " +
                          std::to_string(num_aps_));
    }
    std::vector<Neighbor> all(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const double* row = features_.data() + i * num_aps_;
      double sum = 0.0;
      for (std::size_t j = 0; j < num_aps_; ++j) {
        const double diff = row[j] - x[j];
        sum += diff * diff;
      }
      all[i] = {sum, i};
    }
    const auto k = static_cast<std::ptrdiff_t>(config_.k);
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    all.resize(config_.k);
    return all;
  }

  /// Weighted mean of neighbor coordinates; class heads are weighted vote
  /// fractions. Inverse-distance weights are 1 / (d + 1e-9).
  PredictionOutput predict(std::span<const double> x) const {
    const auto nearest = neighbors(x);
    PredictionOutput out;
    out.building_probs.assign(static_cast<std::size_t>(num_buildings_), 0.0);
    out.floor_probs.assign(static_cast<std::size_t>(num_floors_), 0.0);
    double total = 0.0;
    double lon = 0.0;
    double lat = 0.0;
    for (const Neighbor& n : nearest) {
      const double w = config_.weighting == Weighting::uniform
                           ? 1.0
                           : 1.0 / (std::sqrt(n.squared_distance) + kWeightRegularizer);
      const PositionLabel& label = labels_[n.index];
      lon += w * label.longitude;
      lat += w * label.latitude;
      out.building_probs.at(static_cast<std::size_t>(label.building)) += w;
      out.floor_probs.at(static_cast<std::size_t>(label.floor)) += w;
      total += w;
    }
    out.coords = {lon / total, lat / total};
    for (double& p : out.building_probs) p /= total;
    for (double& p : out.floor_probs) p /= total;
    return out;
  }

  PredictionOutput predict(const Record& record) const { return predict(record.fingerprint); }

  friend bool operator==(const KnnModel&, const KnnModel&) = default;

 private:
  KnnConfig config_;
  std::size_t num_aps_;
  int num_floors_;
  int num_buildings_;
  NormalizationMap normalization_;
  std::vector<double> features_;  // row-major, size() x num_aps()
  std::vector<PositionLabel> labels_;
};

inline KnnModel fit_knn(const Dataset& train, const KnnConfig& config) {
  return KnnModel(train, config);
}

inline PredictionOutput predict(const KnnModel& model, std::span<const double> x) {
  return model.predict(x);
}

// ---------------------------------------------------------------------------
// Externally computed predictions

/// Predictions keyed by record id, e.g. produced by an external deep model.
class PredictionTable {
 public:
  PredictionTable(int num_buildings, int num_floors)
      : num_buildings_(num_buildings), num_floors_(num_floors) {}

  int num_buildings() const { return num_buildings_; }
  int num_floors() const { return num_floors_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::size_t, PredictionOutput>& entries() const { return entries_; }

  void insert(std::size_t id, PredictionOutput output) {
    if (output.building_probs.size() != static_cast<std::size_t>(num_buildings_) ||
        output.floor_probs.size() != static_cast<std::size_t>(num_floors_)) {
      throw ValidationError("prediction for id " + std::to_string(id) +
                            " has the wrong number of class probabilities");
    }
    if (!is_probability_vector(output.building_probs) || !is_probability_vector(output.floor_probs)) {
      throw ValidationError("prediction for id " + std::to_string(id) +
                            " is not a probability vector");
    }
    if (!entries_.emplace(id, std::move(output)).second) {
      throw ValidationError("duplicate prediction id " + std::to_string(id));
    }
  }

  bool contains(std::size_t id) const { return entries_.contains(id); }

  const PredictionOutput& at(std::size_t id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw CoverageError("no prediction for id " + std::to_string(id));
    return it->second;
  }

  PredictionOutput predict(const Record& record) const { return at(record.id); }

  std::vector<std::size_t> missing_ids(const Dataset& dataset) const {
    std::vector<std::size_t> missing;
    for (const Record& record : dataset.records) {
      if (!contains(record.id)) missing.push_back(record.id);
    }
    return missing;
  }

 private:
  int num_buildings_;
  int num_floors_;
  std::map<std::size_t, PredictionOutput> entries_;
};

namespace detail {

inline std::string describe_ids(const std::vector<std::size_t>& ids) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(ids[i]);
  }
  if (ids.size() > shown) out += ", ... (" + std::to_string(ids.size()) + " in total)";
  return out;
}

}  // namespace detail

/// Throws CoverageError naming the records `source` cannot predict. Sources
/// without a coverage query are assumed total.
template <PredictionSource Source>
void require_coverage(const Source& source, const Dataset& dataset) {
  if constexpr (requires { source.missing_ids(dataset); }) {
    const auto missing = source.missing_ids(dataset);
    if (!missing.empty()) {
      throw CoverageError("missing predictions for ids: " + detail::describe_ids(missing));
    }
  }
}

template <PredictionSource Source>
PredictionTable predict_all(const Source& source, const Dataset& dataset) {
  require_coverage(source, dataset);
  PredictionTable table(dataset.num_buildings, dataset.num_floors);
  for (const Record& record : dataset.records) table.insert(record.id, source.predict(record));
  return table;
}

inline std::string prediction_csv_header(int num_buildings, int num_floors) {
  std::string header = "ID,PRED_LON,PRED_LAT";
  for (int b = 0; b < num_buildings; ++b) header += ",P_BLDG_" + std::to_string(b);
  for (int f = 0; f < num_floors; ++f) header += ",P_FLOOR_" + std::to_string(f);
  return header;
}

/// Prediction-import schema: ID, PRED_LON, PRED_LAT, P_BLDG_0.., P_FLOOR_0..
/// Exact shortest-form doubles, rows ordered by id.
inline std::string export_predictions(const PredictionTable& table) {
  std::string out = prediction_csv_header(table.num_buildings(), table.num_floors()) + "\n";
  for (const auto& [id, output] : table.entries()) {
    out += std::to_string(id);
    out += ',' + csv::format_exact(output.coords.longitude);
    out += ',' + csv::format_exact(output.coords.latitude);
    for (double p : output.building_probs) out += ',' + csv::format_exact(p);
    for (double p : output.floor_probs) out += ',' + csv::format_exact(p);
    out += '\n';
  }
  return out;
}

/// Reads predictions for the records of `expected`. The header must match
/// the export schema for expected's building and floor counts. Probability
/// rows must sum to 1 within 1e-6; rows off by more than 1e-9 are rescaled.
/// Ids not present in `expected` are kept.
inline PredictionTable import_predictions(std::string_view csv_text, const Dataset& expected) {
  const auto lines = csv::split_lines(csv_text);
  if (lines.empty()) throw FormatError("empty prediction file: missing header row");
  const auto header = csv::split_cells(lines.front());
  const std::string wanted = prediction_csv_header(expected.num_buildings, expected.num_floors);
  const auto wanted_cells = csv::split_cells(wanted);
  for (std::size_t c = 0; c < wanted_cells.size(); ++c) {
    if (c >= header.size() || header[c] != wanted_cells[c]) {
      throw FormatError("missing mandatory column " + std::string(wanted_cells[c]) +
                        " (expected header '" + wanted + "')");
    }
  }
  if (header.size() != wanted_cells.size()) {
    throw FormatError("unexpected column " + std::string(header[wanted_cells.size()]));
  }

  const auto num_b = static_cast<std::size_t>(expected.num_buildings);
  const auto num_f = static_cast<std::size_t>(expected.num_floors);
  PredictionTable table(expected.num_buildings, expected.num_floors);
  const auto read_probs = [](std::span<const std::string_view> cells, std::size_t row,
                             std::size_t first_column, const char* head) {
    std::vector<double> probs(cells.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      probs[i] = csv::parse_double(cells[i], row, first_column + i);
      if (probs[i] < 0.0) throw ValidationError("row " + std::to_string(row) + ": negative probability");
      sum += probs[i];
    }
    if (!(sum >= 1.0 - 1e-6 && sum <= 1.0 + 1e-6)) {
      throw ValidationError("row " + std::to_string(row) + ": " + head + " probabilities sum to " +
                            csv::format_exact(sum));
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      for (double& p : probs) p /= sum;
    }
    return probs;
  };

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t row = r + 1;
    const auto cells = csv::split_cells(lines[r]);
    detail::check_cell_count(row, cells.size(), header.size());
    const auto id = csv::parse_int(cells[0], row, 1);
    if (id < 0) throw ParseError(row, 1, "negative id");
    PredictionOutput output;
    output.coords = {csv::parse_double(cells[1], row, 2), csv::parse_double(cells[2], row, 3)};
    const std::span<const std::string_view> all(cells);
    output.building_probs = read_probs(all.subspan(3, num_b), row, 4, "building");
    output.floor_probs = read_probs(all.subspan(3 + num_b, num_f), row, 4 + num_b, "floor");
    table.insert(static_cast<std::size_t>(id), std::move(output));
  }
  const auto missing = table.missing_ids(expected);
  if (!missing.empty()) {
    throw CoverageError("missing predictions for ids: " + detail::describe_ids(missing));
  }
  return table;
}

}  // namespace cpindoor
