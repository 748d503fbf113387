#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cpindoor/csv.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/random.hpp"

namespace cpindoor {

/// RSSI value meaning "access point not detected".
inline constexpr double kNotDetected = 100.0;
/// Weakest RSSI the UJIIndoorLoc recordings report, in dBm.
inline constexpr double kWeakestRssi = -104.0;

/// Planar position in meters.
struct Coords {
  double longitude = 0.0;
  double latitude = 0.0;

  friend bool operator==(const Coords&, const Coords&) = default;
};

struct PositionLabel {
  double longitude = 0.0;
  double latitude = 0.0;
  int floor = 0;
  int building = 0;

  Coords coords() const { return {longitude, latitude}; }
  friend bool operator==(const PositionLabel&, const PositionLabel&) = default;
};

/// One RSSI observation per access point.
using Fingerprint = std::vector<double>;

struct Record {
  std::size_t id = 0;  // stable identity, survives splitting
  Fingerprint fingerprint;
  PositionLabel label;

  friend bool operator==(const Record&, const Record&) = default;
};

enum class Normalization { minmax_unit, zero_penalty };

inline std::string_view to_string(Normalization scheme) {
  return scheme == Normalization::minmax_unit ? "minmax_unit" : "zero_penalty";
}

inline Normalization parse_normalization(std::string_view name) {
  if (name == "minmax_unit") return Normalization::minmax_unit;
  if (name == "zero_penalty") return Normalization::zero_penalty;
  throw ConfigError("unknown normalization scheme '" + std::string(name) + "'");
}

/// Affine RSSI map fixed at normalization time so that fingerprints seen
/// later (queries, path points) land in the same feature space.
struct NormalizationMap {
  Normalization scheme = Normalization::zero_penalty;
  double sentinel_dbm = kWeakestRssi;  // dBm value substituted for "not detected"
  double low_dbm = kWeakestRssi;       // maps to 0
  double high_dbm = 0.0;               // maps to 1

  double apply(double rssi) const {
    if (rssi == kNotDetected) {
      if (scheme == Normalization::zero_penalty) return 0.0;
      rssi = sentinel_dbm;
    }
    const double unit = (rssi - low_dbm) / (high_dbm - low_dbm);
    return std::clamp(unit, 0.0, 1.0);
  }

  Fingerprint apply(const Fingerprint& raw) const {
    Fingerprint out(raw.size());
    std::transform(raw.begin(), raw.end(), out.begin(), [this](double v) { return apply(v); });
    return out;
  }

  friend bool operator==(const NormalizationMap&, const NormalizationMap&) = default;
};

struct Dataset {
  std::vector<Record> records;
  std::size_t num_aps = 0;
  int num_floors = 1;
  int num_buildings = 1;
  /// Set iff normalize_rssi has been applied.
  std::optional<NormalizationMap> normalization;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool normalized() const { return normalization.has_value(); }
};

// ---------------------------------------------------------------------------
// UJIIndoorLoc CSV

namespace detail {

inline std::string wap_column_name(std::size_t index_1based) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "WAP%03zu", index_1based);
  return buffer;
}

/// Returns the 1-based AP number when `name` looks like WAPnnn, else 0.
inline std::size_t wap_number(std::string_view name) {
  if (name.size() < 4 || !name.starts_with("WAP")) return 0;
  std::size_t value = 0;
  for (char c : name.substr(3)) {
    if (c < '0' || c > '9') return 0;
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

inline constexpr std::array<std::string_view, 5> kIgnoredColumns = {
    "SPACEID", "RELATIVEPOSITION", "USERID", "PHONEID", "TIMESTAMP"};

inline void check_cell_count(std::size_t row, std::size_t got, std::size_t expected) {
  if (got != expected) {
    throw ParseError(row, got, "ragged row: expected " + std::to_string(expected) +
                                   " cells, found " + std::to_string(got));
  }
}

}  // namespace detail

/// Parses UJIIndoorLoc-format text. The header must contain a contiguous run
/// WAP001..WAPnnn plus LONGITUDE, LATITUDE, FLOOR and BUILDINGID; the
/// UJIIndoorLoc bookkeeping columns are accepted and ignored. RSSI cells are
/// kept verbatim (including the 100 sentinel). Record ids are 0-based data
/// row indices. Floor and building counts are max id + 1.
inline Dataset parse_ujiindoorloc(std::string_view csv_text) {
  const auto lines = csv::split_lines(csv_text);
  if (lines.empty()) throw FormatError("empty input: missing header row");
  const auto header = csv::split_cells(lines.front());

  std::vector<std::size_t> wap_column;  // AP index -> cell index
  std::unordered_map<std::string, std::size_t> named;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(header[c]);
    if (const std::size_t number = detail::wap_number(name); number > 0) {
      if (number > wap_column.size()) wap_column.resize(number, SIZE_MAX);
      if (wap_column[number - 1] != SIZE_MAX) throw FormatError("duplicate column " + name);
      wap_column[number - 1] = c;
      continue;
    }
    if (std::find(detail::kIgnoredColumns.begin(), detail::kIgnoredColumns.end(), name) !=
        detail::kIgnoredColumns.end()) {
      continue;
    }
    if (!named.emplace(name, c).second) throw FormatError("duplicate column " + name);
  }
  if (wap_column.empty()) throw FormatError("missing mandatory column WAP001");
  for (std::size_t i = 0; i < wap_column.size(); ++i) {
    if (wap_column[i] == SIZE_MAX) {
      throw FormatError("missing mandatory column " + detail::wap_column_name(i + 1));
    }
  }
  std::array<std::size_t, 4> label_column{};
  constexpr std::array<std::string_view, 4> kLabelNames = {"LONGITUDE", "LATITUDE", "FLOOR",
                                                           "BUILDINGID"};
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    const auto it = named.find(std::string(kLabelNames[i]));
    if (it == named.end()) {
      throw FormatError("missing mandatory column " + std::string(kLabelNames[i]));
    }
    label_column[i] = it->second;
    named.erase(it);
  }
  if (!named.empty()) throw FormatError("unexpected column " + named.begin()->first);

  Dataset dataset;
  dataset.num_aps = wap_column.size();
  dataset.records.reserve(lines.size() - 1);
  int max_floor = 0;
  int max_building = 0;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = csv::split_cells(lines[r]);
    const std::size_t row = r + 1;  // 1-based file line
    detail::check_cell_count(row, cells.size(), header.size());
    Record record;
    record.id = r - 1;
    record.fingerprint.resize(dataset.num_aps);
    for (std::size_t ap = 0; ap < dataset.num_aps; ++ap) {
      const std::size_t c = wap_column[ap];
      record.fingerprint[ap] = csv::parse_double(cells[c], row, c + 1);
    }
    record.label.longitude = csv::parse_double(cells[label_column[0]], row, label_column[0] + 1);
    record.label.latitude = csv::parse_double(cells[label_column[1]], row, label_column[1] + 1);
    const auto floor = csv::parse_int(cells[label_column[2]], row, label_column[2] + 1);
    const auto building = csv::parse_int(cells[label_column[3]], row, label_column[3] + 1);
    if (floor < 0 || floor > 1000) throw ParseError(row, label_column[2] + 1, "floor out of range");
    if (building < 0 || building > 1000) {
      throw ParseError(row, label_column[3] + 1, "building out of range");
    }
    record.label.floor = static_cast<int>(floor);
    record.label.building = static_cast<int>(building);
    max_floor = std::max(max_floor, record.label.floor);
    max_building = std::max(max_building, record.label.building);
    dataset.records.push_back(std::move(record));
  }
  dataset.num_floors = max_floor + 1;
  dataset.num_buildings = max_building + 1;
  return dataset;
}

/// Canonical re-serialization in the UJIIndoorLoc column layout. Numbers use
/// the shortest form that parses back to the identical double.
inline std::string to_csv(const Dataset& dataset) {
  std::string out;
  out.reserve(dataset.size() * (dataset.num_aps * 4 + 48) + dataset.num_aps * 8);
  for (std::size_t ap = 0; ap < dataset.num_aps; ++ap) {
    out += detail::wap_column_name(ap + 1);
    out += ',';
  }
  out += "LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n";
  for (const Record& record : dataset.records) {
    for (double v : record.fingerprint) {
      out += csv::format_exact(v);
      out += ',';
    }
    out += csv::format_exact(record.label.longitude);
    out += ',';
    out += csv::format_exact(record.label.latitude);
    out += ',';
    out += std::to_string(record.label.floor);
    out += ',';
    out += std::to_string(record.label.building);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

/// Builds the map for `scheme` from the observed values of `dataset`.
/// minmax_unit: "not detected" becomes (weakest observed value - 1 dB) and
/// the range [that, strongest observed] maps onto [0, 1].
/// zero_penalty: v -> (v + 104) / 104 clipped to [0, 1]; "not detected" -> 0.
inline NormalizationMap make_normalization(const Dataset& dataset, Normalization scheme) {
  NormalizationMap map;
  map.scheme = scheme;
  if (scheme == Normalization::zero_penalty) return map;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Record& record : dataset.records) {
    for (double v : record.fingerprint) {
      if (v == kNotDetected) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) {
    // Nothing detected anywhere: every value maps to 0.
    lo = kWeakestRssi;
    hi = kWeakestRssi + 1.0;
  }
  map.sentinel_dbm = lo - 1.0;
  map.low_dbm = lo - 1.0;
  map.high_dbm = hi;
  return map;
}

inline Dataset normalize_rssi(Dataset dataset, Normalization scheme) {
  if (dataset.normalized()) throw StateError("dataset is already normalized");
  const NormalizationMap map = make_normalization(dataset, scheme);
  for (Record& record : dataset.records) {
    for (double& v : record.fingerprint) v = map.apply(v);
  }
  dataset.normalization = map;
  return dataset;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.7;
  double cal_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t cal = 0;
  std::size_t test = 0;

  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

struct DatasetSplit {
  Dataset train;
  Dataset cal;
  Dataset test;
};

inline void validate(const SplitSpec& spec) {
  const double fractions[] = {spec.train_fraction, spec.cal_fraction, spec.test_fraction};
  for (double f : fractions) {
    if (!(f > 0.0) || !(f < 1.0)) throw ConfigError("split fractions must lie in (0, 1)");
  }
  if (std::fabs(spec.train_fraction + spec.cal_fraction + spec.test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

/// Calibration and test sizes are floor(n * fraction); the training split
/// absorbs the remainder. The 1e-9 nudge keeps products such as 10 * 0.7
/// from flooring one short because of binary rounding.
inline SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  validate(spec);
  const auto alloc = [n](double fraction) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
  };
  SplitSizes sizes;
  sizes.cal = alloc(spec.cal_fraction);
  sizes.test = alloc(spec.test_fraction);
  if (sizes.cal + sizes.test > n) throw ConfigError("split does not fit the dataset");
  sizes.train = n - sizes.cal - sizes.test;
  if (sizes.train == 0 || sizes.cal == 0 || sizes.test == 0) {
    throw ConfigError("a split is empty after rounding (n = " + std::to_string(n) + ")");
  }
  return sizes;
}

inline Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_aps = dataset.num_aps;
  out.num_floors = dataset.num_floors;
  out.num_buildings = dataset.num_buildings;
  out.normalization = dataset.normalization;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(dataset.records.at(i));
  return out;
}

/// Seeded uniform permutation followed by a contiguous cut into
/// train | cal | test.
inline DatasetSplit split_dataset(const Dataset& dataset, const SplitSpec& spec) {
  if (dataset.size() < 10) throw ConfigError("splitting needs at least 10 records");
  const SplitSizes sizes = split_sizes(dataset.size(), spec);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span(order));
  const std::span<const std::size_t> all(order);
  return {subset(dataset, all.subspan(0, sizes.train)),
          subset(dataset, all.subspan(sizes.train, sizes.cal)),
          subset(dataset, all.subspan(sizes.train + sizes.cal, sizes.test))};
}

}  // namespace cpindoor
