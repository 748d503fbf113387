#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpindoor/csv.hpp"
#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/predictor.hpp"
#include "cpindoor/random.hpp"
#include "cpindoor/risk_control.hpp"
#include "cpindoor/synthetic.hpp"

namespace cpindoor {

/// Synthetic walking routes through a SyntheticWorld.
struct PathConfig {
  std::size_t num_paths = 50;
  std::size_t path_length = 30;
  double membership_fraction = 0.4;  // share of points with P = 1
  double step_m = 1.5;
  double turn_sigma_rad = 0.35;
  std::uint64_t seed = 0;
};

/// Random walk with Gaussian heading changes, reflected at the area border.
/// Each path stays on one floor; exactly round(fraction * length) points are
/// marked as path members, chosen uniformly. Fingerprints are raw dBm.
inline std::vector<Path> generate_paths(const SyntheticWorld& world, const PathConfig& config) {
  if (config.path_length < 1) throw ConfigError("path_length must be >= 1");
  if (!(config.membership_fraction >= 0.0 && config.membership_fraction <= 1.0)) {
    throw ConfigError("membership_fraction must lie in [0, 1]");
  }
  const auto& wc = world.config();
  Rng rng(config.seed);
  std::vector<Path> paths;
  paths.reserve(config.num_paths);
  const auto members = static_cast<std::size_t>(
      std::lround(config.membership_fraction * static_cast<double>(config.path_length)));
  for (std::size_t p = 0; p < config.num_paths; ++p) {
    Path path;
    path.id = p;
    Coords at{rng.uniform(0.0, wc.width_m), rng.uniform(0.0, wc.height_m)};
    const int floor = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(wc.num_floors)));
    double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t s = 0; s < config.path_length; ++s) {
      PathSample sample;
      sample.truth = at;
      sample.fingerprint = world.observe(at, floor, rng);
      path.samples.push_back(std::move(sample));

      heading += rng.normal(0.0, config.turn_sigma_rad);
      at.longitude += config.step_m * std::cos(heading);
      at.latitude += config.step_m * std::sin(heading);
      if (at.longitude < 0.0 || at.longitude > wc.width_m) {
        at.longitude = std::clamp(at.longitude, 0.0, wc.width_m);
        heading = std::numbers::pi - heading;
      }
      if (at.latitude < 0.0 || at.latitude > wc.height_m) {
        at.latitude = std::clamp(at.latitude, 0.0, wc.height_m);
        heading = -heading;
      }
    }
    std::vector<std::size_t> order(config.path_length);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < members; ++i) path.samples[order[i]].membership = true;
    paths.push_back(std::move(path));
  }
  return paths;
}

/// Fills every sample's prediction, normalizing raw fingerprints with the
/// model's map first.
inline void predict_paths(const KnnModel& model, std::span<Path> paths) {
  for (Path& path : paths) {
    for (PathSample& s : path.samples) {
      s.predicted = model.predict(model.normalization().apply(s.fingerprint)).coords;
    }
  }
}

// ---------------------------------------------------------------------------
// Path CSV: PATH_ID, SEQ, WAP001..WAPnnn, LONGITUDE, LATITUDE, MEMBERSHIP,
// optionally followed by PRED_LON, PRED_LAT.

inline std::string paths_to_csv(std::span<const Path> paths, bool with_predictions) {
  std::size_t num_aps = 0;
  for (const Path& path : paths) {
    for (const PathSample& s : path.samples) num_aps = std::max(num_aps, s.fingerprint.size());
  }
  std::string out = "PATH_ID,SEQ";
  for (std::size_t ap = 0; ap < num_aps; ++ap) out += "," + detail::wap_column_name(ap + 1);
  out += ",LONGITUDE,LATITUDE,MEMBERSHIP";
  if (with_predictions) out += ",PRED_LON,PRED_LAT";
  out += '\n';
  for (const Path& path : paths) {
    for (std::size_t seq = 0; seq < path.samples.size(); ++seq) {
      const PathSample& s = path.samples[seq];
      if (s.fingerprint.size() != num_aps) throw ContractError("paths have different AP counts");
      out += std::to_string(path.id) + ',' + std::to_string(seq);
      for (double v : s.fingerprint) out += ',' + csv::format_exact(v);
      out += ',' + csv::format_exact(s.truth.longitude) + ',' + csv::format_exact(s.truth.latitude);
      out += s.membership ? ",1" : ",0";
      if (with_predictions) {
        if (!s.predicted) throw StateError("path sample has no prediction to write");
        out += ',' + csv::format_exact(s.predicted->longitude) + ',' +
               csv::format_exact(s.predicted->latitude);
      }
      out += '\n';
    }
  }
  return out;
}

/// Rows are grouped by PATH_ID (paths ordered by id) and ordered by SEQ.
inline std::vector<Path> parse_paths(std::string_view csv_text) {
  const auto lines = csv::split_lines(csv_text);
  if (lines.empty()) throw FormatError("empty path file: missing header row");
  const auto header = csv::split_cells(lines.front());
  std::map<std::string, std::size_t, std::less<>> columns;
  std::vector<std::size_t> wap_column;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (const std::size_t number = detail::wap_number(header[c]); number > 0) {
      if (number > wap_column.size()) wap_column.resize(number, SIZE_MAX);
      wap_column[number - 1] = c;
    } else {
      columns.emplace(std::string(header[c]), c);
    }
  }
  for (std::size_t i = 0; i < wap_column.size(); ++i) {
    if (wap_column[i] == SIZE_MAX) throw FormatError("missing mandatory column " + detail::wap_column_name(i + 1));
  }
  const auto column = [&](std::string_view name) {
    const auto it = columns.find(name);
    if (it == columns.end()) throw FormatError("missing mandatory column " + std::string(name));
    return it->second;
  };
  const std::size_t c_path = column("PATH_ID");
  const std::size_t c_seq = column("SEQ");
  const std::size_t c_lon = column("LONGITUDE");
  const std::size_t c_lat = column("LATITUDE");
  const std::size_t c_member = column("MEMBERSHIP");
  const bool has_pred = columns.contains("PRED_LON") || columns.contains("PRED_LAT");
  const std::size_t c_plon = has_pred ? column("PRED_LON") : 0;
  const std::size_t c_plat = has_pred ? column("PRED_LAT") : 0;

  std::map<std::size_t, std::map<std::int64_t, PathSample>> grouped;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t row = r + 1;
    const auto cells = csv::split_cells(lines[r]);
    detail::check_cell_count(row, cells.size(), header.size());
    const auto path_id = csv::parse_int(cells[c_path], row, c_path + 1);
    const auto seq = csv::parse_int(cells[c_seq], row, c_seq + 1);
    if (path_id < 0) throw ParseError(row, c_path + 1, "negative path id");
    PathSample s;
    s.fingerprint.resize(wap_column.size());
    for (std::size_t ap = 0; ap < wap_column.size(); ++ap) {
      s.fingerprint[ap] = csv::parse_double(cells[wap_column[ap]], row, wap_column[ap] + 1);
    }
    s.truth = {csv::parse_double(cells[c_lon], row, c_lon + 1), csv::parse_double(cells[c_lat], row, c_lat + 1)};
    const auto member = csv::parse_int(cells[c_member], row, c_member + 1);
    if (member != 0 && member != 1) throw ParseError(row, c_member + 1, "MEMBERSHIP must be 0 or 1");
    s.membership = member == 1;
    if (has_pred) {
      s.predicted = Coords{csv::parse_double(cells[c_plon], row, c_plon + 1),
                           csv::parse_double(cells[c_plat], row, c_plat + 1)};
    }
    if (!grouped[static_cast<std::size_t>(path_id)].emplace(seq, std::move(s)).second) {
      throw ParseError(row, c_seq + 1, "duplicate SEQ within path");
    }
  }
  std::vector<Path> paths;
  for (auto& [id, samples] : grouped) {
    Path path;
    path.id = id;
    for (auto& [seq, sample] : samples) path.samples.push_back(std::move(sample));
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace cpindoor
