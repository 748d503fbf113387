#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cpindoor/dataset.hpp"

namespace testing_support {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cpindoor_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Plain getline-based CSV reader used as an oracle for the parsers.
inline std::vector<std::vector<std::string>> naive_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream cells_in(line);
    std::string cell;
    while (std::getline(cells_in, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

inline cpindoor::Record make_record(std::size_t id, std::vector<double> fingerprint, double lon, double lat,
                                    int floor = 0, int building = 0) {
  cpindoor::Record r;
  r.id = id;
  r.fingerprint = std::move(fingerprint);
  r.label = {lon, lat, floor, building};
  return r;
}

/// Already-normalized dataset from records (features used as-is).
inline cpindoor::Dataset normalized_dataset(std::vector<cpindoor::Record> records, int floors = 1, int buildings = 1) {
  cpindoor::Dataset d;
  d.num_aps = records.empty() ? 0 : records.front().fingerprint.size();
  d.records = std::move(records);
  d.num_floors = floors;
  d.num_buildings = buildings;
  d.normalization = cpindoor::NormalizationMap{cpindoor::Normalization::zero_penalty, 100.0, -104.0, 0.0};
  return d;
}

}  // namespace testing_support
