#pragma once

#include <string_view>

#include "cpindoor/cpindoor.hpp"

namespace uji {

struct PipelineResult {
  std::size_t records = 0;
  std::size_t waps = 0;
  std::size_t n_cal = 0;
  std::size_t n_test = 0;
  double qhat = 0.0;
  double coverage = 0.0;
};

/// Parse, normalize, 70/10/20 split, k-NN (k = 5), calibrate coordinates at
/// alpha and measure test coverage.
inline PipelineResult run(std::string_view csv_text, double alpha, std::uint64_t seed) {
  using namespace cpindoor;
  const Dataset raw = parse_ujiindoorloc(csv_text);
  PipelineResult r;
  r.records = raw.size();
  r.waps = raw.num_aps;
  const DatasetSplit parts =
      split_dataset(normalize_rssi(raw, Normalization::zero_penalty), {0.7, 0.1, 0.2, derive_seed(seed, "split")});
  const KnnModel model = fit_knn(parts.train, {5, Weighting::uniform});
  const auto rows = alpha_sweep(model, parts.cal, parts.test, std::vector<double>{alpha}, Task::coords, seed);
  r.n_cal = rows[0].n_cal;
  r.n_test = rows[0].n_test;
  r.qhat = rows[0].threshold;
  r.coverage = rows[0].empirical_coverage;
  return r;
}

}  // namespace uji
