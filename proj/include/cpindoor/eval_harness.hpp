#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/nonconformity.hpp"
#include "cpindoor/paths.hpp"
#include "cpindoor/predictor.hpp"
#include "cpindoor/pvalue.hpp"
#include "cpindoor/random.hpp"
#include "cpindoor/report.hpp"
#include "cpindoor/risk_control.hpp"
#include "cpindoor/split_conformal.hpp"
#include "cpindoor/synthetic.hpp"

namespace cpindoor {

/// The 20-point alpha grid of the published set-size table (0 to 1).
inline std::vector<double> default_alpha_grid() {
  return {0.0,   0.052, 0.105, 0.158, 0.211, 0.263, 0.316, 0.368, 0.421, 0.474,
          0.526, 0.579, 0.632, 0.684, 0.737, 0.789, 0.842, 0.895, 0.947, 1.0};
}

struct SweepRow {
  double alpha = 0.0;
  double target_coverage = 1.0;
  double empirical_coverage = 0.0;
  double avg_set_size = 0.0;  // class tasks only; 0 for coordinate regions
  double threshold = 0.0;     // q-hat; may be +/-inf
  std::size_t n_cal = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline void require_disjoint(const Dataset& a, const Dataset& b) {
  std::set<std::size_t> ids;
  for (const Record& r : a.records) ids.insert(r.id);
  for (const Record& r : b.records) {
    if (ids.contains(r.id)) throw ContractError("calibration and test sets share record " + std::to_string(r.id));
  }
}

}  // namespace detail

/// One row per alpha: calibrate q-hat once on `cal`, build a set for every
/// test record and record coverage (and mean set size for class tasks).
template <PredictionSource Source>
std::vector<SweepRow> alpha_sweep(const Source& source, const Dataset& cal, const Dataset& test,
                                  std::span<const double> alphas, Task task, std::uint64_t seed = 0) {
  detail::require_disjoint(cal, test);
  if (test.empty()) throw ContractError("alpha_sweep: empty test set");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ContractError("alpha_sweep: alphas must lie in [0, 1]");
  }
  const CalibrationScores scores = score_calibration_set(source, cal, task);
  require_coverage(source, test);
  std::vector<PredictionOutput> predictions;
  predictions.reserve(test.size());
  for (const Record& record : test.records) predictions.push_back(source.predict(record));

  std::vector<SweepRow> rows;
  rows.reserve(alphas.size());
  for (double alpha : alphas) {
    const ConformalQuantile q = conformal_quantile(scores, alpha);
    SweepRow row;
    row.alpha = alpha;
    row.target_coverage = 1.0 - alpha;
    row.threshold = q.value;
    row.n_cal = cal.size();
    row.n_test = test.size();
    row.seed = seed;
    if (task == Task::coords) {
      std::vector<RegionPredictionSet> sets;
      std::vector<Coords> truths;
      for (std::size_t i = 0; i < test.size(); ++i) {
        sets.push_back(region_prediction_set(predictions[i].coords, q));
        truths.push_back(test.records[i].label.coords());
      }
      row.empirical_coverage = evaluate_coverage(sets, truths);
    } else {
      std::vector<ClassPredictionSet> sets;
      std::vector<int> truths;
      for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& probs = task == Task::building ? predictions[i].building_probs : predictions[i].floor_probs;
        sets.push_back(class_prediction_set(probs, q));
        const auto& label = test.records[i].label;
        truths.push_back(task == Task::building ? label.building : label.floor);
      }
      row.empirical_coverage = evaluate_coverage(sets, truths);
      row.avg_set_size = average_set_size(sets);
    }
    rows.push_back(row);
  }
  return rows;
}

/// End-to-end coverage trial on a raw (unnormalized) dataset: normalize,
/// split with `split.seed`, fit k-NN on train, sweep cal/test.
inline std::vector<SweepRow> coverage_trial(const Dataset& raw, const SplitSpec& split, Normalization scheme,
                                            const KnnConfig& knn, std::span<const double> alphas, Task task) {
  const DatasetSplit parts = split_dataset(normalize_rssi(raw, scheme), split);
  const KnnModel model = fit_knn(parts.train, knn);
  return alpha_sweep(model, parts.cal, parts.test, alphas, task, split.seed);
}

struct SweepAggregate {
  double alpha = 0.0;
  double mean_coverage = 0.0;
  double sd_coverage = 0.0;
  double mean_set_size = 0.0;
  double sd_set_size = 0.0;
  std::size_t trials = 0;
};

namespace detail {

inline std::pair<double, double> mean_sd(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace detail

/// Per-alpha mean and sample standard deviation across trials, in order of
/// first appearance of each alpha.
inline std::vector<SweepAggregate> aggregate_sweeps(std::span<const SweepRow> rows) {
  std::vector<double> alphas;
  for (const SweepRow& r : rows) {
    if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) alphas.push_back(r.alpha);
  }
  std::vector<SweepAggregate> out;
  for (double alpha : alphas) {
    std::vector<double> coverage;
    std::vector<double> size;
    for (const SweepRow& r : rows) {
      if (r.alpha != alpha) continue;
      coverage.push_back(r.empirical_coverage);
      size.push_back(r.avg_set_size);
    }
    SweepAggregate a;
    a.alpha = alpha;
    a.trials = coverage.size();
    std::tie(a.mean_coverage, a.sd_coverage) = detail::mean_sd(coverage);
    std::tie(a.mean_set_size, a.sd_set_size) = detail::mean_sd(size);
    out.push_back(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Risk-control sweeps

struct RiskRow {
  double beta = 0.0;
  double lambda_hat = 0.0;
  double test_risk = 0.0;
  double cal_risk = 0.0;
  double threshold = 0.0;
  std::size_t grid_index = 0;
  std::size_t n_cal = 0;
  std::size_t n_test = 0;
  bool fallback = false;
  bool property3_violated = false;
};

/// One row per beta: calibrate lambda-hat on `cal_paths` over `grid`, then
/// measure the mean loss on `test_paths`.
inline std::vector<RiskRow> risk_sweep(std::span<const Path> cal_paths, std::span<const Path> test_paths,
                                       std::span<const double> betas, const PathLoss& loss,
                                       std::span<const double> grid) {
  if (cal_paths.empty()) throw ContractError("risk_sweep: needs at least one calibration path");
  const LossCurve curve = build_loss_curve(cal_paths, grid, loss);
  std::vector<RiskRow> rows;
  for (double beta : betas) {
    RiskConfig config;
    config.beta = beta;
    config.bound = loss.bound();
    config.lambda_grid.assign(grid.begin(), grid.end());
    config.direction = loss.direction();
    const LambdaCalibration cal = calibrate_lambda(curve, config);
    RiskRow row;
    row.beta = beta;
    row.lambda_hat = cal.lambda_hat;
    row.test_risk = evaluate_risk(cal.lambda_hat, test_paths, loss);
    row.cal_risk = cal.empirical_risk;
    row.threshold = cal.threshold;
    row.grid_index = cal.grid_index;
    row.n_cal = cal_paths.size();
    row.n_test = test_paths.size();
    row.fallback = cal.fallback;
    row.property3_violated = cal.property3_violated;
    rows.push_back(row);
  }
  return rows;
}

/// Calibration and test paths walked through one synthetic world, with
/// predictions from a k-NN model fitted on a survey of that world.
struct PathExperiment {
  std::vector<Path> cal_paths;
  std::vector<Path> test_paths;
};

struct PathExperimentConfig {
  SyntheticWorldConfig world;
  std::size_t survey_samples = 400;
  Normalization normalization = Normalization::zero_penalty;
  KnnConfig knn;
  PathConfig cal_paths;   // seed overwritten from `seed`
  PathConfig test_paths;  // seed overwritten from `seed`
  std::uint64_t seed = 0;
};

/// Stage seeds: world <- derive(seed, "world"), survey <- derive(seed,
/// "survey"), cal paths <- derive(seed, "cal_paths"), test paths <-
/// derive(seed, "test_paths"). Cal and test paths are i.i.d. draws.
inline PathExperiment make_path_experiment(const PathExperimentConfig& config) {
  SyntheticWorldConfig wc = config.world;
  wc.seed = derive_seed(config.seed, "world");
  const SyntheticWorld world(wc);
  const Dataset survey =
      normalize_rssi(world.generate(config.survey_samples, derive_seed(config.seed, "survey")), config.normalization);
  const KnnModel model = fit_knn(survey, config.knn);
  PathConfig cal = config.cal_paths;
  cal.seed = derive_seed(config.seed, "cal_paths");
  PathConfig test = config.test_paths;
  test.seed = derive_seed(config.seed, "test_paths");
  PathExperiment out{generate_paths(world, cal), generate_paths(world, test)};
  predict_paths(model, out.cal_paths);
  predict_paths(model, out.test_paths);
  return out;
}

// ---------------------------------------------------------------------------
// Report tables

inline Table to_table(std::span<const SweepRow> rows) {
  Table t{{"alpha", "target_coverage", "empirical_coverage", "avg_set_size", "qhat", "n_cal", "n_test", "seed"}, {}};
  for (const SweepRow& r : rows) {
    t.add_row({r.alpha, r.target_coverage, r.empirical_coverage, r.avg_set_size, r.threshold,
               static_cast<std::int64_t>(r.n_cal), static_cast<std::int64_t>(r.n_test), std::to_string(r.seed)});
  }
  return t;
}

inline Table to_table(std::span<const SweepAggregate> rows) {
  Table t{{"alpha", "mean_coverage", "sd_coverage", "mean_set_size", "sd_set_size", "trials"}, {}};
  for (const SweepAggregate& r : rows) {
    t.add_row({r.alpha, r.mean_coverage, r.sd_coverage, r.mean_set_size, r.sd_set_size,
               static_cast<std::int64_t>(r.trials)});
  }
  return t;
}

inline Table to_table(std::span<const RiskRow> rows) {
  Table t{{"beta", "lambda_hat", "test_risk", "cal_risk", "threshold", "grid_index", "n_cal", "n_test", "fallback",
           "property3_violated"},
          {}};
  for (const RiskRow& r : rows) {
    t.add_row({r.beta, r.lambda_hat, r.test_risk, r.cal_risk, r.threshold, static_cast<std::int64_t>(r.grid_index),
               static_cast<std::int64_t>(r.n_cal), static_cast<std::int64_t>(r.n_test),
               static_cast<std::int64_t>(r.fallback), static_cast<std::int64_t>(r.property3_violated)});
  }
  return t;
}

/// Filter report schema: ID, SCORE, PVALUE, RETAINED.
inline Table to_table(const FilterReport& report) {
  Table t{{"ID", "SCORE", "PVALUE", "RETAINED"}, {}};
  for (const FilterDecision& d : report.decisions) {
    t.add_row({static_cast<std::int64_t>(d.id), d.score, d.pvalue.value, static_cast<std::int64_t>(d.retained)});
  }
  return t;
}

inline Table to_table(const SuperUniformityReport& report) {
  Table t{{"alpha", "fraction_at_or_below", "exceeded"}, {}};
  for (const SuperUniformityRow& r : report.rows) {
    t.add_row({r.alpha, r.fraction, static_cast<std::int64_t>(r.exceeded)});
  }
  return t;
}

/// `{experiment}_{task}_{seed}` plus the format's extension.
inline std::string report_file_name(std::string_view experiment, std::string_view task, std::uint64_t seed,
                                    ReportFormat format) {
  return std::string(experiment) + "_" + std::string(task) + "_" + std::to_string(seed) +
         std::string(extension(format));
}

}  // namespace cpindoor
