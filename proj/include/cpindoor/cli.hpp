#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/eval_harness.hpp"
#include "cpindoor/nonconformity.hpp"
#include "cpindoor/paths.hpp"
#include "cpindoor/predictor.hpp"
#include "cpindoor/pvalue.hpp"
#include "cpindoor/random.hpp"
#include "cpindoor/report.hpp"
#include "cpindoor/risk_control.hpp"
#include "cpindoor/split_conformal.hpp"
#include "cpindoor/synthetic.hpp"

// Command-line pipeline. Every option is also a config-file key of the same
// name (`key = value` lines, `#` comments); flags override the file.
//
// Seeds: all randomness derives from --seed. Stage seeds are
// derive_seed(seed, "synth") for the synthetic world, derive_seed(seed,
// "split") for the split permutation and derive_seed(seed, "paths") for
// synthetic path experiments. Sweep trial t > 0 replaces the root seed by
// derive_seed(seed, t).
namespace cpindoor::cli {

struct RunConfig {
  std::string subcommand;
  std::string data_path;
  SyntheticWorldConfig synth;
  std::string normalization = "zero_penalty";
  double train_fraction = 0.7;
  double cal_fraction = 0.1;
  double test_fraction = 0.2;
  std::size_t k = 5;
  std::string weighting = "uniform";
  std::string predictions_path;
  std::string task = "coords";
  double alpha = 0.1;
  std::vector<double> alphas;
  double beta = 0.1;
  std::vector<double> betas;
  std::string family = "both";
  std::string lambda_grid = "geometric";
  std::size_t grid_size = 64;
  std::string loss_form = "proportion";
  double loss_clip = 1.0;
  std::string cal_paths_path;
  std::string test_paths_path;
  std::size_t num_paths = 50;
  std::size_t path_length = 30;
  double membership = 0.4;
  std::size_t survey_samples = 400;
  double pvalue_alpha = 0.1;
  std::size_t window = 1;
  std::size_t trials = 1;
  std::string format = "csv";
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool synthetic_requested = false;
  bool knn_requested = false;
};

namespace detail {

inline std::uint64_t stage_seed(const RunConfig& c, std::string_view stage) { return derive_seed(c.seed, stage); }

inline Dataset load_raw_dataset(const RunConfig& c) {
  if (!c.data_path.empty()) return parse_ujiindoorloc(read_file(c.data_path));
  SyntheticWorldConfig world = c.synth;
  world.seed = stage_seed(c, "synth");
  return generate_synthetic(world);
}

inline SplitSpec split_spec(const RunConfig& c) {
  return {c.train_fraction, c.cal_fraction, c.test_fraction, stage_seed(c, "split")};
}

inline DatasetSplit normalized_split(const RunConfig& c) {
  return split_dataset(normalize_rssi(load_raw_dataset(c), parse_normalization(c.normalization)), split_spec(c));
}

inline KnnConfig knn_config(const RunConfig& c) { return {c.k, parse_weighting(c.weighting)}; }

inline Dataset merged(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  return out;
}

using Source = std::variant<KnnModel, PredictionTable>;

/// k-NN fitted on the training split, or imported predictions covering the
/// calibration and test splits.
inline Source prediction_source(const RunConfig& c, const DatasetSplit& parts) {
  if (!c.predictions_path.empty()) {
    return import_predictions(read_file(c.predictions_path), merged(parts.cal, parts.test));
  }
  return fit_knn(parts.train, knn_config(c));
}

inline std::filesystem::path out_path(const RunConfig& c, const std::string& name) {
  return std::filesystem::path(c.out_dir) / name;
}

inline ReportFormat format(const RunConfig& c) { return parse_report_format(c.format); }

inline std::string report_name(const RunConfig& c, std::string_view experiment, std::string_view task) {
  return report_file_name(experiment, task, c.seed, format(c));
}

inline std::vector<LossFamily> families(const RunConfig& c) {
  if (c.family == "both") return {LossFamily::fdr, LossFamily::fnr};
  return {parse_loss_family(c.family)};
}

// -- subcommands ------------------------------------------------------------

inline void run_synth(const RunConfig& c, std::ostream& out) {
  const Dataset dataset = load_raw_dataset(c);
  write_file_atomic(out_path(c, "dataset.csv"), to_csv(dataset));
  out << "wrote " << dataset.size() << " synthetic records\n";
}

inline void run_ingest(const RunConfig& c, std::ostream& out) {
  const Dataset dataset = load_raw_dataset(c);
  std::size_t undetected = 0;
  for (const Record& r : dataset.records) {
    for (double v : r.fingerprint) undetected += v == kNotDetected ? 1 : 0;
  }
  write_file_atomic(out_path(c, "dataset.csv"), to_csv(dataset));
  Table t{{"records", "num_aps", "num_floors", "num_buildings", "undetected_fraction"}, {}};
  t.add_row({static_cast<std::int64_t>(dataset.size()), static_cast<std::int64_t>(dataset.num_aps),
             static_cast<std::int64_t>(dataset.num_floors), static_cast<std::int64_t>(dataset.num_buildings),
             static_cast<double>(undetected) / static_cast<double>(dataset.size() * dataset.num_aps)});
  emit_report(t, format(c), out_path(c, std::string("ingest_summary") + std::string(extension(format(c)))));
  out << "ingested " << dataset.size() << " records, " << dataset.num_aps << " access points\n";
}

inline void run_split(const RunConfig& c, std::ostream& out) {
  const DatasetSplit parts = split_dataset(load_raw_dataset(c), split_spec(c));
  write_file_atomic(out_path(c, "train.csv"), to_csv(parts.train));
  write_file_atomic(out_path(c, "cal.csv"), to_csv(parts.cal));
  write_file_atomic(out_path(c, "test.csv"), to_csv(parts.test));
  Table t{{"split", "records"}, {}};
  t.add_row({std::string("train"), static_cast<std::int64_t>(parts.train.size())});
  t.add_row({std::string("cal"), static_cast<std::int64_t>(parts.cal.size())});
  t.add_row({std::string("test"), static_cast<std::int64_t>(parts.test.size())});
  emit_report(t, format(c), out_path(c, std::string("split_summary") + std::string(extension(format(c)))));
  out << "split " << parts.train.size() << "/" << parts.cal.size() << "/" << parts.test.size() << "\n";
}

inline void run_fit(const RunConfig& c, std::ostream& out) {
  if (!c.predictions_path.empty()) throw ConfigError("fit trains the built-in k-NN; drop --predictions");
  const DatasetSplit parts = normalized_split(c);
  const KnnModel model = fit_knn(parts.train, knn_config(c));
  const PredictionTable table = predict_all(model, merged(parts.cal, parts.test));
  write_file_atomic(out_path(c, "predictions.csv"), export_predictions(table));
  out << "fitted k-NN (k = " << c.k << ") on " << parts.train.size() << " records; wrote " << table.size()
      << " predictions\n";
}

inline void run_calibrate(const RunConfig& c, std::ostream& out) {
  const DatasetSplit parts = normalized_split(c);
  const Task task = parse_task(c.task);
  const Source source = prediction_source(c, parts);
  const CalibrationScores scores =
      std::visit([&](const auto& s) { return score_calibration_set(s, parts.cal, task); }, source);
  const ConformalQuantile q = conformal_quantile(scores, c.alpha);
  Table summary{{"alpha", "n_cal", "k_index", "qhat", "score_kind"}, {}};
  summary.add_row({q.alpha, static_cast<std::int64_t>(q.n), q.k_index, q.value, std::string(to_string(q.kind))});
  emit_report(summary, format(c), out_path(c, report_name(c, "calibration", c.task)));
  Table listing{{"rank", "score"}, {}};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    listing.add_row({static_cast<std::int64_t>(i + 1), scores.values()[i]});
  }
  emit_report(listing, format(c), out_path(c, report_name(c, "scores", c.task)));
  out << "qhat = " << csv::format_fixed6(q.value) << " (k = " << q.k_index << " of n = " << q.n << ")\n";
}

inline void run_predict_sets(const RunConfig& c, std::ostream& out) {
  const DatasetSplit parts = normalized_split(c);
  const Task task = parse_task(c.task);
  const Source source = prediction_source(c, parts);
  std::visit(
      [&](const auto& s) {
        const ConformalQuantile q = conformal_quantile(score_calibration_set(s, parts.cal, task), c.alpha);
        require_coverage(s, parts.test);
        Table t;
        std::size_t covered = 0;
        if (task == Task::coords) {
          t.columns = {"ID", "PRED_LON", "PRED_LAT", "RADIUS", "TRUE_LON", "TRUE_LAT", "COVERED"};
          for (const Record& r : parts.test.records) {
            const auto region = region_prediction_set(s.predict(r).coords, q);
            const bool hit = region.contains(r.label.coords());
            covered += hit;
            t.add_row({static_cast<std::int64_t>(r.id), region.center.longitude, region.center.latitude,
                       region.radius, r.label.longitude, r.label.latitude, static_cast<std::int64_t>(hit)});
          }
        } else {
          t.columns = {"ID", "SET", "SET_SIZE", "TRUTH", "COVERED"};
          for (const Record& r : parts.test.records) {
            const auto prediction = s.predict(r);
            const auto& probs = task == Task::building ? prediction.building_probs : prediction.floor_probs;
            const auto set = class_prediction_set(probs, q);
            const int truth = task == Task::building ? r.label.building : r.label.floor;
            const bool hit = set.contains(truth);
            covered += hit;
            std::string members;
            for (std::size_t m : set.members) members += (members.empty() ? "" : ";") + std::to_string(m);
            t.add_row({static_cast<std::int64_t>(r.id), members, static_cast<std::int64_t>(set.size()),
                       static_cast<std::int64_t>(truth), static_cast<std::int64_t>(hit)});
          }
        }
        emit_report(t, format(c), out_path(c, report_name(c, "sets", c.task)));
        out << "coverage " << csv::format_fixed6(static_cast<double>(covered) / parts.test.size()) << " at alpha "
            << csv::format_fixed6(c.alpha) << "\n";
      },
      source);
}

/// Loads or synthesizes calibration and test paths, with predictions.
inline PathExperiment path_experiment(const RunConfig& c) {
  if (c.cal_paths_path.empty() != c.test_paths_path.empty()) {
    throw ConfigError("give both --cal-paths and --test-paths, or neither");
  }
  if (!c.cal_paths_path.empty()) {
    PathExperiment e{parse_paths(read_file(c.cal_paths_path)), parse_paths(read_file(c.test_paths_path))};
    const auto unpredicted = [](const std::vector<Path>& paths) {
      for (const Path& p : paths) {
        for (const PathSample& s : p.samples) {
          if (!s.predicted) return true;
        }
      }
      return false;
    };
    if (unpredicted(e.cal_paths) || unpredicted(e.test_paths)) {
      // Survey = the whole configured dataset.
      const Dataset survey = normalize_rssi(load_raw_dataset(c), parse_normalization(c.normalization));
      const KnnModel model = fit_knn(survey, knn_config(c));
      predict_paths(model, e.cal_paths);
      predict_paths(model, e.test_paths);
    }
    return e;
  }
  if (!c.data_path.empty()) throw ConfigError("path experiments on file datasets need --cal-paths and --test-paths");
  PathExperimentConfig pc;
  pc.world = c.synth;
  pc.survey_samples = c.survey_samples;
  pc.normalization = parse_normalization(c.normalization);
  pc.knn = knn_config(c);
  pc.cal_paths = {c.num_paths, c.path_length, c.membership};
  pc.test_paths = pc.cal_paths;
  pc.seed = stage_seed(c, "paths");
  return make_path_experiment(pc);
}

inline void run_risk(const RunConfig& c, std::ostream& out) {
  const PathExperiment e = path_experiment(c);
  write_file_atomic(out_path(c, "paths_cal.csv"), paths_to_csv(e.cal_paths, true));
  write_file_atomic(out_path(c, "paths_test.csv"), paths_to_csv(e.test_paths, true));
  std::vector<double> grid;
  if (c.lambda_grid == "geometric") {
    grid = geometric_lambda_grid(e.cal_paths, c.grid_size);
  } else if (c.lambda_grid == "observed") {
    grid = observed_lambda_grid(e.cal_paths);
  } else {
    throw ConfigError("--lambda-grid must be geometric or observed");
  }
  const std::vector<double> betas = c.betas.empty() ? std::vector<double>{c.beta} : c.betas;
  LossForm form = LossForm::proportion;
  if (c.loss_form == "clipped") {
    form = LossForm::clipped_squared_error;
  } else if (c.loss_form != "proportion") {
    throw ConfigError("--loss-form must be proportion or clipped");
  }
  for (LossFamily family : families(c)) {
    const PathLoss loss{family, form, c.loss_clip};
    const auto rows = risk_sweep(e.cal_paths, e.test_paths, betas, loss, grid);
    emit_report(to_table(rows), format(c), out_path(c, report_name(c, "risk", to_string(family))));
    for (const RiskRow& r : rows) {
      out << to_string(family) << " beta " << csv::format_fixed6(r.beta) << ": lambda_hat "
          << csv::format_fixed6(r.lambda_hat) << ", test risk " << csv::format_fixed6(r.test_risk)
          << (r.property3_violated ? " (warning: loss at grid end exceeds beta)" : "") << "\n";
    }
  }
}

inline void run_pvalue_filter(const RunConfig& c, std::ostream& out) {
  if (!(c.pvalue_alpha > 0.0 && c.pvalue_alpha < 1.0)) throw ConfigError("--pvalue-alpha must lie in (0, 1)");
  FilterReport report;
  std::string task_name;
  if (!c.cal_paths_path.empty() || !c.test_paths_path.empty()) {
    // Path units: window-max calibration scores, one test score per point.
    const PathExperiment e = path_experiment(c);
    const CalibrationScores cal = window_calibration_scores(e.cal_paths, c.window);
    std::vector<ScoredPoint> points;
    for (const Path& p : e.test_paths) {
      for (const PathSample& s : p.samples) {
        points.push_back({points.size(), distance_score(s.truth, *s.predicted)});
      }
    }
    report = filter_points(points, cal, c.pvalue_alpha);
    task_name = "paths";
  } else {
    const DatasetSplit parts = normalized_split(c);
    const Task task = parse_task(c.task);
    const Source source = prediction_source(c, parts);
    report = std::visit(
        [&](const auto& s) {
          const CalibrationScores cal = score_calibration_set(s, parts.cal, task);
          std::vector<ScoredPoint> points;
          for (const Record& r : parts.test.records) points.push_back({r.id, score_record(s.predict(r), r.label, task)});
          return filter_points(points, cal, c.pvalue_alpha);
        },
        source);
    task_name = c.task;
  }
  emit_report(to_table(report), format(c), out_path(c, report_name(c, "pvalue_filter", task_name)));
  out << "retained " << report.retained.size() << " of " << report.decisions.size() << " points at alpha "
      << csv::format_fixed6(c.pvalue_alpha) << "\n";
}

inline void run_sweep(const RunConfig& c, std::ostream& out) {
  if (c.trials < 1) throw ConfigError("--trials must be >= 1");
  const Task task = parse_task(c.task);
  const std::vector<double> alphas = c.alphas.empty() ? default_alpha_grid() : c.alphas;
  std::vector<SweepRow> rows;
  for (std::size_t t = 0; t < c.trials; ++t) {
    RunConfig trial = c;
    trial.seed = t == 0 ? c.seed : derive_seed(c.seed, static_cast<std::uint64_t>(t));
    const DatasetSplit parts = normalized_split(trial);
    const Source source = prediction_source(trial, parts);
    const auto trial_rows = std::visit(
        [&](const auto& s) { return alpha_sweep(s, parts.cal, parts.test, alphas, task, trial.seed); }, source);
    rows.insert(rows.end(), trial_rows.begin(), trial_rows.end());
  }
  emit_report(to_table(rows), format(c), out_path(c, report_name(c, "sweep", c.task)));
  if (c.trials > 1) {
    const auto aggregates = aggregate_sweeps(rows);
    emit_report(to_table(aggregates), format(c), out_path(c, report_name(c, "sweep_aggregate", c.task)));
  }
  out << "swept " << alphas.size() << " alphas over " << c.trials << " trial(s)\n";
}

}  // namespace detail

inline void build_app(CLI::App& app, RunConfig& c) {
  app.description("Conformal prediction toolkit for fingerprint-based indoor positioning");
  app.set_config("--config", "", "flat key = value config file");
  app.require_subcommand(1, 1);
  app.fallthrough();

  const std::pair<const char*, const char*> subcommands[] = {
      {"ingest", "parse a UJIIndoorLoc CSV and write its canonical form"},
      {"split", "seeded train/cal/test split"},
      {"fit", "fit k-NN and export predictions for the cal and test splits"},
      {"calibrate", "calibration scores and conformal quantile at --alpha"},
      {"predict-sets", "prediction sets for the test split at --alpha"},
      {"risk", "conformal risk control of path FDR/FNR at --beta"},
      {"pvalue-filter", "conformal p-values and filtering at --pvalue-alpha"},
      {"sweep", "alpha sweep of coverage and set size"},
      {"synth", "generate a synthetic dataset"},
  };
  for (const auto& [name, help] : subcommands) {
    app.add_subcommand(name, help)->callback([&c, n = std::string(name)] { c.subcommand = n; });
  }

  app.add_option("--data", c.data_path, "UJIIndoorLoc-format CSV (otherwise synthetic)");
  const std::vector<CLI::Option*> synth = {
      app.add_option("--synth-samples", c.synth.num_samples, "synthetic sample count"),
      app.add_option("--synth-aps", c.synth.num_aps, "synthetic access points"),
      app.add_option("--synth-width", c.synth.width_m, "area width (m)"),
      app.add_option("--synth-height", c.synth.height_m, "area height (m)"),
      app.add_option("--synth-sigma", c.synth.noise_sigma_db, "shadowing noise sigma (dB)"),
      app.add_option("--synth-tx-power", c.synth.tx_power_dbm, "power at 1 m (dBm)"),
      app.add_option("--synth-exponent", c.synth.path_loss_exponent, "path-loss exponent"),
      app.add_option("--synth-detect-floor", c.synth.detect_floor_dbm, "detection floor (dBm)"),
      app.add_option("--synth-floors", c.synth.num_floors, "floors"),
      app.add_option("--synth-buildings", c.synth.num_buildings, "buildings"),
  };
  for (CLI::Option* o : synth) o->group("Synthetic world");
  app.add_option("--normalization", c.normalization, "zero_penalty | minmax_unit");
  app.add_option("--train-fraction", c.train_fraction);
  app.add_option("--cal-fraction", c.cal_fraction);
  app.add_option("--test-fraction", c.test_fraction);
  const std::vector<CLI::Option*> knn = {
      app.add_option("--k", c.k, "k-NN neighbors"),
      app.add_option("--weighting", c.weighting, "uniform | inverse_distance"),
  };
  app.add_option("--predictions", c.predictions_path, "import predictions instead of fitting k-NN");
  app.add_option("--task", c.task, "coords | building | floor");
  app.add_option("--alpha", c.alpha, "miscoverage level");
  app.add_option("--alphas", c.alphas, "sweep grid (default: 20-point grid)")->delimiter(',');
  app.add_option("--beta", c.beta, "target risk");
  app.add_option("--betas", c.betas, "several target risks")->delimiter(',');
  app.add_option("--family", c.family, "fdr | fnr | both");
  app.add_option("--lambda-grid", c.lambda_grid, "geometric | observed");
  app.add_option("--grid-size", c.grid_size, "points in the geometric lambda grid");
  app.add_option("--loss-form", c.loss_form, "proportion | clipped");
  app.add_option("--loss-clip", c.loss_clip, "bound B for the clipped squared-error loss");
  app.add_option("--cal-paths", c.cal_paths_path, "calibration path CSV");
  app.add_option("--test-paths", c.test_paths_path, "test path CSV");
  app.add_option("--num-paths", c.num_paths, "synthetic paths per split");
  app.add_option("--path-length", c.path_length, "points per synthetic path");
  app.add_option("--membership", c.membership, "share of path points with P = 1");
  app.add_option("--survey-samples", c.survey_samples, "k-NN survey size for synthetic paths");
  app.add_option("--pvalue-alpha", c.pvalue_alpha, "p-value filter level");
  app.add_option("--window", c.window, "path window length for max-aggregated scores");
  app.add_option("--trials", c.trials, "sweep repetitions");
  app.add_option("--format", c.format, "csv | json");
  app.add_option("--out", c.out_dir, "output directory");
  app.add_option("--seed", c.seed, "root seed");

  app.callback([&c, synth, knn] {
    for (const CLI::Option* o : synth) c.synthetic_requested = c.synthetic_requested || o->count() > 0;
    for (const CLI::Option* o : knn) c.knn_requested = c.knn_requested || o->count() > 0;
  });
}

/// Runs one subcommand. Exit status: 0 success, 1 validation or runtime
/// failure, 2 usage error.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"cpindoor"};
  app.name("cpindoor");
  RunConfig config;
  build_app(app, config);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }
  try {
    if (!config.data_path.empty() && config.synthetic_requested) {
      throw ConfigError("choose one dataset source: --data or --synth-* options");
    }
    if (!config.predictions_path.empty() && config.knn_requested) {
      throw ConfigError("choose one predictor source: --predictions or --k/--weighting");
    }
    std::filesystem::create_directories(config.out_dir);
    const std::string& s = config.subcommand;
    if (s == "synth") detail::run_synth(config, out);
    else if (s == "ingest") detail::run_ingest(config, out);
    else if (s == "split") detail::run_split(config, out);
    else if (s == "fit") detail::run_fit(config, out);
    else if (s == "calibrate") detail::run_calibrate(config, out);
    else if (s == "predict-sets") detail::run_predict_sets(config, out);
    else if (s == "risk") detail::run_risk(config, out);
    else if (s == "pvalue-filter") detail::run_pvalue_filter(config, out);
    else if (s == "sweep") detail::run_sweep(config, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace cpindoor::cli
