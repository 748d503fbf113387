// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cpindoor/cli.hpp"
#include "cpindoor/cpindoor.hpp"
#include "support.hpp"
#include "uji_pipeline.hpp"

using namespace cpindoor;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s criterion %s: %s | %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str(), seconds);
  std::fflush(stdout);
  failures += v.pass ? 0 : 1;
}

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer), format, args...);
  return buffer;
}

std::pair<double, double> mean_se(const std::vector<double>& v) {
  double sum = 0;
  for (double x : v) sum += x;
  const double mean = sum / v.size();
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (v.size() - 1)) / std::sqrt(double(v.size()))};
}

// 1 -------------------------------------------------------------------------
Verdict coverage_guarantee() {
  const std::vector<double> alphas{0.05, 0.1, 0.2};
  std::vector<std::vector<double>> coverage(alphas.size());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SyntheticWorldConfig world;
    world.num_samples = 2000;
    world.num_aps = 20;
    world.noise_sigma_db = 4.0;
    world.seed = derive_seed(seed, "world");
    // n_cal = 500, n_test = 1000, remaining 500 train the model.
    const SplitSpec split{0.25, 0.25, 0.5, derive_seed(seed, "split")};
    const auto rows = coverage_trial(generate_synthetic(world), split, Normalization::zero_penalty,
                                     {5, Weighting::uniform}, alphas, Task::coords);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      if (rows[a].n_cal != 500 || rows[a].n_test != 1000) return {false, "unexpected split sizes"};
      coverage[a].push_back(rows[a].empirical_coverage);
    }
  }
  Verdict v;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const double mean = mean_se(coverage[a]).first;
    const double lo = 1 - alphas[a] - 0.012, hi = 1 - alphas[a] + 1.0 / 501 + 0.012;
    const bool ok = mean >= lo && mean <= hi;
    v.pass = v.pass && ok;
    v.detail += fmt("%salpha %.2f: mean %.4f in [%.4f, %.4f]%s", a ? "; " : "", alphas[a], mean, lo, hi, ok ? "" : " NO");
  }
  return v;
}

// 2 -------------------------------------------------------------------------
Verdict quantile_oracle() {
  Rng rng(2);
  std::size_t mismatches = 0, infinite = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(500);
    std::vector<double> scores(n);
    const bool ties = trial % 3 == 0;
    for (double& s : scores) s = ties ? std::floor(rng.uniform(0, 8)) : rng.uniform(0, 30);
    const double alpha = rng.uniform();
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const long double rank = std::ceil((static_cast<long double>(n) + 1) * (1.0L - alpha));
    double oracle;
    if (rank < 1) {
      oracle = -INFINITY;
    } else if (rank > n) {
      oracle = INFINITY;
      ++infinite;
    } else {
      oracle = sorted[static_cast<std::size_t>(rank) - 1];
    }
    const double got = conformal_quantile(CalibrationScores(scores, ScoreKind::distance), alpha).value;
    if (got != oracle) ++mismatches;
  }
  return {mismatches == 0, fmt("%zu mismatches in 1000 vectors (%zu with k > n)", mismatches, infinite)};
}

// 3 -------------------------------------------------------------------------
Dataset multi_world(std::uint64_t seed, std::size_t n) {
  SyntheticWorldConfig c;
  c.num_samples = n;
  c.num_floors = 4;
  c.num_buildings = 3;
  c.floor_attenuation_db = 6.0;
  c.noise_sigma_db = 6.0;
  c.seed = seed;
  return normalize_rssi(generate_synthetic(c), Normalization::zero_penalty);
}

Verdict nesting() {
  const auto parts = split_dataset(multi_world(3, 1500), {0.6, 0.2, 0.2, 3});
  const KnnModel model = fit_knn(parts.train, {7, Weighting::inverse_distance});
  const auto floor_cal = score_calibration_set(model, parts.cal, Task::floor);
  const auto building_cal = score_calibration_set(model, parts.cal, Task::building);
  const auto coords_cal = score_calibration_set(model, parts.cal, Task::coords);
  Rng rng(33);
  std::size_t checked = 0, violations = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Record& x = parts.test.records[rng.uniform_index(parts.test.size())];
    double a1 = rng.uniform(), a2 = rng.uniform();
    if (a1 > a2) std::swap(a1, a2);
    if (a1 == a2) continue;
    const auto out = model.predict(x);
    for (const auto& [cal, probs] : {std::pair{&floor_cal, &out.floor_probs}, std::pair{&building_cal, &out.building_probs}}) {
      const auto big = class_prediction_set(*probs, conformal_quantile(*cal, a1));
      const auto small = class_prediction_set(*probs, conformal_quantile(*cal, a2));
      ++checked;
      if (!std::includes(big.members.begin(), big.members.end(), small.members.begin(), small.members.end())) {
        ++violations;
      }
    }
    const auto big = region_prediction_set(out.coords, conformal_quantile(coords_cal, a1));
    const auto small = region_prediction_set(out.coords, conformal_quantile(coords_cal, a2));
    ++checked;
    bool contained = small.radius <= big.radius;
    for (int s = 0; s < 50 && contained; ++s) {
      const Coords p{out.coords.longitude + rng.uniform(-30, 30), out.coords.latitude + rng.uniform(-30, 30)};
      contained = !small.contains(p) || big.contains(p);
    }
    if (!contained) ++violations;
  }
  return {violations == 0 && checked == 300,
          fmt("%zu of %zu (floor, building, region) nestings hold", checked - violations, checked)};
}

// 4 -------------------------------------------------------------------------
Verdict set_size_monotone() {
  const auto alphas = default_alpha_grid();
  std::size_t runs = 0, bad = 0;
  std::string sizes;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = multi_world(100 + seed, 1200);
    const auto parts = split_dataset(d, {0.7, 0.1, 0.2, seed});
    const KnnModel model = fit_knn(parts.train, {5, seed % 2 ? Weighting::uniform : Weighting::inverse_distance});
    for (Task task : {Task::floor, Task::building}) {
      const auto rows = alpha_sweep(model, parts.cal, parts.test, alphas, task, seed);
      ++runs;
      for (std::size_t j = 1; j < rows.size(); ++j) {
        if (rows[j].avg_set_size > rows[j - 1].avg_set_size) {
          ++bad;
          break;
        }
      }
      if (seed == 0 && task == Task::floor) {
        sizes = fmt("floor sizes, seed 0: %.3f at alpha 0 -> %.3f at 0.105 -> %.3f at 1", rows[0].avg_set_size,
                    rows[2].avg_set_size, rows.back().avg_set_size);
      }
    }
  }
  return {bad == 0, fmt("%zu of %zu runs non-increasing; ", runs - bad, runs) + sizes};
}

// 5 -------------------------------------------------------------------------
Verdict risk_control(LossFamily family) {
  const std::vector<double> betas{0.05, 0.1, 0.2};
  std::vector<std::vector<double>> test_risk(betas.size());
  std::size_t boundary_failures = 0, fallbacks = 0;
  const PathLoss loss{family};
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    PathExperimentConfig config;
    config.cal_paths = {50, 30, 0.4};
    config.test_paths = {50, 30, 0.4};
    config.seed = derive_seed(trial, "paths");
    const auto e = make_path_experiment(config);
    const auto grid = observed_lambda_grid(e.cal_paths);
    const LossCurve curve = build_loss_curve(e.cal_paths, grid, loss);
    const auto rows = risk_sweep(e.cal_paths, e.test_paths, betas, loss, grid);
    for (std::size_t b = 0; b < betas.size(); ++b) {
      const RiskRow& r = rows[b];
      test_risk[b].push_back(r.test_risk);
      fallbacks += r.fallback;
      // Inequality holds at lambda-hat ...
      bool ok = !r.fallback && empirical_risk(curve, r.grid_index) <= r.threshold;
      // ... and fails at the grid point scanned just before it.
      if (family == LossFamily::fdr && r.grid_index > 0) {
        ok = ok && empirical_risk(curve, r.grid_index - 1) > r.threshold;
      }
      if (family == LossFamily::fnr && r.grid_index + 1 < grid.size()) {
        ok = ok && empirical_risk(curve, r.grid_index + 1) > r.threshold;
      }
      boundary_failures += !ok;
    }
  }
  Verdict v;
  v.pass = boundary_failures == 0;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    const auto [mean, se] = mean_se(test_risk[b]);
    const bool ok = mean <= betas[b] + 3 * se;
    v.pass = v.pass && ok;
    v.detail += fmt("beta %.2f: mean %.4f <= %.4f%s; ", betas[b], mean, betas[b] + 3 * se, ok ? "" : " NO");
  }
  v.detail += fmt("boundary checks failed in %zu of 300, fallbacks %zu", boundary_failures, fallbacks);
  return v;
}

// 6 -------------------------------------------------------------------------
Verdict superuniformity() {
  constexpr std::size_t n = 99;
  Rng rng(6);
  const auto draw_score = [&] { return std::hypot(rng.normal(0, 2.5), rng.normal(0, 2.5)); };
  std::vector<PValue> null_p;
  null_p.reserve(10000);
  for (int d = 0; d < 10000; ++d) {
    std::vector<double> cal(n);
    for (double& s : cal) s = draw_score();
    null_p.push_back(pvalue(CalibrationScores(cal, ScoreKind::distance), {draw_score(), ScoreKind::distance}));
  }
  std::vector<double> grid;
  for (int j = 1; j <= 99; ++j) grid.push_back(j / 100.0);
  const auto mc = superuniformity_check(null_p, grid, 0.015);
  double worst = -1;
  for (const auto& row : mc.rows) worst = std::max(worst, row.fraction - row.alpha);

  // Lattice identity: every leave-one-out position of a tie-free score set.
  std::size_t lattice_bad = 0;
  for (int set = 0; set < 100; ++set) {
    std::vector<double> scores(n + 1);
    for (double& s : scores) s = draw_score();
    rng.shuffle(std::span(scores));
    std::vector<PValue> ps;
    for (std::size_t i = 0; i <= n; ++i) {
      std::vector<double> cal;
      for (std::size_t j = 0; j <= n; ++j) {
        if (j != i) cal.push_back(scores[j]);
      }
      ps.push_back(pvalue(CalibrationScores(cal, ScoreKind::distance), {scores[i], ScoreKind::distance}));
    }
    for (int j = 1; j <= 99; ++j) {
      // #{p <= j/100} must equal floor((n + 1) j / 100), in integers.
      std::size_t at_most = 0;
      for (const PValue& p : ps) at_most += p.numerator * 100 <= static_cast<std::size_t>(j) * (n + 1);
      if (at_most != (n + 1) * static_cast<std::size_t>(j) / 100) ++lattice_bad;
    }
    const auto report = superuniformity_check(ps, grid, 0.0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double want = static_cast<double>((n + 1) * (j + 1) / 100) / static_cast<double>(n + 1);
      if (report.rows[j].fraction != want) ++lattice_bad;
    }
  }
  return {!mc.any_exceeded && lattice_bad == 0,
          fmt("max P(p <= a) - a over 99 levels: %+.4f (limit +0.015); lattice mismatches: %zu", worst, lattice_bad)};
}

// 7 -------------------------------------------------------------------------
std::string surrogate_uji_text(std::uint64_t seed) {
  SyntheticWorldConfig c;
  c.width_m = 390;
  c.height_m = 270;
  c.num_aps = 520;
  c.num_samples = 19937;
  c.num_floors = 5;
  c.num_buildings = 3;
  c.path_loss_exponent = 3.5;
  c.noise_sigma_db = 5.0;
  c.seed = seed;
  const Dataset d = generate_synthetic(c);
  std::string text;
  for (std::size_t ap = 1; ap <= 520; ++ap) text += detail::wap_column_name(ap) + ",";
  text += "LONGITUDE,LATITUDE,FLOOR,BUILDINGID,SPACEID,RELATIVEPOSITION,USERID,PHONEID,TIMESTAMP\n";
  for (const Record& r : d.records) {
    for (double v : r.fingerprint) text += std::to_string(static_cast<int>(std::lround(v))) + ",";
    text += csv::format_exact(-7691.3 + r.label.longitude) + "," + csv::format_exact(4864745.7 + r.label.latitude) +
            "," + std::to_string(r.label.floor) + "," + std::to_string(r.label.building) + ",101,2,1,13," +
            std::to_string(1371700000 + r.id) + "\n";
  }
  return text;
}

std::string locate_real_uji() {
  if (const char* env = std::getenv("UJIINDOORLOC_TRAIN")) return env;
  const std::string fallback = std::string(CPINDOOR_SOURCE_DIR) + "/data/UJIIndoorLoc/trainingData.csv";
  return std::filesystem::exists(fallback) ? fallback : std::string();
}

Verdict uji_check(const std::string& text, const char* label) {
  const auto r = uji::run(text, 0.1, 0);
  const bool ok = r.records == 19937 && r.waps == 520 && std::fabs(r.coverage - 0.9) <= 0.03;
  return {ok, fmt("%s: %zu records, %zu WAPs, n_cal %zu, n_test %zu, coverage %.4f (0.9 +- 0.03)", label, r.records,
                  r.waps, r.n_cal, r.n_test, r.coverage)};
}

// 8 -------------------------------------------------------------------------
Verdict cli_determinism() {
  const std::vector<std::vector<std::string>> stages = {
      {"synth"},
      {"ingest", "--data", "@/dataset.csv"},
      {"split"},
      {"fit", "--k", "7", "--weighting", "inverse_distance"},
      {"calibrate", "--task", "floor", "--synth-floors", "3"},
      {"predict-sets", "--alpha", "0.05"},
      {"risk", "--lambda-grid", "observed"},
      {"pvalue-filter", "--pvalue-alpha", "0.2"},
      {"sweep", "--trials", "5"},
      {"sweep", "--task", "building", "--synth-buildings", "2", "--format", "json"},
  };
  std::vector<std::map<std::string, std::string>> snapshots;
  for (const char* name : {"accept_cli_a", "accept_cli_b"}) {
    const auto dir = testing_support::scratch_dir(name);
    const auto config = dir / "run.cfg";
    write_file_atomic(config, "seed = 4242\nalpha = 0.1\nbeta = 0.1\nout = " + (dir / "out").string() + "\n");
    for (auto args : stages) {
      for (auto& a : args) {
        if (a.starts_with("@")) a = (dir / "out").string() + a.substr(1);
      }
      args.insert(args.end(), {"--config", config.string()});
      std::ostringstream out, err;
      if (cli::run_command(args, out, err) != 0) return {false, args[0] + " failed: " + err.str()};
    }
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir / "out")) {
      files[entry.path().filename().string()] = testing_support::slurp(entry.path());
    }
    snapshots.push_back(std::move(files));
  }
  std::size_t differing = 0;
  for (const auto& [name, contents] : snapshots[0]) {
    const auto it = snapshots[1].find(name);
    differing += it == snapshots[1].end() || it->second != contents;
  }
  differing += snapshots[0].size() != snapshots[1].size();
  return {differing == 0 && snapshots[0].size() >= 15,
          fmt("%zu report files compared across two runs, %zu differ", snapshots[0].size(), differing)};
}

}  // namespace

int main() {
  report("1", "coverage guarantee over 50 seeds", coverage_guarantee);
  report("2", "conformal quantile equals sort-then-index oracle", quantile_oracle);
  report("3", "prediction sets nest as alpha grows", nesting);
  report("4", "average set size non-increasing on the default grid", set_size_monotone);
  report("5a", "risk control, FDR family, 100 trials", [] { return risk_control(LossFamily::fdr); });
  report("5b", "risk control, FNR family (reverse grid), 100 trials", [] { return risk_control(LossFamily::fnr); });
  report("6", "p-value super-uniformity and lattice identity", superuniformity);
  if (const std::string real = locate_real_uji(); !real.empty()) {
    report("7", "UJIIndoorLoc training file pipeline", [&] { return uji_check(read_file(real), "real data"); });
  } else {
    std::printf("SKIP criterion 7: UJIIndoorLoc pipeline on the real training file | file not available "
                "(set UJIINDOORLOC_TRAIN or add data/UJIIndoorLoc/trainingData.csv)\n");
  }
  report("7s", "same-scale synthetic surrogate in UJIIndoorLoc schema (not the real data)",
         [] { return uji_check(surrogate_uji_text(7), "surrogate"); });
  report("8", "CLI re-runs produce byte-identical reports", cli_determinism);
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
