#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"

// Conformal risk control over whole navigation paths.
//
// For exchangeable per-path losses L_i(lambda) that are monotone in lambda and
// bounded by B, the threshold
//
//   lambda_hat = inf { lambda : R_n(lambda) <= beta - (B - beta) / n },
//   R_n(lambda) = (1/n) sum_i L_i(lambda),
//
// keeps the expected loss of a fresh path at or below beta.
namespace cpindoor {

struct PathSample {
  Fingerprint fingerprint;           // raw RSSI (dBm, 100 = not detected)
  Coords truth;
  std::optional<Coords> predicted;   // filled by a predictor before loss evaluation
  bool membership = false;           // ground truth: point belongs to the path

  double squared_error() const {
    if (!predicted) throw StateError("path sample has no prediction");
    const double dx = truth.longitude - predicted->longitude;
    const double dy = truth.latitude - predicted->latitude;
    return dx * dx + dy * dy;
  }
};

/// Ordered positioning points; the exchangeable calibration unit.
struct Path {
  std::size_t id = 0;
  std::vector<PathSample> samples;
};

enum class LossFamily { fdr, fnr };

inline std::string_view to_string(LossFamily family) { return family == LossFamily::fdr ? "fdr" : "fnr"; }

inline LossFamily parse_loss_family(std::string_view name) {
  if (name == "fdr") return LossFamily::fdr;
  if (name == "fnr") return LossFamily::fnr;
  throw ConfigError("unknown loss family '" + std::string(name) + "'");
}

enum class Monotonicity { nonincreasing, nondecreasing };

/// FDR losses shrink as lambda grows; FNR losses grow.
constexpr Monotonicity monotonicity_of(LossFamily family) {
  return family == LossFamily::fdr ? Monotonicity::nonincreasing : Monotonicity::nondecreasing;
}

/// Share of path points (P = 1) whose squared error exceeds lambda; the
/// denominator is max(#path points, 1).
inline double fdr_path_loss(const Path& path, double lambda) {
  std::size_t flagged = 0;
  std::size_t members = 0;
  for (const PathSample& s : path.samples) {
    if (!s.membership) continue;
    ++members;
    if (s.squared_error() > lambda) ++flagged;
  }
  return static_cast<double>(flagged) / static_cast<double>(std::max<std::size_t>(members, 1));
}

/// Share of non-path points (P = 0) whose squared error is at most lambda;
/// the denominator is max(#non-path points, 1).
inline double fnr_path_loss(const Path& path, double lambda) {
  std::size_t flagged = 0;
  std::size_t outsiders = 0;
  for (const PathSample& s : path.samples) {
    if (s.membership) continue;
    ++outsiders;
    if (s.squared_error() <= lambda) ++flagged;
  }
  return static_cast<double>(flagged) / static_cast<double>(std::max<std::size_t>(outsiders, 1));
}

/// Per-point squared-error losses averaged over the path, each point's loss
/// clipped at `clip`: FDR form charges |e|^2 when |e|^2 > lambda and P = 1.
inline double fdr_squared_error_loss(const Path& path, double lambda, double clip) {
  if (path.samples.empty()) return 0.0;
  double sum = 0.0;
  for (const PathSample& s : path.samples) {
    const double e2 = s.squared_error();
    if (s.membership && e2 > lambda) sum += std::min(e2, clip);
  }
  return sum / static_cast<double>(path.samples.size());
}

/// FNR form: charges |e|^2 when |e|^2 <= lambda and P = 0.
inline double fnr_squared_error_loss(const Path& path, double lambda, double clip) {
  if (path.samples.empty()) return 0.0;
  double sum = 0.0;
  for (const PathSample& s : path.samples) {
    const double e2 = s.squared_error();
    if (!s.membership && e2 <= lambda) sum += std::min(e2, clip);
  }
  return sum / static_cast<double>(path.samples.size());
}

enum class LossForm { proportion, clipped_squared_error };

/// Selects one of the four per-path losses.
struct PathLoss {
  LossFamily family = LossFamily::fdr;
  LossForm form = LossForm::proportion;
  double clip = 1.0;  // only used by clipped_squared_error

  double bound() const { return form == LossForm::proportion ? 1.0 : clip; }
  Monotonicity direction() const { return monotonicity_of(family); }

  double operator()(const Path& path, double lambda) const {
    if (form == LossForm::proportion) {
      return family == LossFamily::fdr ? fdr_path_loss(path, lambda) : fnr_path_loss(path, lambda);
    }
    return family == LossFamily::fdr ? fdr_squared_error_loss(path, lambda, clip)
                                     : fnr_squared_error_loss(path, lambda, clip);
  }
};

struct RiskConfig {
  double beta = 0.1;
  double bound = 1.0;                // B
  std::vector<double> lambda_grid;   // strictly increasing, squared meters
  Monotonicity direction = Monotonicity::nonincreasing;
};

/// beta = B is accepted: the constraint is then vacuous.
inline void validate(const RiskConfig& config) {
  if (config.lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (std::size_t j = 0; j < config.lambda_grid.size(); ++j) {
    if (!std::isfinite(config.lambda_grid[j])) throw ConfigError("lambda grid must be finite");
    if (j > 0 && !(config.lambda_grid[j] > config.lambda_grid[j - 1])) {
      throw ConfigError("lambda grid must be strictly increasing");
    }
  }
  if (!(config.beta > 0.0) || !(config.beta <= config.bound) || !std::isfinite(config.bound)) {
    throw ConfigError("risk level must satisfy 0 < beta <= B");
  }
}

/// n_paths x |grid| matrix of per-path losses.
class LossCurve {
 public:
  LossCurve(std::vector<double> grid, std::vector<std::size_t> path_ids, std::vector<double> values,
            double bound)
      : grid_(std::move(grid)), path_ids_(std::move(path_ids)), values_(std::move(values)), bound_(bound) {
    if (values_.size() != grid_.size() * path_ids_.size()) throw ContractError("loss matrix has the wrong size");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]) || values_[i] > bound_) {
        throw ValidationError("loss of path " + std::to_string(path_ids_[i / grid_.size()]) +
                              " exceeds the bound B");
      }
    }
  }

  std::size_t num_paths() const { return path_ids_.size(); }
  std::span<const double> grid() const { return grid_; }
  double bound() const { return bound_; }
  std::size_t path_id(std::size_t row) const { return path_ids_.at(row); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * grid_.size(), grid_.size());
  }
  double at(std::size_t i, std::size_t j) const { return values_.at(i * grid_.size() + j); }

 private:
  std::vector<double> grid_;
  std::vector<std::size_t> path_ids_;
  std::vector<double> values_;
  double bound_;
};

inline LossCurve build_loss_curve(std::span<const Path> paths, std::span<const double> grid, const PathLoss& loss) {
  std::vector<double> values;
  values.reserve(paths.size() * grid.size());
  std::vector<std::size_t> ids;
  ids.reserve(paths.size());
  for (const Path& path : paths) {
    ids.push_back(path.id);
    for (double lambda : grid) values.push_back(loss(path, lambda));
  }
  return LossCurve(std::vector<double>(grid.begin(), grid.end()), std::move(ids), std::move(values), loss.bound());
}

/// Mean loss over paths at grid point `grid_index`.
inline double empirical_risk(const LossCurve& curve, std::size_t grid_index) {
  if (grid_index >= curve.grid().size()) throw ContractError("grid index out of range");
  if (curve.num_paths() == 0) throw ContractError("empirical_risk: no paths");
  double sum = 0.0;
  for (std::size_t i = 0; i < curve.num_paths(); ++i) sum += curve.at(i, grid_index);
  return sum / static_cast<double>(curve.num_paths());
}

/// Throws ValidationError naming the first path whose losses are not
/// monotone in `direction` along the grid.
inline void validate_monotone(const LossCurve& curve, Monotonicity direction) {
  for (std::size_t i = 0; i < curve.num_paths(); ++i) {
    const auto row = curve.row(i);
    for (std::size_t j = 1; j < row.size(); ++j) {
      const bool ok = direction == Monotonicity::nonincreasing ? row[j] <= row[j - 1] : row[j] >= row[j - 1];
      if (!ok) {
        throw ValidationError("loss curve of path " + std::to_string(curve.path_id(i)) +
                              " is not monotone at grid index " + std::to_string(j));
      }
    }
  }
}

struct LambdaCalibration {
  double lambda_hat = 0.0;
  std::size_t grid_index = 0;
  double threshold = 0.0;          // beta - (B - beta) / n
  double empirical_risk = 0.0;     // R_n(lambda_hat)
  bool fallback = false;           // no grid point met the threshold
  bool property3_violated = false; // some L_i exceeds beta at the grid end
};

/// Nonincreasing losses: the smallest grid lambda with R_n <= threshold,
/// falling back to the largest grid value. Nondecreasing losses (FNR) are
/// handled through t = lambda_max - lambda: the grid is scanned from the
/// top and the largest qualifying lambda is returned, falling back to the
/// smallest grid value. property3_violated reports any calibration path
/// whose loss at the fallback point exceeds beta.
inline LambdaCalibration calibrate_lambda(const LossCurve& curve, const RiskConfig& config) {
  validate(config);
  if (curve.num_paths() == 0) throw ContractError("calibrate_lambda: no calibration paths");
  if (!std::equal(curve.grid().begin(), curve.grid().end(), config.lambda_grid.begin(),
                  config.lambda_grid.end())) {
    throw ContractError("loss curve was evaluated on a different grid");
  }
  if (curve.bound() > config.bound) throw ContractError("loss bound exceeds the configured B");
  validate_monotone(curve, config.direction);

  const auto n = static_cast<double>(curve.num_paths());
  LambdaCalibration result;
  result.threshold = config.beta - (config.bound - config.beta) / n;

  const std::size_t m = curve.grid().size();
  const bool forward = config.direction == Monotonicity::nonincreasing;
  const std::size_t fallback_index = forward ? m - 1 : 0;
  for (std::size_t i = 0; i < curve.num_paths(); ++i) {
    if (curve.at(i, fallback_index) > config.beta) result.property3_violated = true;
  }

  result.grid_index = fallback_index;
  result.fallback = true;
  for (std::size_t step = 0; step < m; ++step) {
    const std::size_t j = forward ? step : m - 1 - step;
    if (empirical_risk(curve, j) <= result.threshold) {
      result.grid_index = j;
      result.fallback = false;
      break;
    }
  }
  result.lambda_hat = curve.grid()[result.grid_index];
  result.empirical_risk = empirical_risk(curve, result.grid_index);
  return result;
}

/// Mean test loss at lambda_hat.
inline double evaluate_risk(double lambda_hat, std::span<const Path> test_paths, const PathLoss& loss) {
  if (test_paths.empty()) throw ContractError("evaluate_risk: empty test set");
  double sum = 0.0;
  for (const Path& path : test_paths) sum += loss(path, lambda_hat);
  return sum / static_cast<double>(test_paths.size());
}

inline double evaluate_risk(double lambda_hat, std::span<const Path> test_paths, LossFamily family) {
  return evaluate_risk(lambda_hat, test_paths, PathLoss{family});
}

// ---------------------------------------------------------------------------
// Lambda grids

inline std::vector<double> squared_errors(std::span<const Path> paths) {
  std::vector<double> out;
  for (const Path& path : paths) {
    for (const PathSample& s : path.samples) out.push_back(s.squared_error());
  }
  return out;
}

/// {0} together with every observed squared error. The empirical risk is a
/// step function that only jumps at observed errors, so this grid reaches
/// the same threshold as a continuous search for nonincreasing losses.
inline std::vector<double> observed_lambda_grid(std::span<const Path> paths) {
  auto grid = squared_errors(paths);
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

/// `count` geometrically spaced values from the smallest positive to the
/// largest observed squared error.
inline std::vector<double> geometric_lambda_grid(std::span<const Path> paths, std::size_t count = 64) {
  if (count < 2) throw ConfigError("geometric grid needs at least 2 points");
  const auto errors = squared_errors(paths);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double e : errors) {
    if (e > 0.0) lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (!std::isfinite(lo) || !(hi > lo)) {
    // Degenerate error range: fall back to a unit-spaced ladder.
    lo = std::isfinite(lo) ? lo : 1.0;
    hi = lo * 2.0;
  }
  std::vector<double> grid(count);
  const double ratio = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t j = 0; j < count; ++j) grid[j] = lo * std::exp(ratio * static_cast<double>(j));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

}  // namespace cpindoor
