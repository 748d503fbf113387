#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/random.hpp"

namespace cpindoor {

/// Log-distance path-loss world used as a desk-scale stand-in for a surveyed
/// building.
struct SyntheticWorldConfig {
  double width_m = 60.0;
  double height_m = 40.0;
  std::size_t num_aps = 20;
  double tx_power_dbm = -30.0;
  double path_loss_exponent = 3.0;
  double noise_sigma_db = 4.0;
  double detect_floor_dbm = -100.0;
  std::size_t num_samples = 2000;
  std::uint64_t seed = 0;
  // Multi-floor / multi-building variant. Buildings are equal-width strips
  // along the longitude axis; each floor between AP and receiver costs
  // floor_attenuation_db.
  int num_floors = 1;
  int num_buildings = 1;
  double floor_attenuation_db = 15.0;
};

inline void validate(const SyntheticWorldConfig& config) {
  if (config.num_aps < 1) throw ConfigError("num_aps must be >= 1");
  if (config.num_samples < 1) throw ConfigError("num_samples must be >= 1");
  if (!(config.width_m > 0.0) || !(config.height_m > 0.0)) {
    throw ConfigError("area width and height must be > 0");
  }
  if (!(config.noise_sigma_db >= 0.0)) throw ConfigError("noise_sigma_db must be >= 0");
  if (config.num_floors < 1 || config.num_buildings < 1) {
    throw ConfigError("num_floors and num_buildings must be >= 1");
  }
  if (!std::isfinite(config.tx_power_dbm) || !std::isfinite(config.path_loss_exponent) ||
      !std::isfinite(config.detect_floor_dbm) || !std::isfinite(config.floor_attenuation_db)) {
    throw ConfigError("world parameters must be finite");
  }
}

/// Noise-free received power: tx - 10 * exponent * log10(max(d, 1 m)).
inline double path_loss_rssi(double tx_power_dbm, double exponent, double distance_m) {
  return tx_power_dbm - 10.0 * exponent * std::log10(std::max(distance_m, 1.0));
}

struct AccessPoint {
  Coords position;
  int floor = 0;
};

class SyntheticWorld {
 public:
  /// Places the access points uniformly at random (stream: derive_seed(seed, "aps")).
  explicit SyntheticWorld(const SyntheticWorldConfig& config) : config_(config) {
    validate(config_);
    Rng rng(derive_seed(config_.seed, "aps"));
    aps_.reserve(config_.num_aps);
    for (std::size_t i = 0; i < config_.num_aps; ++i) {
      AccessPoint ap;
      ap.position.longitude = rng.uniform(0.0, config_.width_m);
      ap.position.latitude = rng.uniform(0.0, config_.height_m);
      ap.floor = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config_.num_floors)));
      aps_.push_back(ap);
    }
  }

  const SyntheticWorldConfig& config() const { return config_; }
  const std::vector<AccessPoint>& access_points() const { return aps_; }

  int building_at(const Coords& position) const {
    const double strip = config_.width_m / config_.num_buildings;
    const int b = static_cast<int>(std::floor(position.longitude / strip));
    return std::clamp(b, 0, config_.num_buildings - 1);
  }

  /// Mean received power from AP `ap` (no noise, no detection floor).
  double mean_rssi(std::size_t ap, const Coords& position, int floor) const {
    const AccessPoint& a = aps_.at(ap);
    const double d = std::hypot(position.longitude - a.position.longitude,
                                position.latitude - a.position.latitude);
    return path_loss_rssi(config_.tx_power_dbm, config_.path_loss_exponent, d) -
           config_.floor_attenuation_db * std::abs(floor - a.floor);
  }

  /// One noisy observation at `position`. Values under the detection floor
  /// are replaced by the "not detected" sentinel. Draws one Gaussian per AP
  /// when sigma > 0 and nothing otherwise.
  Fingerprint observe(const Coords& position, int floor, Rng& rng) const {
    Fingerprint fp(aps_.size());
    for (std::size_t i = 0; i < aps_.size(); ++i) {
      double rssi = mean_rssi(i, position, floor);
      if (config_.noise_sigma_db > 0.0) rssi += rng.normal(0.0, config_.noise_sigma_db);
      fp[i] = rssi < config_.detect_floor_dbm ? kNotDetected : rssi;
    }
    return fp;
  }

  /// Uniform position and floor, then observe (in that draw order).
  Record sample(std::size_t id, Rng& rng) const {
    Record record;
    record.id = id;
    record.label.longitude = rng.uniform(0.0, config_.width_m);
    record.label.latitude = rng.uniform(0.0, config_.height_m);
    record.label.floor =
        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config_.num_floors)));
    record.label.building = building_at(record.label.coords());
    record.fingerprint = observe(record.label.coords(), record.label.floor, rng);
    return record;
  }

  /// num_samples records drawn from the stream derive_seed(seed, "samples").
  Dataset generate() const { return generate(config_.num_samples, derive_seed(config_.seed, "samples")); }

  Dataset generate(std::size_t count, std::uint64_t stream_seed) const {
    Dataset dataset;
    dataset.num_aps = aps_.size();
    dataset.num_floors = config_.num_floors;
    dataset.num_buildings = config_.num_buildings;
    dataset.records.reserve(count);
    Rng rng(stream_seed);
    for (std::size_t i = 0; i < count; ++i) dataset.records.push_back(sample(i, rng));
    return dataset;
  }

 private:
  SyntheticWorldConfig config_;
  std::vector<AccessPoint> aps_;
};

inline Dataset generate_synthetic(const SyntheticWorldConfig& config) {
  return SyntheticWorld(config).generate();
}

}  // namespace cpindoor
