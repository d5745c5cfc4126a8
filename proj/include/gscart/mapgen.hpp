// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "gscart/grid.hpp"
#include "gscart/json_util.hpp"
#include "gscart/rng.hpp"

namespace gsc {

/// Closed real interval used for the uniform parameter draws of the map model.
struct ValueRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Generating parameters of one signal source: its spatial loss function
/// (location, power, decay) plus the scalar value of its power spectral
/// density at the analysis frequency.
struct TransmitterSpec {
    double row = 0.0; // real coordinates, grid units
    double col = 0.0;
    double power = 1.0;
    double path_loss_exponent = 2.0;
    double psd_weight = 1.0;
};

/// Everything that defines the synthetic map distribution.
///
/// The generating model is a sum over transmitters of
///   psd_weight_r * power_r * (1 + d)^(-gamma_r) * 10^(shadowing_dB / 10)
/// plus an i.i.d. Gaussian noise field, clamped at zero and normalized to
/// [0, 1] by `peak` (0 means per-map maximum; datasets store a shared peak).
/// Range endpoints are deliberate defaults, not fixed constants of the model.
struct MapConfig {
    int rows = 50;
    int cols = 50;
    int tx_count_min = 1;
    int tx_count_max = 10;
    ValueRange gamma_range{2.0, 3.0};
    double tx_power = 1.0;
    double shadowing_sigma = 4.0;        // dB
    double decorrelation_distance = 5.0; // grid units
    double noise_sigma = 0.01;           // pre-normalization scale
    int sinc_count_min = 1;
    int sinc_count_max = 4;
    ValueRange sinc_center_range{0.0, 1.0};
    ValueRange sinc_width_range{0.05, 0.3};
    ValueRange sinc_power_range{0.5, 2.0};
    double analysis_frequency = 0.5; // normalized band position
    double peak = 0.0;               // 0 = auto
    std::string normalization = "unit_interval";

    void validate() const;

    json to_json() const;
    static MapConfig from_json(const json& j);
};

struct DatasetSummary {
    int count = 0;
    double peak = 0.0;
    std::uint32_t checksum = 0;
};

/// Spatial loss function of one transmitter: distance decay times log-normal
/// shadowing whose dB field has exponential spatial correlation with the
/// configured decorrelation distance. The transmitter cell holds the grid
/// maximum.
SpectrumMap generate_slf(const TransmitterSpec& tx, const MapConfig& config, Rng& rng);

/// Draws a random sinc-sum power spectral density and evaluates it at the
/// analysis frequency; clamped at zero.
double generate_psd_weight(const MapConfig& config, Rng& rng);

/// One complete normalized map: random transmitter count, per-transmitter
/// SLF x PSD weight, additive noise field, clamp, normalize.
SpectrumMap generate_map(const MapConfig& config, Rng& rng);

/// Generates `count` maps, normalizes them by the 99.5th percentile of the
/// per-map maxima, and writes the tensor file plus a JSON sidecar
/// (`path` + ".json") carrying the config echo, peak, seed and checksum.
DatasetSummary generate_dataset(const MapConfig& config, int count, const std::string& path,
                                Rng& rng);

/// Reads back the sidecar written by generate_dataset.
struct DatasetMeta {
    MapConfig config;
    double peak = 0.0;
    std::uint64_t seed = 0;
    std::uint32_t checksum = 0;
    int count = 0;
};
DatasetMeta read_dataset_meta(const std::string& tensor_path);

} // namespace gsc
