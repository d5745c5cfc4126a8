// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gscart/baseline.hpp"
#include "gscart/grid.hpp"
#include "gscart/json_util.hpp"
#include "gscart/prior.hpp"
#include "gscart/sampler.hpp"
#include "gscart/schedule.hpp"
#include "gscart/tensor_io.hpp"

namespace gsc {

/// Mean squared error between two equally shaped maps.
double mse(const SpectrumMap& x, const SpectrumMap& x_hat);

/// 10*log10(peak^2 / MSE) in dB; returns `cap` when the error is zero.
double psnr(const SpectrumMap& x, const SpectrumMap& x_hat, double peak, double cap = 99.0);

/// One experiment-table row. `mse` is the across-maps mean for the cell and
/// seed; `psnr_db` is derived from it, so the defining identity holds exactly.
struct MetricRecord {
    std::string method;
    double ratio = 0.0;
    double sigma = 0.0;
    int bits = 0; // 0 = linear observations
    std::uint64_t seed = 0;
    double psnr_db = 0.0;
    double mse = 0.0;
};

/// Axes of the comparison sweep.
struct ExperimentGrid {
    int map_count = 20;
    std::vector<double> ratios{0.2, 0.15, 0.1, 0.05};
    std::vector<double> sigmas{0.0};
    std::vector<int> bits{0};
    std::vector<std::string> methods{"gsc", "idw"};
    std::vector<std::uint64_t> seeds{1};
    // Posterior samples averaged into the sampler's point estimate; 1 keeps
    // the raw single-sample reconstruction.
    int gsc_samples = 1;

    void validate() const;
    json to_json() const;
    static ExperimentGrid from_json(const json& j);
};

/// Runs the full sweep over held-out maps. One record per
/// (method, ratio, sigma, bits, seed); cell randomness is derived from the
/// seed and the cell key only, so every cell is reproducible in isolation.
/// Failing cells are noted in the summary and skipped. The prior may be null
/// when no cell uses the sampler. When the paths are nonempty, writes the
/// sorted CSV and a per-cell mean summary.
std::vector<MetricRecord> run_experiment(const ExperimentGrid& grid, const MapTensor& eval_maps,
                                         const DenoisingPrior* prior,
                                         const DiffusionSchedule& sched, const GscConfig& gsc_cfg,
                                         const IdwConfig& idw_cfg, const std::string& csv_path,
                                         const std::string& summary_path);

/// The CSV emitted by run_experiment: header plus one line per record.
std::string render_records_csv(const std::vector<MetricRecord>& records);

} // namespace gsc
