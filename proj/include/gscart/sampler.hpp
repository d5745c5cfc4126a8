// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "gscart/grid.hpp"
#include "gscart/json_util.hpp"
#include "gscart/observe.hpp"
#include "gscart/prior.hpp"
#include "gscart/rng.hpp"
#include "gscart/schedule.hpp"

namespace gsc {

/// Reconstruction-run options.
///
/// init_mode chooses the starting state: pure_noise draws x_T from a standard
/// normal and always runs the full schedule; forward_diffused_fill builds a
/// map from the measurements (unobserved pixels get fill_value, or the
/// observed-pixel mean when fill_value is NaN), forward-diffuses it to step
/// steps_used and runs the reverse chain from there. steps_used = 0 means the
/// full schedule.
struct GscConfig {
    enum class Init { pure_noise, forward_diffused_fill };

    Init init_mode = Init::pure_noise;
    double fill_value = std::numeric_limits<double>::quiet_NaN();
    int steps_used = 0;
    double stability_clip = 40.0;

    json to_json() const;
    static GscConfig from_json(const json& j);
};

/// Per-step diagnostics of the measurement conditioning.
struct StepRecord {
    int t = 0;
    double gamma_sq = 0.0;
    double gain = 0.0; // gamma^2 / (gamma^2 + sigma_y^2), in [0, 1]
    int clipped = 0;   // truncated-mean evaluations that hit the stability clip
};

struct PosteriorUpdateReport {
    std::vector<StepRecord> steps;
    json to_json() const;
};

/// Mean of a standard normal truncated to (a, b); either bound may be
/// infinite. Stable for bounds up to |40| via tail-aware evaluation; the
/// result is clamped into [a, b].
double mills_shift(double a, double b);

/// Per-pixel convex blend of the clean-signal estimate toward the linear
/// measurements: observed pixels become
/// (sigma_y^2 x0_hat + gamma^2 y) / (gamma^2 + sigma_y^2),
/// unobserved pixels pass through.
SpectrumMap lmmse_update(const SpectrumMap& x0_hat, const Observation& obs, double gamma_sq_t);

/// Per-pixel truncated-Gaussian posterior mean for quantized measurements:
/// observed pixels become mu + (gamma^2 / s) * mills_shift(a, b) with
/// s = sqrt(gamma^2 + sigma^2) and (a, b) the normalized bin bounds.
/// Intervals entirely beyond +-stability_clip use the near bound instead;
/// clipped (when given) counts those.
SpectrumMap quantized_update(const SpectrumMap& x0_hat, const Observation& obs, double gamma_sq_t,
                             double stability_clip = 40.0, int* clipped = nullptr);

/// Full reverse-diffusion reconstruction: per step, estimate the clean
/// signal, condition it on the measurements (linear or quantized), and take
/// one reverse step. Returns the final conditioned clean-signal estimate.
std::pair<SpectrumMap, PosteriorUpdateReport> reconstruct(const Observation& obs,
                                                          const DenoisingPrior& prior,
                                                          const DiffusionSchedule& sched,
                                                          const GscConfig& cfg, Rng& rng);

} // namespace gsc
