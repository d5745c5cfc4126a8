// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gscart/grid.hpp"
#include "gscart/observe.hpp"
#include "gscart/prior.hpp"
#include "gscart/sampler.hpp"
#include "gscart/schedule.hpp"

namespace gsc {

/// N reconstructions of the same observation with independent randomness,
/// plus their pixel-wise mean and population (1/N) variance. The variance is
/// the epistemic-uncertainty map that drives sampling.
struct PosteriorEnsemble {
    std::vector<SpectrumMap> samples;
    SpectrumMap mean;
    SpectrumMap variance;

    void validate() const;
};

PosteriorEnsemble posterior_ensemble(const Observation& obs, const DenoisingPrior& prior,
                                     const DiffusionSchedule& sched, const GscConfig& cfg, int n,
                                     Rng& rng);

/// The ensemble's variance map, after checking the stored moments against
/// the samples.
SpectrumMap uncertainty_map(const PosteriorEnsemble& ens);

enum class SelectPolicy { kmeans, random };

/// Next-measurement proposal: one pixel per cluster. `candidates` lists the
/// unobserved pixels in ascending order and `assignment` gives each one's
/// cluster (empty for the random policy); points[k] is cluster k's pick.
struct SamplingPlan {
    SelectPolicy policy = SelectPolicy::random;
    std::vector<int> points;
    std::vector<int> candidates;
    std::vector<int> assignment;

    void validate(const ObservationMask& mask) const;
};

/// Relative weighting of the clustering features: coordinates are scaled to
/// [0, 1) and multiplied by w_xy, normalized uncertainty by w_v.
struct KmeansWeights {
    double w_xy = 1.0;
    double w_v = 1.0;
};

/// Diversity-aware selection: clusters the unobserved pixels on
/// (position, normalized uncertainty) with K-means (k-means++ seeding,
/// capped Lloyd iterations) and picks each cluster's maximum-uncertainty
/// pixel, ties to the smallest linear index.
SamplingPlan kmeans_select(const SpectrumMap& V, const ObservationMask& mask, int q,
                           const KmeansWeights& weights, Rng& rng);

/// Uniform selection of q distinct unobserved pixels.
SamplingPlan random_select(const ObservationMask& mask, int q, Rng& rng);

/// Sensor model applied when the loop takes new measurements.
struct ObsModel {
    double sigma = 0.0;
    std::optional<QuantizerSpec> quantizer;
};

struct TrajectoryPoint {
    int round = 0;
    double observed_ratio = 0.0;
    double psnr_db = 0.0;
};

/// Optional observer invoked once per round after the ensemble refresh,
/// with the plan that produced the round's measurements (null for round 0).
using RoundSink = std::function<void(int round, const Observation& obs,
                                     const PosteriorEnsemble& ens, const SamplingPlan* plan)>;

/// Closed measurement loop: reconstruct an ensemble, record PSNR of its mean
/// against the truth, pick the next locations by policy, measure the truth
/// there under the sensor model, and repeat once per increment. Round k adds
/// round(increments[k-1] * pixel count) locations.
std::vector<TrajectoryPoint> active_loop(const SpectrumMap& truth, double initial_ratio,
                                         const std::vector<double>& increments,
                                         SelectPolicy policy, const ObsModel& model,
                                         const DenoisingPrior& prior,
                                         const DiffusionSchedule& sched, const GscConfig& cfg,
                                         int ensemble_n, const KmeansWeights& weights, Rng& rng,
                                         const RoundSink& sink = {});

/// CSV with schema: round, observed_ratio, policy, seed, psnr.
std::string render_trajectory_csv(const std::vector<TrajectoryPoint>& traj, SelectPolicy policy,
                                  std::uint64_t seed);

const char* policy_name(SelectPolicy policy);

} // namespace gsc
