// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gscart/denoiser_net.hpp"
#include "gscart/grid.hpp"
#include "gscart/json_util.hpp"
#include "gscart/rng.hpp"
#include "gscart/schedule.hpp"

namespace gsc {

/// A denoising prior: predicts the noise component of a diffused map so the
/// sampler can form clean-signal estimates. Implementations are immutable
/// once built; predict_noise is safe to call concurrently.
class DenoisingPrior {
public:
    virtual ~DenoisingPrior() = default;

    virtual int rows() const = 0;
    virtual int cols() const = 0;

    /// Noise estimate for the diffused map x_t at step t (1-based).
    virtual SpectrumMap predict_noise(const SpectrumMap& x_t, int t,
                                      const DiffusionSchedule& sched) const = 0;

    /// Variance the posterior updates should assign to the clean-signal
    /// estimate at step t. The default is the schedule's step-variance rule;
    /// priors with an exact conditional variance override it.
    virtual double clean_signal_variance(int t, const DiffusionSchedule& sched) const;

    /// Affine change of variable u = value_scale * x + value_shift between
    /// map units and the units the prior models. The sampler runs the
    /// diffusion chain in model units so the clean signal is commensurate
    /// with the unit-variance noise; observations and results are mapped
    /// across the same transform. Identity by default.
    virtual double value_scale() const { return 1.0; }
    virtual double value_shift() const { return 0.0; }

    void require_shape(const SpectrumMap& m) const;
};

/// I.i.d. per-pixel Gaussian prior x0 ~ N(mean_map, tau^2 I). Its noise
/// prediction and clean-signal variance are exact conjugate-Gaussian
/// expressions, which makes end-to-end sampler output checkable against
/// closed-form posterior moments.
class AnalyticGaussianPrior final : public DenoisingPrior {
public:
    AnalyticGaussianPrior(SpectrumMap mean_map, double tau_sq);

    int rows() const override { return mean_.rows(); }
    int cols() const override { return mean_.cols(); }
    const SpectrumMap& mean_map() const { return mean_; }
    double tau_sq() const { return tau_sq_; }

    SpectrumMap predict_noise(const SpectrumMap& x_t, int t,
                              const DiffusionSchedule& sched) const override;
    double clean_signal_variance(int t, const DiffusionSchedule& sched) const override;

    /// Exact E[x0 | x_t] under this prior; predict_noise is derived from it.
    SpectrumMap conditional_mean(const SpectrumMap& x_t, int t,
                                 const DiffusionSchedule& sched) const;

private:
    SpectrumMap mean_;
    double tau_sq_;
};

/// Training hyperparameters for the learned denoiser.
struct TrainConfig {
    int epochs = 16;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    double holdout_fraction = 0.1;

    void validate() const;
    json to_json() const;
    static TrainConfig from_json(const json& j);
};

/// Summary of a finished training run, written next to the model file.
struct TrainReport {
    int epochs = 0;
    int parameter_count = 0;
    double final_train_loss = 0.0;
    double holdout_loss = 0.0;
    std::vector<double> epoch_losses;
};

/// Convolutional noise predictor trained with the standard step-t
/// noise-matching objective. Bound to the grid shape and schedule it was
/// trained for. The network models maps on the [-1, 1] scale (u = 2x - 1),
/// which keeps the clean signal commensurate with the unit-variance
/// diffusion noise; training and sampling share the transform.
class LearnedDenoiser final : public DenoisingPrior {
public:
    /// Freshly initialized network.
    LearnedDenoiser(int rows, int cols, net::NetSpec spec, std::uint64_t schedule_hash, Rng& rng);
    /// Rebuilt from a serialized parameter blob.
    LearnedDenoiser(int rows, int cols, net::NetSpec spec, std::uint64_t schedule_hash,
                    std::vector<float> params);

    int rows() const override { return rows_; }
    int cols() const override { return cols_; }
    std::uint64_t schedule_hash() const { return schedule_hash_; }
    const net::NetSpec& spec() const { return spec_; }
    const TrainReport& report() const { return report_; }

    SpectrumMap predict_noise(const SpectrumMap& x_t, int t,
                              const DiffusionSchedule& sched) const override;

    double value_scale() const override { return 2.0; }
    double value_shift() const override { return -1.0; }

    net::DenoiserNet& net() { return net_; }
    const net::DenoiserNet& net() const { return net_; }

private:
    friend LearnedDenoiser train_denoiser(const std::string&, const DiffusionSchedule&,
                                          const TrainConfig&);
    int rows_;
    int cols_;
    net::NetSpec spec_;
    std::uint64_t schedule_hash_;
    net::DenoiserNet net_;
    TrainReport report_;
};

/// Trains a fresh denoiser on a map tensor file. A trailing fraction of the
/// samples is held out; the returned report carries per-epoch training losses
/// and the held-out loss (a zero predictor scores 1.0 by construction).
LearnedDenoiser train_denoiser(const std::string& dataset, const DiffusionSchedule& sched,
                               const TrainConfig& cfg);

/// Model file I/O. The file records shape, schedule hash, parameters and a
/// checksum; loading verifies all of them. A JSON sidecar (path + ".json")
/// carries the training report.
void save_prior(const std::string& path, const LearnedDenoiser& prior);
LearnedDenoiser load_prior(const std::string& path, const DiffusionSchedule& sched);

} // namespace gsc
