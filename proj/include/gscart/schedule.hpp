// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gscart/grid.hpp"
#include "gscart/rng.hpp"

namespace gsc {

enum class ScheduleKind { linear };

/// All per-step scalars of the diffusion process.
///
/// Step indices are 1-based: t runs 1..steps(), matching the forward chain
/// x_0 -> x_1 -> ... -> x_T. alpha_bar_prev(1) is defined as 1, which makes
/// the reverse-step coefficients well defined at t = 1 and sigma_tilde(1) = 0,
/// so the last reverse step is deterministic.
///
/// Immutable after construction; safe to share across concurrent workers.
class DiffusionSchedule {
  public:
    int steps() const { return (int)beta_.size(); }

    double beta(int t) const { return beta_[idx(t)]; }
    double alpha(int t) const { return alpha_[idx(t)]; }
    double alpha_bar(int t) const { return alpha_bar_[idx(t)]; }
    double alpha_bar_prev(int t) const { return t == 1 ? 1.0 : alpha_bar_[idx(t - 1)]; }

    /// Coefficient of the clean-signal estimate in the reverse-step mean.
    double coef_a(int t) const { return coef_a_[idx(t)]; }
    /// Coefficient of the current state in the reverse-step mean.
    double coef_b(int t) const { return coef_b_[idx(t)]; }
    /// Reverse-step noise standard deviation; zero at t = 1.
    double sigma_tilde(int t) const { return sigma_tilde_[idx(t)]; }
    /// Conditional-prior variance of the clean signal given x_t,
    /// gamma_scale * (1 - alpha_bar_t) / alpha_bar_t.
    double gamma_sq(int t) const { return gamma_sq_[idx(t)]; }

    double gamma_scale() const { return gamma_scale_; }

    /// FNV-1a over the defining parameters; persisted with trained models so
    /// a model is never run against a schedule it was not trained for.
    std::uint64_t hash() const { return hash_; }

    void check_step(int t) const;

    friend DiffusionSchedule build_schedule(int steps, double beta_start, double beta_end,
                                            ScheduleKind kind, double gamma_scale);

  private:
    int idx(int t) const
    {
        check_step(t);
        return t - 1;
    }

    std::vector<double> beta_, alpha_, alpha_bar_, coef_a_, coef_b_, sigma_tilde_, gamma_sq_;
    double gamma_scale_ = 1.0;
    std::uint64_t hash_ = 0;
};

/// Builds the variance schedule. beta is linearly spaced from beta_start to
/// beta_end inclusive (beta_start == beta_end when steps == 1).
/// Requires steps >= 1 and 0 < beta_start <= beta_end < 1.
DiffusionSchedule build_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02,
                                 ScheduleKind kind = ScheduleKind::linear,
                                 double gamma_scale = 1.0);

/// One draw of x_t from the closed-form forward marginal
/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
SpectrumMap forward_diffuse(const SpectrumMap& x0, int t, const DiffusionSchedule& sched,
                            Rng& rng);

/// Clean-signal estimate (x_t - sqrt(1 - alpha_bar_t) eps_pred) / sqrt(alpha_bar_t).
SpectrumMap tweedie_x0(const SpectrumMap& x_t, const SpectrumMap& eps_pred, int t,
                       const DiffusionSchedule& sched);

/// One reverse sampling step: coef_a * x0_est + coef_b * x_t + sigma_tilde * z.
/// Deterministic at t = 1.
SpectrumMap reverse_step(const SpectrumMap& x_t, const SpectrumMap& x0_est, int t,
                         const DiffusionSchedule& sched, Rng& rng);

} // namespace gsc
