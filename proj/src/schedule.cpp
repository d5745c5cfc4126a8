// SPDX-License-Identifier: Apache-2.0

#include "gscart/schedule.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace gsc {

namespace {

std::uint64_t fnv1a_init() { return 0xcbf29ce484222325ull; }

std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a_double(std::uint64_t h, double d)
{
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(d));
    std::memcpy(&bits, &d, sizeof(bits));
    return fnv1a_u64(h, bits);
}

} // namespace

void DiffusionSchedule::check_step(int t) const
{
    if (t < 1 || t > steps())
        throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [1, " +
                                std::to_string(steps()) + "]");
}

DiffusionSchedule build_schedule(int steps, double beta_start, double beta_end, ScheduleKind kind,
                                 double gamma_scale)
{
    if (kind != ScheduleKind::linear)
        throw std::invalid_argument("build_schedule: unsupported schedule kind");
    if (steps < 1)
        throw std::invalid_argument("build_schedule: steps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
    if (!(gamma_scale > 0.0))
        throw std::invalid_argument("build_schedule: gamma_scale must be > 0");

    DiffusionSchedule s;
    s.gamma_scale_ = gamma_scale;
    s.beta_.resize(steps);
    s.alpha_.resize(steps);
    s.alpha_bar_.resize(steps);
    s.coef_a_.resize(steps);
    s.coef_b_.resize(steps);
    s.sigma_tilde_.resize(steps);
    s.gamma_sq_.resize(steps);

    double abar = 1.0;
    for (int i = 0; i < steps; ++i) {
        double frac = steps == 1 ? 0.0 : (double)i / (double)(steps - 1);
        double beta = beta_start + (beta_end - beta_start) * frac;
        double alpha = 1.0 - beta;
        double abar_prev = abar;
        abar *= alpha;

        s.beta_[i] = beta;
        s.alpha_[i] = alpha;
        s.alpha_bar_[i] = abar;
        s.coef_a_[i] = std::sqrt(abar_prev) * beta / (1.0 - abar);
        s.coef_b_[i] = std::sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar);
        s.sigma_tilde_[i] = std::sqrt(beta * (1.0 - abar_prev) / (1.0 - abar));
        s.gamma_sq_[i] = gamma_scale * (1.0 - abar) / abar;
    }

    std::uint64_t h = fnv1a_init();
    h = fnv1a_u64(h, (std::uint64_t)steps);
    h = fnv1a_double(h, beta_start);
    h = fnv1a_double(h, beta_end);
    h = fnv1a_double(h, gamma_scale);
    s.hash_ = h;
    return s;
}

SpectrumMap forward_diffuse(const SpectrumMap& x0, int t, const DiffusionSchedule& sched, Rng& rng)
{
    sched.check_step(t);
    double abar = sched.alpha_bar(t);
    double signal = std::sqrt(abar);
    double noise = std::sqrt(1.0 - abar);
    SpectrumMap out(x0.rows(), x0.cols());
    for (int i = 0; i < x0.size(); ++i)
        out[i] = signal * x0[i] + noise * rng.normal();
    return out;
}

SpectrumMap tweedie_x0(const SpectrumMap& x_t, const SpectrumMap& eps_pred, int t,
                       const DiffusionSchedule& sched)
{
    sched.check_step(t);
    x_t.require_same_shape(eps_pred, "tweedie_x0");
    double abar = sched.alpha_bar(t);
    double inv_signal = 1.0 / std::sqrt(abar);
    double noise = std::sqrt(1.0 - abar);
    SpectrumMap out(x_t.rows(), x_t.cols());
    for (int i = 0; i < x_t.size(); ++i)
        out[i] = inv_signal * (x_t[i] - noise * eps_pred[i]);
    return out;
}

SpectrumMap reverse_step(const SpectrumMap& x_t, const SpectrumMap& x0_est, int t,
                         const DiffusionSchedule& sched, Rng& rng)
{
    sched.check_step(t);
    x_t.require_same_shape(x0_est, "reverse_step");
    double a = sched.coef_a(t);
    double b = sched.coef_b(t);
    double sigma = sched.sigma_tilde(t);
    SpectrumMap out(x_t.rows(), x_t.cols());
    if (sigma == 0.0) {
        for (int i = 0; i < x_t.size(); ++i)
            out[i] = a * x0_est[i] + b * x_t[i];
    } else {
        for (int i = 0; i < x_t.size(); ++i)
            out[i] = a * x0_est[i] + b * x_t[i] + sigma * rng.normal();
    }
    return out;
}

} // namespace gsc
