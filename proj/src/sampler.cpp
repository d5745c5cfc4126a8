// SPDX-License-Identifier: Apache-2.0

#include "gscart/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gscart/errors.hpp"

namespace gsc {

namespace {

constexpr double kRoot2 = 1.41421356237309504880;
constexpr double kRoot2Pi = 2.50662827463100050242;

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kRoot2Pi; }

/// Upper-tail mass over density, Q(x)/phi(x), for x >= 0. Direct evaluation
/// is exact until erfc gets small; past that the Laplace continued fraction
/// converges in a few dozen terms.
double mills_ratio(double x)
{
    if (x < 20.0)
        return 0.5 * std::erfc(x / kRoot2) * kRoot2Pi * std::exp(0.5 * x * x);
    double f = 0.0;
    for (int k = 60; k >= 1; --k)
        f = k / (x + f);
    return 1.0 / (x + f);
}

/// Mean of a standard normal truncated to (a, +inf).
double one_sided_mean(double a)
{
    if (a <= 0.0)
        return normal_pdf(a) / (0.5 * std::erfc(a / kRoot2));
    return 1.0 / mills_ratio(a);
}

/// Mean over (a, b) with 0 <= a < b: everything is expressed through Mills
/// ratios and the density ratio rho = phi(b)/phi(a), so no tail probability
/// is ever formed directly.
double same_side_mean(double a, double b)
{
    double expo = -0.5 * (b - a) * (b + a);
    double rho = std::exp(expo);
    double num = -std::expm1(expo); // 1 - rho, accurate for narrow bins
    double den = mills_ratio(a) - rho * mills_ratio(b);
    if (den <= 0.0)
        return a; // interval mass below representable precision
    return num / den;
}

/// Mean over (a, b) with a < 0 < b. The density difference is anchored on
/// the larger density so the expm1 argument is never positive.
double straddle_mean(double a, double b)
{
    double num;
    if (std::abs(a) <= std::abs(b))
        num = -normal_pdf(a) * std::expm1(0.5 * (a - b) * (a + b));
    else
        num = normal_pdf(b) * std::expm1(0.5 * (b - a) * (b + a));
    double den = 0.5 * (std::erf(b / kRoot2) - std::erf(a / kRoot2));
    return num / den;
}

} // namespace

double mills_shift(double a, double b)
{
    if (!(a < b))
        throw std::invalid_argument("mills_shift: need a < b");
    bool a_inf = std::isinf(a), b_inf = std::isinf(b);
    double d;
    if (a_inf && b_inf)
        return 0.0;
    else if (a_inf)
        d = -one_sided_mean(-b);
    else if (b_inf)
        d = (a <= 0.0) ? one_sided_mean(a) : 1.0 / mills_ratio(a);
    else if (a >= 0.0)
        d = same_side_mean(a, b);
    else if (b <= 0.0)
        d = -same_side_mean(-b, -a);
    else
        d = straddle_mean(a, b);

    if (!a_inf)
        d = std::max(d, a);
    if (!b_inf)
        d = std::min(d, b);
    return d;
}

SpectrumMap lmmse_update(const SpectrumMap& x0_hat, const Observation& obs, double gamma_sq_t)
{
    if (obs.is_quantized())
        throw std::invalid_argument("lmmse_update: observation is quantized");
    if (!(gamma_sq_t > 0.0))
        throw std::invalid_argument("lmmse_update: gamma_sq_t must be > 0");
    if (!obs.mask.fits(x0_hat))
        throw std::invalid_argument("lmmse_update: observation shape does not match map");

    double sig_sq = obs.noise_sigma * obs.noise_sigma;
    SpectrumMap out = x0_hat;
    for (int i = 0; i < obs.mask.size(); ++i) {
        int idx = obs.mask.observed[(std::size_t)i];
        double y = obs.values[(std::size_t)i];
        out[idx] = sig_sq == 0.0
                       ? y // noiseless data consistency, exact
                       : (sig_sq * x0_hat[idx] + gamma_sq_t * y) / (gamma_sq_t + sig_sq);
    }
    return out;
}

SpectrumMap quantized_update(const SpectrumMap& x0_hat, const Observation& obs, double gamma_sq_t,
                             double stability_clip, int* clipped)
{
    if (!obs.is_quantized())
        throw std::invalid_argument("quantized_update: observation has no quantizer");
    if (!(gamma_sq_t > 0.0))
        throw std::invalid_argument("quantized_update: gamma_sq_t must be > 0");
    if (!(stability_clip > 0.0))
        throw std::invalid_argument("quantized_update: stability_clip must be > 0");
    if (!obs.mask.fits(x0_hat))
        throw std::invalid_argument("quantized_update: observation shape does not match map");

    const QuantizerSpec& q = *obs.quantizer;
    double s = std::sqrt(gamma_sq_t + obs.noise_sigma * obs.noise_sigma);
    double scale = gamma_sq_t / s;
    SpectrumMap out = x0_hat;
    for (int i = 0; i < obs.mask.size(); ++i) {
        int idx = obs.mask.observed[(std::size_t)i];
        int level = obs.level_at(i);
        double mu = x0_hat[idx];
        double a = (q.lower(level) - mu) / s;
        double b = (q.upper(level) - mu) / s;
        double d;
        if (a >= stability_clip) {
            d = a; // bin lies entirely in the far upper tail
            if (clipped)
                ++*clipped;
        } else if (b <= -stability_clip) {
            d = b;
            if (clipped)
                ++*clipped;
        } else {
            d = mills_shift(a, b);
        }
        out[idx] = mu + scale * d;
    }
    return out;
}

json GscConfig::to_json() const
{
    json j;
    j["init_mode"] = init_mode == Init::pure_noise ? "pure_noise" : "forward_diffused_fill";
    if (std::isnan(fill_value))
        j["fill_value"] = nullptr;
    else
        j["fill_value"] = fill_value;
    j["steps_used"] = steps_used;
    j["stability_clip"] = stability_clip;
    return j;
}

GscConfig GscConfig::from_json(const json& j)
{
    check_keys(j, {"init_mode", "fill_value", "steps_used", "stability_clip"}, "sampler config");
    GscConfig c;
    std::string mode = get_or<std::string>(j, "init_mode", "pure_noise");
    if (mode == "pure_noise")
        c.init_mode = Init::pure_noise;
    else if (mode == "forward_diffused_fill")
        c.init_mode = Init::forward_diffused_fill;
    else
        throw ConfigError("sampler config: unknown init_mode \"" + mode + "\"");
    if (j.contains("fill_value") && !j.at("fill_value").is_null())
        c.fill_value = j.at("fill_value").get<double>();
    c.steps_used = get_or(j, "steps_used", c.steps_used);
    c.stability_clip = get_or(j, "stability_clip", c.stability_clip);
    if (c.steps_used < 0)
        throw ConfigError("sampler config: steps_used must be >= 0");
    if (!(c.stability_clip > 0.0))
        throw ConfigError("sampler config: stability_clip must be > 0");
    return c;
}

json PosteriorUpdateReport::to_json() const
{
    json arr = json::array();
    for (const StepRecord& r : steps)
        arr.push_back(
            {{"t", r.t}, {"gamma_sq", r.gamma_sq}, {"gain", r.gain}, {"clipped", r.clipped}});
    return {{"steps", arr}};
}

namespace {

/// Measurement values on the grid scale: linear readouts as-is, quantized
/// levels mapped to their interval representatives.
double observed_value(const Observation& obs, int i)
{
    if (obs.is_quantized())
        return obs.quantizer->dequantize(obs.level_at(i));
    return obs.values[(std::size_t)i];
}

} // namespace

std::pair<SpectrumMap, PosteriorUpdateReport> reconstruct(const Observation& obs,
                                                          const DenoisingPrior& prior,
                                                          const DiffusionSchedule& sched,
                                                          const GscConfig& cfg, Rng& rng)
{
    obs.validate();
    if (obs.mask.rows != prior.rows() || obs.mask.cols != prior.cols())
        throw std::invalid_argument("reconstruct: observation grid does not match prior shape");

    int T = sched.steps();
    int used = cfg.steps_used == 0 ? T : cfg.steps_used;
    if (used < 1 || used > T)
        throw std::invalid_argument("reconstruct: steps_used out of range for this schedule");
    if (cfg.init_mode == GscConfig::Init::pure_noise && used != T)
        throw std::invalid_argument("reconstruct: pure_noise init always runs the full schedule");

    // The chain runs in the prior's model units u = vs * x + vc; the affine
    // map is exact for the linear and the quantized update alike, so only the
    // measurements and the final state cross it.
    const double vs = prior.value_scale();
    const double vc = prior.value_shift();
    if (!(vs > 0.0))
        throw std::invalid_argument("reconstruct: prior value_scale must be > 0");
    Observation obs_m = obs;
    if (vs != 1.0 || vc != 0.0) {
        if (obs_m.is_quantized()) {
            // level indices are unchanged; the interval bounds move
            obs_m.quantizer->x_min = vs * obs.quantizer->x_min + vc;
            obs_m.quantizer->x_max = vs * obs.quantizer->x_max + vc;
        } else {
            for (double& v : obs_m.values)
                v = vs * v + vc;
        }
        obs_m.noise_sigma = vs * obs.noise_sigma;
    }

    int rows = obs_m.mask.rows, cols = obs_m.mask.cols;
    SpectrumMap x(rows, cols);
    if (cfg.init_mode == GscConfig::Init::pure_noise) {
        for (int i = 0; i < x.size(); ++i)
            x[i] = rng.normal();
    } else {
        if (obs_m.mask.size() == 0)
            throw std::invalid_argument("reconstruct: forward_diffused_fill needs observations");
        double fill = cfg.fill_value;
        if (std::isnan(fill)) {
            double sum = 0.0;
            for (int i = 0; i < obs_m.mask.size(); ++i)
                sum += observed_value(obs_m, i);
            fill = sum / obs_m.mask.size();
        } else {
            fill = vs * fill + vc;
        }
        SpectrumMap init(rows, cols, fill);
        for (int i = 0; i < obs_m.mask.size(); ++i)
            init[obs_m.mask.observed[(std::size_t)i]] = observed_value(obs_m, i);
        x = forward_diffuse(init, used, sched, rng);
    }

    double sig_sq = obs_m.noise_sigma * obs_m.noise_sigma;
    PosteriorUpdateReport report;
    report.steps.reserve((std::size_t)used);

    for (int t = used; t >= 1; --t) {
        SpectrumMap eps = prior.predict_noise(x, t, sched);
        SpectrumMap x0_hat = tweedie_x0(x, eps, t, sched);

        double gamma_sq = prior.clean_signal_variance(t, sched);
        StepRecord rec;
        rec.t = t;
        rec.gamma_sq = gamma_sq;
        rec.gain = gamma_sq / (gamma_sq + sig_sq);

        SpectrumMap x0_post = obs_m.is_quantized()
                                  ? quantized_update(x0_hat, obs_m, gamma_sq, cfg.stability_clip,
                                                     &rec.clipped)
                                  : lmmse_update(x0_hat, obs_m, gamma_sq);
        report.steps.push_back(rec);
        if (!x0_post.all_finite())
            throw NumericalError("reconstruct: non-finite state at step " + std::to_string(t));

        x = reverse_step(x, x0_post, t, sched, rng);
    }
    // the final reverse step is deterministic, so x equals the last
    // conditioned clean-signal estimate
    if (!x.all_finite())
        throw NumericalError("reconstruct: non-finite output");
    for (int i = 0; i < x.size(); ++i)
        x[i] = (x[i] - vc) / vs;
    return {std::move(x), std::move(report)};
}

} // namespace gsc
