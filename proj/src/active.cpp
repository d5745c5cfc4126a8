// SPDX-License-Identifier: Apache-2.0

#include "gscart/active.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gscart/eval.hpp"

namespace gsc {

void PosteriorEnsemble::validate() const
{
    if (samples.size() < 2)
        throw std::invalid_argument("PosteriorEnsemble: need at least 2 samples");
    for (const SpectrumMap& s : samples)
        samples.front().require_same_shape(s, "PosteriorEnsemble");
    samples.front().require_same_shape(mean, "PosteriorEnsemble mean");
    samples.front().require_same_shape(variance, "PosteriorEnsemble variance");

    int n = (int)samples.size();
    for (int i = 0; i < mean.size(); ++i) {
        double m = 0.0;
        for (const SpectrumMap& s : samples)
            m += s[i];
        m /= n;
        double v = 0.0;
        for (const SpectrumMap& s : samples)
            v += (s[i] - m) * (s[i] - m);
        v /= n;
        if (std::abs(m - mean[i]) > 1e-10 || std::abs(v - variance[i]) > 1e-10 ||
            variance[i] < 0.0)
            throw std::invalid_argument("PosteriorEnsemble: stored moments disagree with samples");
    }
}

PosteriorEnsemble posterior_ensemble(const Observation& obs, const DenoisingPrior& prior,
                                     const DiffusionSchedule& sched, const GscConfig& cfg, int n,
                                     Rng& rng)
{
    if (n < 2)
        throw std::invalid_argument("posterior_ensemble: need n >= 2");

    PosteriorEnsemble ens;
    ens.samples.reserve((std::size_t)n);
    for (int k = 0; k < n; ++k) {
        Rng member = rng.fork((std::uint64_t)k);
        ens.samples.push_back(reconstruct(obs, prior, sched, cfg, member).first);
    }

    int rows = ens.samples.front().rows(), cols = ens.samples.front().cols();
    ens.mean = SpectrumMap(rows, cols, 0.0);
    ens.variance = SpectrumMap(rows, cols, 0.0);
    for (const SpectrumMap& s : ens.samples)
        for (int i = 0; i < ens.mean.size(); ++i)
            ens.mean[i] += s[i];
    for (int i = 0; i < ens.mean.size(); ++i)
        ens.mean[i] /= n;
    for (const SpectrumMap& s : ens.samples)
        for (int i = 0; i < ens.variance.size(); ++i) {
            double d = s[i] - ens.mean[i];
            ens.variance[i] += d * d;
        }
    for (int i = 0; i < ens.variance.size(); ++i)
        ens.variance[i] /= n;
    return ens;
}

SpectrumMap uncertainty_map(const PosteriorEnsemble& ens)
{
    ens.validate();
    return ens.variance;
}

void SamplingPlan::validate(const ObservationMask& mask) const
{
    std::vector<std::uint8_t> observed = mask.flags();
    std::vector<std::uint8_t> chosen(observed.size(), 0);
    for (int p : points) {
        if (p < 0 || p >= (int)observed.size())
            throw std::out_of_range("SamplingPlan: point outside grid");
        if (observed[(std::size_t)p])
            throw std::invalid_argument("SamplingPlan: point already observed");
        if (chosen[(std::size_t)p])
            throw std::invalid_argument("SamplingPlan: duplicate point");
        chosen[(std::size_t)p] = 1;
    }
    if (!assignment.empty() && assignment.size() != candidates.size())
        throw std::invalid_argument("SamplingPlan: assignment/candidate length mismatch");
}

namespace {

std::vector<int> unobserved_indices(const ObservationMask& mask)
{
    std::vector<std::uint8_t> flags = mask.flags();
    std::vector<int> out;
    out.reserve(flags.size() - mask.observed.size());
    for (int i = 0; i < (int)flags.size(); ++i)
        if (!flags[(std::size_t)i])
            out.push_back(i);
    return out;
}

double sq_dist3(const double* a, const double* b)
{
    double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

} // namespace

SamplingPlan kmeans_select(const SpectrumMap& V, const ObservationMask& mask, int q,
                           const KmeansWeights& weights, Rng& rng)
{
    mask.validate();
    if (!mask.fits(V))
        throw std::invalid_argument("kmeans_select: mask shape does not match uncertainty map");
    if (q < 1)
        throw std::invalid_argument("kmeans_select: need q >= 1");
    std::vector<int> cand = unobserved_indices(mask);
    int n = (int)cand.size();
    if (n < q)
        throw std::invalid_argument("kmeans_select: only " + std::to_string(n) +
                                    " unobserved pixels for q = " + std::to_string(q));

    // features: (w_xy * row / rows, w_xy * col / cols, w_v * V / max V)
    double vmax = 0.0;
    for (int idx : cand)
        vmax = std::max(vmax, V[idx]);
    std::vector<double> feat((std::size_t)n * 3);
    for (int k = 0; k < n; ++k) {
        int idx = cand[(std::size_t)k];
        feat[(std::size_t)k * 3 + 0] = weights.w_xy * (double)(idx / mask.cols) / mask.rows;
        feat[(std::size_t)k * 3 + 1] = weights.w_xy * (double)(idx % mask.cols) / mask.cols;
        feat[(std::size_t)k * 3 + 2] = vmax > 0.0 ? weights.w_v * V[idx] / vmax : 0.0;
    }
    auto fp = [&](int k) { return feat.data() + (std::size_t)k * 3; };

    // Lloyd's algorithm converges to a local optimum that depends on the
    // seeding, so run several k-means++ starts and keep the partition with
    // the lowest within-cluster sum of squares.
    constexpr int kRestarts = 8;
    std::vector<double> centers((std::size_t)q * 3);
    auto cp = [&](int c) { return centers.data() + (std::size_t)c * 3; };
    std::vector<double> best_d((std::size_t)n);
    std::vector<int> assign((std::size_t)n), best_assign;
    std::vector<int> count((std::size_t)q);
    std::vector<double> sums((std::size_t)q * 3);
    double best_inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < kRestarts; ++restart) {
        // k-means++ seeding
        std::fill(best_d.begin(), best_d.end(), std::numeric_limits<double>::infinity());
        int first = (int)rng.uniform_int((std::uint64_t)n);
        std::copy(fp(first), fp(first) + 3, cp(0));
        for (int c = 1; c < q; ++c) {
            double total = 0.0;
            for (int k = 0; k < n; ++k) {
                best_d[(std::size_t)k] =
                    std::min(best_d[(std::size_t)k], sq_dist3(fp(k), cp(c - 1)));
                total += best_d[(std::size_t)k];
            }
            int pick;
            if (total > 0.0) {
                double u = rng.uniform() * total, run = 0.0;
                pick = n - 1;
                for (int k = 0; k < n; ++k) {
                    run += best_d[(std::size_t)k];
                    if (u < run) {
                        pick = k;
                        break;
                    }
                }
            } else {
                pick = (int)rng.uniform_int((std::uint64_t)n); // all points coincide
            }
            std::copy(fp(pick), fp(pick) + 3, cp(c));
        }

        // Lloyd iterations; stop when assignments settle
        std::fill(assign.begin(), assign.end(), -1);
        for (int iter = 0; iter < 100; ++iter) {
            bool changed = false;
            for (int k = 0; k < n; ++k) {
                int best = 0;
                double bd = sq_dist3(fp(k), cp(0));
                for (int c = 1; c < q; ++c) {
                    double d = sq_dist3(fp(k), cp(c));
                    if (d < bd) {
                        bd = d;
                        best = c;
                    }
                }
                if (assign[(std::size_t)k] != best) {
                    assign[(std::size_t)k] = best;
                    changed = true;
                }
            }
            if (!changed)
                break;

            std::fill(count.begin(), count.end(), 0);
            std::fill(sums.begin(), sums.end(), 0.0);
            for (int k = 0; k < n; ++k) {
                int c = assign[(std::size_t)k];
                ++count[(std::size_t)c];
                for (int d = 0; d < 3; ++d)
                    sums[(std::size_t)c * 3 + d] += fp(k)[d];
            }
            for (int c = 0; c < q; ++c) {
                if (count[(std::size_t)c] > 0) {
                    for (int d = 0; d < 3; ++d)
                        cp(c)[d] = sums[(std::size_t)c * 3 + d] / count[(std::size_t)c];
                } else {
                    // re-seed an empty cluster to the point farthest from its center
                    int far = 0;
                    double fd = -1.0;
                    for (int k = 0; k < n; ++k) {
                        double d = sq_dist3(fp(k), cp(assign[(std::size_t)k]));
                        if (d > fd) {
                            fd = d;
                            far = k;
                        }
                    }
                    std::copy(fp(far), fp(far) + 3, cp(c));
                }
            }
        }

        double inertia = 0.0;
        for (int k = 0; k < n; ++k)
            inertia += sq_dist3(fp(k), cp(assign[(std::size_t)k]));
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_assign = assign;
        }
    }
    assign = best_assign;

    SamplingPlan plan;
    plan.policy = SelectPolicy::kmeans;
    plan.candidates = cand;
    plan.assignment = assign;
    plan.points.resize((std::size_t)q, -1);
    // per cluster: the maximum-uncertainty member, smallest index on ties
    for (int k = 0; k < n; ++k) {
        int c = assign[(std::size_t)k];
        int& cur = plan.points[(std::size_t)c];
        if (cur < 0 || V[cand[(std::size_t)k]] > V[cur])
            cur = cand[(std::size_t)k]; // candidates ascend, so ties keep the smaller index
    }
    // a cluster can stay empty when many features coincide; give it the
    // smallest unclaimed candidate so the plan always has q distinct points
    for (int c = 0; c < q; ++c) {
        if (plan.points[(std::size_t)c] >= 0)
            continue;
        for (int k = 0; k < n; ++k) {
            int idx = cand[(std::size_t)k];
            if (std::find(plan.points.begin(), plan.points.end(), idx) == plan.points.end()) {
                plan.points[(std::size_t)c] = idx;
                plan.assignment[(std::size_t)k] = c;
                break;
            }
        }
    }
    plan.validate(mask);
    return plan;
}

SamplingPlan random_select(const ObservationMask& mask, int q, Rng& rng)
{
    mask.validate();
    if (q < 1)
        throw std::invalid_argument("random_select: need q >= 1");
    std::vector<int> cand = unobserved_indices(mask);
    int n = (int)cand.size();
    if (n < q)
        throw std::invalid_argument("random_select: only " + std::to_string(n) +
                                    " unobserved pixels for q = " + std::to_string(q));
    for (int i = 0; i < q; ++i) {
        int j = i + (int)rng.uniform_int((std::uint64_t)(n - i));
        std::swap(cand[(std::size_t)i], cand[(std::size_t)j]);
    }
    SamplingPlan plan;
    plan.policy = SelectPolicy::random;
    plan.points.assign(cand.begin(), cand.begin() + q);
    plan.validate(mask);
    return plan;
}

namespace {

Observation observe_at(const SpectrumMap& truth, const std::vector<int>& points,
                       const ObsModel& model, Rng& rng)
{
    ObservationMask mask;
    mask.rows = truth.rows();
    mask.cols = truth.cols();
    mask.observed = points;
    std::sort(mask.observed.begin(), mask.observed.end());
    if (model.quantizer)
        return observe_quantized(truth, mask, model.sigma, *model.quantizer, rng);
    return observe_linear(truth, mask, model.sigma, rng);
}

} // namespace

std::vector<TrajectoryPoint> active_loop(const SpectrumMap& truth, double initial_ratio,
                                         const std::vector<double>& increments,
                                         SelectPolicy policy, const ObsModel& model,
                                         const DenoisingPrior& prior,
                                         const DiffusionSchedule& sched, const GscConfig& cfg,
                                         int ensemble_n, const KmeansWeights& weights, Rng& rng,
                                         const RoundSink& sink)
{
    if (!(initial_ratio > 0.0) || initial_ratio > 1.0)
        throw std::invalid_argument("active_loop: initial_ratio must be in (0, 1]");
    double total = initial_ratio;
    for (double inc : increments) {
        if (!(inc > 0.0))
            throw std::invalid_argument("active_loop: increments must be > 0");
        total += inc;
    }
    if (total > 1.0 + 1e-12)
        throw std::invalid_argument("active_loop: budget exceeds the grid");

    int pixels = truth.rows() * truth.cols();
    ObservationMask mask = random_mask(truth.rows(), truth.cols(), initial_ratio, rng);
    Observation obs = model.quantizer
                          ? observe_quantized(truth, mask, model.sigma, *model.quantizer, rng)
                          : observe_linear(truth, mask, model.sigma, rng);

    std::vector<TrajectoryPoint> traj;
    PosteriorEnsemble ens = posterior_ensemble(obs, prior, sched, cfg, ensemble_n, rng);
    traj.push_back({0, (double)obs.mask.size() / pixels, psnr(truth, ens.mean, 1.0)});
    if (sink)
        sink(0, obs, ens, nullptr);

    for (int round = 1; round <= (int)increments.size(); ++round) {
        int q = std::max(1, (int)std::lround(increments[(std::size_t)round - 1] * pixels));
        SamplingPlan plan = policy == SelectPolicy::kmeans
                                ? kmeans_select(ens.variance, obs.mask, q, weights, rng)
                                : random_select(obs.mask, q, rng);
        obs = merge_observations(obs, observe_at(truth, plan.points, model, rng));
        ens = posterior_ensemble(obs, prior, sched, cfg, ensemble_n, rng);
        traj.push_back({round, (double)obs.mask.size() / pixels, psnr(truth, ens.mean, 1.0)});
        if (sink)
            sink(round, obs, ens, &plan);
    }
    return traj;
}

const char* policy_name(SelectPolicy policy)
{
    return policy == SelectPolicy::kmeans ? "kmeans" : "random";
}

std::string render_trajectory_csv(const std::vector<TrajectoryPoint>& traj, SelectPolicy policy,
                                  std::uint64_t seed)
{
    std::string out = "round,observed_ratio,policy,seed,psnr\n";
    for (const TrajectoryPoint& p : traj) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d,%.6f,%s,%llu,%.6f\n", p.round, p.observed_ratio,
                      policy_name(policy), (unsigned long long)seed, p.psnr_db);
        out += buf;
    }
    return out;
}

} // namespace gsc
