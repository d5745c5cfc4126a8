// SPDX-License-Identifier: Apache-2.0

#include "gscart/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <tuple>

#include "gscart/active.hpp"
#include "gscart/errors.hpp"
#include "gscart/observe.hpp"

namespace gsc {

double mse(const SpectrumMap& x, const SpectrumMap& x_hat)
{
    x.require_same_shape(x_hat, "mse");
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        double d = x[i] - x_hat[i];
        s += d * d;
    }
    return s / x.size();
}

double psnr(const SpectrumMap& x, const SpectrumMap& x_hat, double peak, double cap)
{
    if (!(peak > 0.0))
        throw std::invalid_argument("psnr: peak must be > 0");
    double e = mse(x, x_hat);
    if (e == 0.0)
        return cap;
    return std::min(cap, 10.0 * std::log10(peak * peak / e));
}

void ExperimentGrid::validate() const
{
    if (map_count < 1)
        throw std::invalid_argument("ExperimentGrid: map_count must be >= 1");
    if (ratios.empty() || sigmas.empty() || bits.empty() || methods.empty() || seeds.empty())
        throw std::invalid_argument("ExperimentGrid: every axis needs at least one entry");
    for (double r : ratios)
        if (!(r > 0.0) || r > 1.0)
            throw std::invalid_argument("ExperimentGrid: ratios must be in (0, 1]");
    for (double s : sigmas)
        if (s < 0.0)
            throw std::invalid_argument("ExperimentGrid: sigmas must be >= 0");
    for (int b : bits)
        if (b < 0 || b > 16)
            throw std::invalid_argument("ExperimentGrid: bits must be in [0, 16]");
    for (const std::string& m : methods)
        if (m != "gsc" && m != "idw")
            throw std::invalid_argument("ExperimentGrid: unknown method \"" + m + "\"");
    if (gsc_samples < 1 || gsc_samples > 64)
        throw std::invalid_argument("ExperimentGrid: gsc_samples must be in [1, 64]");
}

json ExperimentGrid::to_json() const
{
    return {{"map_count", map_count}, {"ratios", ratios},   {"sigmas", sigmas},
            {"bits", bits},           {"methods", methods}, {"seeds", seeds},
            {"gsc_samples", gsc_samples}};
}

ExperimentGrid ExperimentGrid::from_json(const json& j)
{
    check_keys(j, {"map_count", "ratios", "sigmas", "bits", "methods", "seeds", "gsc_samples"},
               "experiment grid");
    ExperimentGrid g;
    g.map_count = get_or(j, "map_count", g.map_count);
    if (j.contains("ratios"))
        g.ratios = j.at("ratios").get<std::vector<double>>();
    if (j.contains("sigmas"))
        g.sigmas = j.at("sigmas").get<std::vector<double>>();
    if (j.contains("bits"))
        g.bits = j.at("bits").get<std::vector<int>>();
    if (j.contains("methods"))
        g.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("seeds"))
        g.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    g.gsc_samples = get_or(j, "gsc_samples", g.gsc_samples);
    try {
        g.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("experiment grid: ") + e.what());
    }
    return g;
}

namespace {

std::string fmt(double v, int prec)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string fmt_sci(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10e", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string cell_key(const std::string& method, double ratio, double sigma, int bits)
{
    return method + "|" + fmt(ratio, 6) + "|" + fmt(sigma, 6) + "|" + std::to_string(bits);
}

} // namespace

std::string render_records_csv(const std::vector<MetricRecord>& records)
{
    std::string out = "method,ratio,sigma,bits,seed,psnr_db,mse\n";
    for (const MetricRecord& r : records)
        out += r.method + "," + fmt(r.ratio, 4) + "," + fmt(r.sigma, 4) + "," +
               std::to_string(r.bits) + "," + std::to_string(r.seed) + "," + fmt(r.psnr_db, 6) +
               "," + fmt_sci(r.mse) + "\n";
    return out;
}

std::vector<MetricRecord> run_experiment(const ExperimentGrid& grid, const MapTensor& eval_maps,
                                         const DenoisingPrior* prior,
                                         const DiffusionSchedule& sched, const GscConfig& gsc_cfg,
                                         const IdwConfig& idw_cfg, const std::string& csv_path,
                                         const std::string& summary_path)
{
    grid.validate();
    if (eval_maps.count < grid.map_count)
        throw std::invalid_argument("run_experiment: evaluation tensor has " +
                                    std::to_string(eval_maps.count) + " maps, grid needs " +
                                    std::to_string(grid.map_count));

    std::vector<MetricRecord> records;
    std::vector<std::string> failures;

    for (const std::string& method : grid.methods)
        for (double ratio : grid.ratios)
            for (double sigma : grid.sigmas)
                for (int bits : grid.bits)
                    for (std::uint64_t seed : grid.seeds) {
                        std::string key = cell_key(method, ratio, sigma, bits);
                        try {
                            Rng base(seed);
                            Rng cell_rng = base.fork(fnv1a(key));
                            double mse_sum = 0.0;
                            for (int m = 0; m < grid.map_count; ++m) {
                                Rng rng = cell_rng.fork((std::uint64_t)m);
                                SpectrumMap truth = eval_maps.sample(m);
                                ObservationMask mask =
                                    random_mask(truth.rows(), truth.cols(), ratio, rng);
                                Observation obs =
                                    bits > 0 ? observe_quantized(truth, mask, sigma,
                                                                 build_quantizer(bits, 0.0, 1.0),
                                                                 rng)
                                             : observe_linear(truth, mask, sigma, rng);
                                SpectrumMap rec;
                                if (method == "idw") {
                                    rec = idw_reconstruct(obs, idw_cfg);
                                } else {
                                    if (prior == nullptr)
                                        throw std::invalid_argument(
                                            "run_experiment: method \"gsc\" needs a prior");
                                    rec = grid.gsc_samples > 1
                                              ? posterior_ensemble(obs, *prior, sched, gsc_cfg,
                                                                   grid.gsc_samples, rng)
                                                    .mean
                                              : reconstruct(obs, *prior, sched, gsc_cfg, rng)
                                                    .first;
                                }
                                mse_sum += mse(truth, rec);
                            }
                            MetricRecord r;
                            r.method = method;
                            r.ratio = ratio;
                            r.sigma = sigma;
                            r.bits = bits;
                            r.seed = seed;
                            r.mse = mse_sum / grid.map_count;
                            r.psnr_db = r.mse == 0.0 ? 99.0 : 10.0 * std::log10(1.0 / r.mse);
                            records.push_back(r);
                        } catch (const std::exception& e) {
                            failures.push_back(key + " seed=" + std::to_string(seed) + ": " +
                                               e.what());
                        }
                    }

    std::sort(records.begin(), records.end(), [](const MetricRecord& a, const MetricRecord& b) {
        return std::tie(a.method, a.ratio, a.sigma, a.bits, a.seed) <
               std::tie(b.method, b.ratio, b.sigma, b.bits, b.seed);
    });

    if (!csv_path.empty())
        write_text_file(csv_path, render_records_csv(records));

    if (!summary_path.empty()) {
        // per-cell means over seeds
        std::map<std::string, std::pair<double, double>> acc; // key -> (sum psnr, sum mse)
        std::map<std::string, int> cnt;
        for (const MetricRecord& r : records) {
            std::string key = cell_key(r.method, r.ratio, r.sigma, r.bits);
            acc[key].first += r.psnr_db;
            acc[key].second += r.mse;
            ++cnt[key];
        }
        std::string out = "cell (method | ratio | sigma | bits)      mean psnr_db    mean mse\n";
        for (const auto& [key, sums] : acc) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-40s %12.4f    %.6e\n", key.c_str(),
                          sums.first / cnt[key], sums.second / cnt[key]);
            out += buf;
        }
        for (const std::string& f : failures)
            out += "FAILED " + f + "\n";
        write_text_file(summary_path, out);
    }
    return records;
}

} // namespace gsc
