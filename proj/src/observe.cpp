// SPDX-License-Identifier: Apache-2.0

#include "gscart/observe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gscart/errors.hpp"

namespace gsc {

std::vector<std::uint8_t> ObservationMask::flags() const
{
    std::vector<std::uint8_t> f((std::size_t)rows * cols, 0);
    for (int idx : observed)
        f[(std::size_t)idx] = 1;
    return f;
}

void ObservationMask::validate() const
{
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("ObservationMask: rows and cols must be >= 1");
    int n = rows * cols;
    int prev = -1;
    for (int idx : observed) {
        if (idx <= prev)
            throw std::invalid_argument("ObservationMask: indices must be strictly increasing");
        if (idx < 0 || idx >= n)
            throw std::invalid_argument("ObservationMask: index outside grid");
        prev = idx;
    }
}

double QuantizerSpec::threshold(int k) const
{
    if (k < 0 || k >= levels() - 1)
        throw std::out_of_range("QuantizerSpec: threshold index out of range");
    return x_min + step() * (k + 1);
}

double QuantizerSpec::lower(int level) const
{
    if (level < 0 || level >= levels())
        throw std::out_of_range("QuantizerSpec: level out of range");
    if (level == 0)
        return -std::numeric_limits<double>::infinity();
    return threshold(level - 1);
}

double QuantizerSpec::upper(int level) const
{
    if (level < 0 || level >= levels())
        throw std::out_of_range("QuantizerSpec: level out of range");
    if (level == levels() - 1)
        return std::numeric_limits<double>::infinity();
    return threshold(level);
}

double QuantizerSpec::representative(int level) const
{
    double l = lower(level), u = upper(level);
    if (std::isinf(l))
        return u - 0.5 * step();
    if (std::isinf(u))
        return l + 0.5 * step();
    return 0.5 * (l + u);
}

int QuantizerSpec::quantize(double r) const
{
    // level k holds (lower, upper]; first threshold >= r identifies it
    int lo = 0, hi = levels() - 1;
    while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (r <= threshold(mid))
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

void QuantizerSpec::validate() const
{
    if (bits < 1 || bits > 16)
        throw std::invalid_argument("QuantizerSpec: bits must be in [1, 16]");
    if (!(x_min < x_max))
        throw std::invalid_argument("QuantizerSpec: need x_min < x_max");
}

int Observation::level_at(int i) const
{
    if (!quantizer)
        throw std::logic_error("Observation: level_at on a linear observation");
    double v = values.at((std::size_t)i);
    int level = (int)std::lround(v);
    if (v != (double)level || level < 0 || level >= quantizer->levels())
        throw std::invalid_argument("Observation: invalid quantizer level index");
    return level;
}

void Observation::validate() const
{
    mask.validate();
    if ((int)values.size() != mask.size())
        throw std::invalid_argument("Observation: values length must match mask length");
    if (noise_sigma < 0.0)
        throw std::invalid_argument("Observation: noise_sigma must be >= 0");
    if (quantizer) {
        quantizer->validate();
        for (int i = 0; i < mask.size(); ++i)
            (void)level_at(i); // throws on non-integer or out-of-range levels
    }
}

json Observation::to_json() const
{
    json j;
    j["rows"] = mask.rows;
    j["cols"] = mask.cols;
    j["indices"] = mask.observed;
    if (quantizer) {
        std::vector<int> levels(values.size());
        for (int i = 0; i < (int)values.size(); ++i)
            levels[(std::size_t)i] = level_at(i);
        j["values"] = levels;
        j["quantizer"] = {{"bits", quantizer->bits},
                          {"x_min", quantizer->x_min},
                          {"x_max", quantizer->x_max}};
    } else {
        j["values"] = values;
        j["quantizer"] = nullptr;
    }
    j["sigma"] = noise_sigma;
    return j;
}

Observation Observation::from_json(const json& j)
{
    check_keys(j, {"rows", "cols", "indices", "values", "sigma", "quantizer"}, "observation");
    Observation obs;
    obs.mask.rows = j.at("rows").get<int>();
    obs.mask.cols = j.at("cols").get<int>();
    obs.mask.observed = j.at("indices").get<std::vector<int>>();
    obs.values = j.at("values").get<std::vector<double>>();
    obs.noise_sigma = j.at("sigma").get<double>();
    if (j.contains("quantizer") && !j.at("quantizer").is_null()) {
        const json& q = j.at("quantizer");
        check_keys(q, {"bits", "x_min", "x_max"}, "observation quantizer");
        QuantizerSpec spec;
        spec.bits = q.at("bits").get<int>();
        spec.x_min = q.at("x_min").get<double>();
        spec.x_max = q.at("x_max").get<double>();
        obs.quantizer = spec;
    }
    try {
        obs.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("observation: ") + e.what());
    }
    return obs;
}

ObservationMask random_mask(int rows, int cols, double ratio, Rng& rng)
{
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("random_mask: rows and cols must be >= 1");
    if (!(ratio > 0.0) || ratio > 1.0)
        throw std::invalid_argument("random_mask: ratio must be in (0, 1]");

    int n = rows * cols;
    int m = (int)std::lround(ratio * n);
    m = std::clamp(m, 1, n);

    // partial Fisher-Yates: first m entries are a uniform m-subset
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < m; ++i) {
        int j = i + (int)rng.uniform_int((std::uint64_t)(n - i));
        std::swap(pool[(std::size_t)i], pool[(std::size_t)j]);
    }
    pool.resize((std::size_t)m);
    std::sort(pool.begin(), pool.end());

    ObservationMask mask;
    mask.rows = rows;
    mask.cols = cols;
    mask.observed = std::move(pool);
    return mask;
}

ObservationMask full_mask(int rows, int cols)
{
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("full_mask: rows and cols must be >= 1");
    ObservationMask mask;
    mask.rows = rows;
    mask.cols = cols;
    mask.observed.resize((std::size_t)rows * cols);
    std::iota(mask.observed.begin(), mask.observed.end(), 0);
    return mask;
}

Observation observe_linear(const SpectrumMap& x, const ObservationMask& mask, double sigma_y,
                           Rng& rng)
{
    mask.validate();
    if (!mask.fits(x))
        throw std::invalid_argument("observe_linear: mask shape does not match map");
    if (sigma_y < 0.0)
        throw std::invalid_argument("observe_linear: sigma_y must be >= 0");

    Observation obs;
    obs.mask = mask;
    obs.noise_sigma = sigma_y;
    obs.values.reserve(mask.observed.size());
    for (int idx : mask.observed)
        obs.values.push_back(x[idx] + (sigma_y > 0.0 ? sigma_y * rng.normal() : 0.0));
    return obs;
}

QuantizerSpec build_quantizer(int bits, double x_min, double x_max)
{
    QuantizerSpec q;
    q.bits = bits;
    q.x_min = x_min;
    q.x_max = x_max;
    q.validate();
    return q;
}

Observation observe_quantized(const SpectrumMap& x, const ObservationMask& mask, double sigma,
                              const QuantizerSpec& q, Rng& rng)
{
    mask.validate();
    q.validate();
    if (!mask.fits(x))
        throw std::invalid_argument("observe_quantized: mask shape does not match map");
    if (sigma < 0.0)
        throw std::invalid_argument("observe_quantized: sigma must be >= 0");

    Observation obs;
    obs.mask = mask;
    obs.noise_sigma = sigma;
    obs.quantizer = q;
    obs.values.reserve(mask.observed.size());
    for (int idx : mask.observed) {
        double r = x[idx] + (sigma > 0.0 ? sigma * rng.normal() : 0.0);
        obs.values.push_back((double)q.quantize(r));
    }
    return obs;
}

Observation merge_observations(const Observation& a, const Observation& b)
{
    a.validate();
    b.validate();
    if (a.mask.rows != b.mask.rows || a.mask.cols != b.mask.cols)
        throw std::invalid_argument("merge_observations: grid shapes differ");
    if (a.noise_sigma != b.noise_sigma)
        throw std::invalid_argument("merge_observations: noise levels differ");
    if (a.is_quantized() != b.is_quantized())
        throw std::invalid_argument("merge_observations: mixed linear/quantized");
    if (a.is_quantized() &&
        (a.quantizer->bits != b.quantizer->bits || a.quantizer->x_min != b.quantizer->x_min ||
         a.quantizer->x_max != b.quantizer->x_max))
        throw std::invalid_argument("merge_observations: quantizers differ");

    struct Entry {
        int idx;
        double value;
    };
    std::vector<Entry> entries;
    entries.reserve(a.values.size() + b.values.size());
    for (int i = 0; i < a.mask.size(); ++i)
        entries.push_back({a.mask.observed[(std::size_t)i], a.values[(std::size_t)i]});
    for (int i = 0; i < b.mask.size(); ++i)
        entries.push_back({b.mask.observed[(std::size_t)i], b.values[(std::size_t)i]});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& l, const Entry& r) { return l.idx < r.idx; });
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].idx == entries[i - 1].idx)
            throw std::invalid_argument("merge_observations: masks overlap");

    Observation out;
    out.mask.rows = a.mask.rows;
    out.mask.cols = a.mask.cols;
    out.noise_sigma = a.noise_sigma;
    out.quantizer = a.quantizer;
    out.mask.observed.reserve(entries.size());
    out.values.reserve(entries.size());
    for (const Entry& e : entries) {
        out.mask.observed.push_back(e.idx);
        out.values.push_back(e.value);
    }
    return out;
}

} // namespace gsc
