// SPDX-License-Identifier: Apache-2.0

#include "gscart/mapgen.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gscart/errors.hpp"
#include "gscart/tensor_io.hpp"

namespace gsc {

namespace {

constexpr double kPi = 3.14159265358979323846;

double draw_uniform(const ValueRange& r, Rng& rng) { return r.lo + (r.hi - r.lo) * rng.uniform(); }

int draw_count(int lo, int hi, Rng& rng)
{
    return lo + (int)rng.uniform_int((std::uint64_t)(hi - lo + 1));
}

void check_range(const ValueRange& r, const char* name)
{
    if (!(r.lo <= r.hi))
        throw std::invalid_argument(std::string("MapConfig: empty range ") + name);
}

double sinc(double x)
{
    if (std::abs(x) < 1e-12)
        return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

/// Zero-mean unit-variance Gaussian field with exponential spatial
/// correlation, synthesized by convolving white noise with an
/// exp(-d/dcorr) kernel normalized to unit output variance.
std::vector<double> correlated_field(int rows, int cols, double dcorr, Rng& rng)
{
    int radius = std::max(1, (int)std::ceil(3.0 * dcorr));
    radius = std::min(radius, std::max(rows, cols)); // no point extending past the grid

    int kdim = 2 * radius + 1;
    std::vector<double> kernel((std::size_t)kdim * kdim);
    double sq_sum = 0.0;
    for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc) {
            double w = std::exp(-std::sqrt((double)(dr * dr + dc * dc)) / dcorr);
            kernel[(std::size_t)(dr + radius) * kdim + (dc + radius)] = w;
            sq_sum += w * w;
        }
    double norm = 1.0 / std::sqrt(sq_sum);

    // white noise padded by the kernel radius so every cell sees a full stencil
    int prows = rows + 2 * radius, pcols = cols + 2 * radius;
    std::vector<double> white((std::size_t)prows * pcols);
    for (double& v : white)
        v = rng.normal();

    std::vector<double> field((std::size_t)rows * cols, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int dr = 0; dr < kdim; ++dr) {
                const double* wrow = &white[(std::size_t)(r + dr) * pcols + c];
                const double* krow = &kernel[(std::size_t)dr * kdim];
                for (int dc = 0; dc < kdim; ++dc)
                    acc += krow[dc] * wrow[dc];
            }
            field[(std::size_t)r * cols + c] = acc * norm;
        }
    return field;
}

/// Unnormalized map: transmitter sum plus noise field, clamped at zero.
SpectrumMap raw_map(const MapConfig& config, Rng& rng)
{
    int tx_count = draw_count(config.tx_count_min, config.tx_count_max, rng);

    SpectrumMap map(config.rows, config.cols, 0.0);
    for (int r = 0; r < tx_count; ++r) {
        TransmitterSpec tx;
        tx.row = rng.uniform() * (config.rows - 1);
        tx.col = rng.uniform() * (config.cols - 1);
        tx.power = config.tx_power;
        tx.path_loss_exponent = draw_uniform(config.gamma_range, rng);
        tx.psd_weight = generate_psd_weight(config, rng);
        SpectrumMap slf = generate_slf(tx, config, rng);
        for (int i = 0; i < map.size(); ++i)
            map[i] += tx.psd_weight * slf[i];
    }

    if (config.noise_sigma > 0.0)
        for (int i = 0; i < map.size(); ++i)
            map[i] += config.noise_sigma * rng.normal();

    for (int i = 0; i < map.size(); ++i)
        map[i] = std::max(map[i], 0.0);
    return map;
}

} // namespace

void MapConfig::validate() const
{
    if (rows < 8 || cols < 8)
        throw std::invalid_argument("MapConfig: rows and cols must be >= 8");
    if (tx_count_min < 1 || tx_count_min > tx_count_max)
        throw std::invalid_argument("MapConfig: need 1 <= tx_count_min <= tx_count_max");
    check_range(gamma_range, "gamma_range");
    if (!(gamma_range.lo > 0.0))
        throw std::invalid_argument("MapConfig: path-loss exponents must be > 0");
    if (!(tx_power > 0.0))
        throw std::invalid_argument("MapConfig: tx_power must be > 0");
    if (shadowing_sigma < 0.0)
        throw std::invalid_argument("MapConfig: shadowing_sigma must be >= 0");
    if (!(decorrelation_distance > 0.0))
        throw std::invalid_argument("MapConfig: decorrelation_distance must be > 0");
    if (noise_sigma < 0.0)
        throw std::invalid_argument("MapConfig: noise_sigma must be >= 0");
    if (sinc_count_min < 0 || sinc_count_min > sinc_count_max)
        throw std::invalid_argument("MapConfig: need 0 <= sinc_count_min <= sinc_count_max");
    check_range(sinc_center_range, "sinc_center_range");
    check_range(sinc_width_range, "sinc_width_range");
    if (!(sinc_width_range.lo > 0.0))
        throw std::invalid_argument("MapConfig: sinc widths must be > 0");
    check_range(sinc_power_range, "sinc_power_range");
    if (peak < 0.0)
        throw std::invalid_argument("MapConfig: peak must be >= 0");
    if (normalization != "unit_interval")
        throw std::invalid_argument("MapConfig: unsupported normalization \"" + normalization +
                                    "\"");
}

SpectrumMap generate_slf(const TransmitterSpec& tx, const MapConfig& config, Rng& rng)
{
    config.validate();
    if (tx.row < 0.0 || tx.row > config.rows - 1 || tx.col < 0.0 || tx.col > config.cols - 1)
        throw std::invalid_argument("generate_slf: transmitter outside grid bounds");
    if (!(tx.power > 0.0) || !(tx.path_loss_exponent > 0.0))
        throw std::invalid_argument("generate_slf: power and path_loss_exponent must be > 0");

    SpectrumMap slf(config.rows, config.cols);
    for (int r = 0; r < config.rows; ++r)
        for (int c = 0; c < config.cols; ++c) {
            double dr = r - tx.row, dc = c - tx.col;
            double d = std::sqrt(dr * dr + dc * dc);
            // (1 + d)^(-gamma): bounded at the transmitter cell
            slf(r, c) = tx.power * std::pow(1.0 + d, -tx.path_loss_exponent);
        }

    if (config.shadowing_sigma > 0.0) {
        std::vector<double> xi =
            correlated_field(config.rows, config.cols, config.decorrelation_distance, rng);
        for (int i = 0; i < slf.size(); ++i)
            slf[i] *= std::pow(10.0, config.shadowing_sigma * xi[(std::size_t)i] / 10.0);
    }

    // contract: the transmitter cell holds the grid maximum
    int tr = std::clamp((int)std::lround(tx.row), 0, config.rows - 1);
    int tc = std::clamp((int)std::lround(tx.col), 0, config.cols - 1);
    slf(tr, tc) = std::max(slf(tr, tc), slf.max_value());
    return slf;
}

double generate_psd_weight(const MapConfig& config, Rng& rng)
{
    config.validate();
    int n = draw_count(config.sinc_count_min, config.sinc_count_max, rng);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        double center = draw_uniform(config.sinc_center_range, rng);
        double width = draw_uniform(config.sinc_width_range, rng);
        double power = draw_uniform(config.sinc_power_range, rng);
        sum += power * sinc((config.analysis_frequency - center) / width);
    }
    return std::max(sum, 0.0);
}

SpectrumMap generate_map(const MapConfig& config, Rng& rng)
{
    config.validate();
    SpectrumMap map = raw_map(config, rng);
    double peak = config.peak > 0.0 ? config.peak : map.max_value();
    if (peak > 0.0)
        for (int i = 0; i < map.size(); ++i)
            map[i] = std::min(map[i] / peak, 1.0);
    return map;
}

DatasetSummary generate_dataset(const MapConfig& config, int count, const std::string& path,
                                Rng& rng)
{
    config.validate();
    if (count < 1)
        throw std::invalid_argument("generate_dataset: count must be >= 1");

    std::uint64_t seed = rng.seed();

    std::vector<SpectrumMap> maps;
    maps.reserve((std::size_t)count);
    std::vector<double> maxima((std::size_t)count);
    for (int k = 0; k < count; ++k) {
        SpectrumMap map = raw_map(config, rng);
        maxima[(std::size_t)k] = map.max_value();
        maps.push_back(std::move(map));
    }

    // robust dataset peak: 99.5th percentile of per-map maxima
    double peak;
    if (config.peak > 0.0) {
        peak = config.peak;
    } else {
        std::vector<double> sorted = maxima;
        std::sort(sorted.begin(), sorted.end());
        std::size_t idx = (std::size_t)std::floor(0.995 * (double)(count - 1));
        peak = sorted[idx];
        if (!(peak > 0.0))
            peak = 1.0; // degenerate all-zero dataset
    }

    MapTensor tensor;
    tensor.rows = config.rows;
    tensor.cols = config.cols;
    for (auto& map : maps) {
        for (int i = 0; i < map.size(); ++i)
            map[i] = std::min(map[i] / peak, 1.0);
        tensor.append(map);
    }
    write_map_tensor(path, tensor);

    DatasetSummary summary;
    summary.count = count;
    summary.peak = peak;
    summary.checksum = tensor_checksum(tensor);

    json meta;
    meta["config"] = config.to_json();
    meta["peak"] = peak;
    meta["seed"] = seed;
    meta["count"] = count;
    meta["checksum"] = summary.checksum;
    write_text_file(path + ".json", meta.dump(2) + "\n");
    return summary;
}

DatasetMeta read_dataset_meta(const std::string& tensor_path)
{
    std::string text = read_file_bytes(tensor_path + ".json");
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError("bad dataset metadata " + tensor_path + ".json: " + e.what());
    }
    DatasetMeta meta;
    meta.config = MapConfig::from_json(j.at("config"));
    meta.peak = j.at("peak").get<double>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.count = j.at("count").get<int>();
    meta.checksum = j.at("checksum").get<std::uint32_t>();
    return meta;
}

json MapConfig::to_json() const
{
    json j;
    j["rows"] = rows;
    j["cols"] = cols;
    j["tx_count_min"] = tx_count_min;
    j["tx_count_max"] = tx_count_max;
    j["gamma_range"] = {gamma_range.lo, gamma_range.hi};
    j["tx_power"] = tx_power;
    j["shadowing_sigma"] = shadowing_sigma;
    j["decorrelation_distance"] = decorrelation_distance;
    j["noise_sigma"] = noise_sigma;
    j["sinc_count_min"] = sinc_count_min;
    j["sinc_count_max"] = sinc_count_max;
    j["sinc_center_range"] = {sinc_center_range.lo, sinc_center_range.hi};
    j["sinc_width_range"] = {sinc_width_range.lo, sinc_width_range.hi};
    j["sinc_power_range"] = {sinc_power_range.lo, sinc_power_range.hi};
    j["analysis_frequency"] = analysis_frequency;
    j["peak"] = peak;
    j["normalization"] = normalization;
    return j;
}

MapConfig MapConfig::from_json(const json& j)
{
    check_keys(j,
               {"rows", "cols", "tx_count_min", "tx_count_max", "gamma_range", "tx_power",
                "shadowing_sigma", "decorrelation_distance", "noise_sigma", "sinc_count_min",
                "sinc_count_max", "sinc_center_range", "sinc_width_range", "sinc_power_range",
                "analysis_frequency", "peak", "normalization"},
               "map config");
    MapConfig c;
    auto range = [&](const char* key, ValueRange fallback) {
        if (!j.contains(key))
            return fallback;
        auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != 2)
            throw ConfigError(std::string("map config: range \"") + key +
                              "\" must have two entries");
        return ValueRange{v[0], v[1]};
    };
    c.rows = get_or(j, "rows", c.rows);
    c.cols = get_or(j, "cols", c.cols);
    c.tx_count_min = get_or(j, "tx_count_min", c.tx_count_min);
    c.tx_count_max = get_or(j, "tx_count_max", c.tx_count_max);
    c.gamma_range = range("gamma_range", c.gamma_range);
    c.tx_power = get_or(j, "tx_power", c.tx_power);
    c.shadowing_sigma = get_or(j, "shadowing_sigma", c.shadowing_sigma);
    c.decorrelation_distance = get_or(j, "decorrelation_distance", c.decorrelation_distance);
    c.noise_sigma = get_or(j, "noise_sigma", c.noise_sigma);
    c.sinc_count_min = get_or(j, "sinc_count_min", c.sinc_count_min);
    c.sinc_count_max = get_or(j, "sinc_count_max", c.sinc_count_max);
    c.sinc_center_range = range("sinc_center_range", c.sinc_center_range);
    c.sinc_width_range = range("sinc_width_range", c.sinc_width_range);
    c.sinc_power_range = range("sinc_power_range", c.sinc_power_range);
    c.analysis_frequency = get_or(j, "analysis_frequency", c.analysis_frequency);
    c.peak = get_or(j, "peak", c.peak);
    c.normalization = get_or(j, "normalization", c.normalization);
    c.validate();
    return c;
}

} // namespace gsc
