// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <doctest.h>

#include "gscart/errors.hpp"
#include "gscart/mapgen.hpp"
#include "gscart/tensor_io.hpp"

using namespace gsc;

namespace {

// Deterministic PSD draw: every sinc parameter range collapsed to a point.
MapConfig point_psd_config(int count, double center, double width, double power, double f0)
{
    MapConfig c;
    c.sinc_count_min = count;
    c.sinc_count_max = count;
    c.sinc_center_range = {center, center};
    c.sinc_width_range = {width, width};
    c.sinc_power_range = {power, power};
    c.analysis_frequency = f0;
    return c;
}

double ref_sinc(double x)
{
    if (std::abs(x) < 1e-12)
        return 1.0;
    return std::sin(M_PI * x) / (M_PI * x);
}

} // namespace

TEST_SUITE("mapgen")
{
    TEST_CASE("config validation")
    {
        MapConfig c;
        CHECK_NOTHROW(c.validate());
        SUBCASE("grid too small")
        {
            c.rows = 7;
            CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        }
        SUBCASE("bad transmitter range")
        {
            c.tx_count_min = 0;
            CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        }
        SUBCASE("inverted gamma range")
        {
            c.gamma_range = {3.0, 2.0};
            CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        }
        SUBCASE("negative noise")
        {
            c.noise_sigma = -0.1;
            CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        }
        SUBCASE("unknown normalization")
        {
            c.normalization = "zscore";
            CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        }
    }

    TEST_CASE("config json round trip rejects unknown keys")
    {
        MapConfig c;
        c.rows = 12;
        c.gamma_range = {2.2, 2.9};
        MapConfig r = MapConfig::from_json(c.to_json());
        CHECK(r.rows == 12);
        CHECK(r.gamma_range.lo == doctest::Approx(2.2));
        CHECK(r.gamma_range.hi == doctest::Approx(2.9));
        json j = c.to_json();
        j["surprise"] = 1;
        CHECK_THROWS_AS(MapConfig::from_json(j), ConfigError);
    }

    TEST_CASE("noise-free loss field is the exact decay law")
    {
        MapConfig c;
        c.rows = 10;
        c.cols = 10;
        c.shadowing_sigma = 0.0;
        TransmitterSpec tx;
        tx.row = 4.0;
        tx.col = 6.0;
        tx.power = 1.0;
        tx.path_loss_exponent = 2.0;
        tx.psd_weight = 1.0;
        Rng rng(3);
        SpectrumMap slf = generate_slf(tx, c, rng);
        for (int r = 0; r < 10; ++r)
            for (int col = 0; col < 10; ++col) {
                double d = std::hypot(r - 4.0, col - 6.0);
                CHECK(slf(r, col) ==
                      doctest::Approx(std::pow(1.0 + d, -2.0)).epsilon(1e-12));
            }
        CHECK(slf(4, 6) == doctest::Approx(1.0)); // transmitter cell is the peak
    }

    TEST_CASE("noise-free loss field never increases with distance")
    {
        MapConfig c;
        c.rows = 9;
        c.cols = 9;
        c.shadowing_sigma = 0.0;
        TransmitterSpec tx;
        tx.row = 2.5;
        tx.col = 3.5;
        tx.power = 0.7;
        tx.path_loss_exponent = 2.8;
        tx.psd_weight = 1.0;
        Rng rng(4);
        SpectrumMap slf = generate_slf(tx, c, rng);
        std::vector<std::pair<double, double>> by_d; // (distance, value)
        for (int r = 0; r < 9; ++r)
            for (int col = 0; col < 9; ++col)
                by_d.push_back({std::hypot(r - 2.5, col - 3.5), slf(r, col)});
        for (const auto& [da, va] : by_d)
            for (const auto& [db, vb] : by_d)
                if (da < db)
                    CHECK(va >= vb);
    }

    TEST_CASE("shadowing field has the configured dB spread")
    {
        MapConfig c;
        c.rows = 10;
        c.cols = 10;
        c.shadowing_sigma = 6.0;
        c.decorrelation_distance = 1.0;
        TransmitterSpec tx;
        tx.row = 0.0; // origin keeps the peak cell out of the stats
        tx.col = 0.0;
        tx.power = 1.0;
        tx.path_loss_exponent = 2.0;
        tx.psd_weight = 1.0;

        const int fields = 1000;
        Rng rng(17);
        std::vector<double> sum(100, 0.0), sum_sq(100, 0.0);
        for (int k = 0; k < fields; ++k) {
            SpectrumMap slf = generate_slf(tx, c, rng);
            for (int r = 0; r < 10; ++r)
                for (int col = 0; col < 10; ++col) {
                    double decay = std::pow(1.0 + std::hypot((double)r, (double)col), -2.0);
                    double db = 10.0 * std::log10(slf(r, col) / decay);
                    sum[(std::size_t)(r * 10 + col)] += db;
                    sum_sq[(std::size_t)(r * 10 + col)] += db * db;
                }
        }
        double avg_std = 0.0;
        int cells = 0;
        for (int i = 1; i < 100; ++i) { // skip the transmitter cell
            double m = sum[(std::size_t)i] / fields;
            avg_std += std::sqrt(sum_sq[(std::size_t)i] / fields - m * m);
            ++cells;
        }
        avg_std /= cells;
        CHECK(avg_std == doctest::Approx(6.0).epsilon(0.10));
    }

    TEST_CASE("psd weight evaluates the sinc sum")
    {
        SUBCASE("sinc centered on the analysis frequency returns its power")
        {
            MapConfig c = point_psd_config(1, 0.5, 0.2, 0.8, 0.5);
            Rng rng(1);
            CHECK(generate_psd_weight(c, rng) == doctest::Approx(0.8).epsilon(1e-12));
        }
        SUBCASE("zero components yield zero")
        {
            MapConfig c = point_psd_config(0, 0.5, 0.2, 0.8, 0.5);
            Rng rng(1);
            CHECK(generate_psd_weight(c, rng) == 0.0);
        }
        SUBCASE("two known sincs add")
        {
            MapConfig c = point_psd_config(2, 0.45, 0.1, 0.7, 0.5);
            Rng rng(1);
            double expected = 2.0 * 0.7 * ref_sinc((0.5 - 0.45) / 0.1);
            CHECK(generate_psd_weight(c, rng) == doctest::Approx(expected).epsilon(1e-12));
        }
        SUBCASE("negative sums clamp to zero")
        {
            // sinc(1.7) < 0, so the sum is negative before clamping
            MapConfig c = point_psd_config(2, 0.33, 0.1, 0.7, 0.5);
            Rng rng(1);
            CHECK(generate_psd_weight(c, rng) == 0.0);
        }
    }

    TEST_CASE("single-transmitter map normalizes to a unit peak")
    {
        MapConfig c;
        c.rows = 12;
        c.cols = 12;
        c.tx_count_min = 1;
        c.tx_count_max = 1;
        c.shadowing_sigma = 0.0;
        c.noise_sigma = 0.0;
        // pin the spectral draw on the analysis frequency so the transmitter
        // weight is strictly positive for every seed
        c.sinc_center_range = {0.5, 0.5};
        c.sinc_width_range = {0.2, 0.2};
        c.sinc_power_range = {1.0, 2.0};
        Rng rng(8);
        SpectrumMap m = generate_map(c, rng);
        CHECK(m.max_value() == doctest::Approx(1.0).epsilon(1e-12));
        for (int i = 0; i < m.size(); ++i) {
            CHECK(m[i] >= 0.0);
            CHECK(m[i] <= 1.0);
        }
    }

    TEST_CASE("noise term has the configured post-normalization spread")
    {
        // Identical draw sequences except for the noise field, shared fixed peak.
        MapConfig base;
        base.rows = 8;
        base.cols = 8;
        base.tx_count_min = 1;
        base.tx_count_max = 1;
        base.gamma_range = {0.5, 0.5}; // keep the signal well above the clamp
        base.shadowing_sigma = 0.0;
        base.sinc_count_min = 1;
        base.sinc_count_max = 1;
        base.sinc_center_range = {0.5, 0.5};
        base.sinc_width_range = {0.2, 0.2};
        base.sinc_power_range = {1.0, 1.0};
        base.analysis_frequency = 0.5;
        base.peak = 2.0;
        MapConfig noisy = base;
        noisy.noise_sigma = 0.01;

        const int maps = 300;
        double sum = 0.0, sum_sq = 0.0;
        int n = 0;
        for (int k = 0; k < maps; ++k) {
            Rng ra((std::uint64_t)k + 1), rb((std::uint64_t)k + 1);
            SpectrumMap clean = generate_map(base, ra);
            SpectrumMap dirty = generate_map(noisy, rb);
            for (int i = 0; i < clean.size(); ++i) {
                double d = dirty[i] - clean[i];
                sum += d;
                sum_sq += d * d;
                ++n;
            }
        }
        double mean = sum / n;
        double sd = std::sqrt(sum_sq / n - mean * mean);
        CHECK(sd == doctest::Approx(0.01 / 2.0).epsilon(0.10));
    }

    TEST_CASE("dataset files and sidecar")
    {
        MapConfig c;
        c.rows = 8;
        c.cols = 8;
        std::string path = "./mg_dataset.gsc";

        SUBCASE("single-map file size is header plus payload")
        {
            Rng rng(5);
            generate_dataset(c, 1, path, rng);
            CHECK(read_file_bytes(path).size() == 32u + 8u * 8u * 4u);
        }

        SUBCASE("write-read round trip and checksum determinism")
        {
            Rng r1(5), r2(5);
            DatasetSummary s1 = generate_dataset(c, 6, path, r1);
            MapTensor t1 = read_map_tensor(path);
            DatasetSummary s2 = generate_dataset(c, 6, path, r2);
            MapTensor t2 = read_map_tensor(path);
            CHECK(s1.checksum == s2.checksum);
            CHECK(s1.peak == doctest::Approx(s2.peak));
            REQUIRE(t1.data.size() == t2.data.size());
            for (std::size_t i = 0; i < t1.data.size(); ++i)
                CHECK(t1.data[i] == t2.data[i]);
            CHECK(tensor_checksum(t1) == s1.checksum);
            for (float v : t1.data) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }

        SUBCASE("sidecar metadata round trips")
        {
            Rng rng(41);
            DatasetSummary s = generate_dataset(c, 4, path, rng);
            DatasetMeta meta = read_dataset_meta(path);
            CHECK(meta.count == 4);
            CHECK(meta.seed == 41);
            CHECK(meta.checksum == s.checksum);
            CHECK(meta.peak == doctest::Approx(s.peak));
            CHECK(meta.config.rows == 8);
        }

        std::remove(path.c_str());
        std::remove((path + ".json").c_str());
    }
}
