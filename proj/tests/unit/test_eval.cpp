// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <doctest.h>

#include "gscart/errors.hpp"
#include "gscart/eval.hpp"
#include "gscart/mapgen.hpp"

using namespace gsc;

TEST_SUITE("eval")
{
    TEST_CASE("mse and psnr basics")
    {
        SpectrumMap a(2, 2);
        a[0] = 0.1;
        a[1] = 0.4;
        a[2] = 0.9;
        a[3] = 0.0;
        SpectrumMap b = a;

        CHECK(mse(a, b) == 0.0);
        CHECK(psnr(a, b, 1.0) == 99.0);
        CHECK(psnr(a, b, 1.0, 120.0) == 120.0);

        SUBCASE("a uniform 0.1 offset against unit peak is exactly 20 dB")
        {
            for (int i = 0; i < b.size(); ++i)
                b[i] = a[i] + 0.1;
            CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));
            CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
        }
        SUBCASE("doubling the peak adds 6.02 dB")
        {
            for (int i = 0; i < b.size(); ++i)
                b[i] = a[i] + 0.1;
            CHECK(psnr(a, b, 2.0) - psnr(a, b, 1.0) ==
                  doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
        }
        SUBCASE("preconditions")
        {
            CHECK_THROWS_AS(mse(a, SpectrumMap(3, 2, 0.0)), std::invalid_argument);
            CHECK_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
            CHECK_THROWS_AS(psnr(a, b, -1.0), std::invalid_argument);
        }
    }

    TEST_CASE("experiment grid validation and json")
    {
        ExperimentGrid g;
        CHECK_NOTHROW(g.validate());

        ExperimentGrid r = ExperimentGrid::from_json(g.to_json());
        CHECK(r.map_count == g.map_count);
        CHECK(r.ratios == g.ratios);
        CHECK(r.methods == g.methods);
        CHECK(r.seeds == g.seeds);
        CHECK(r.gsc_samples == g.gsc_samples);

        SUBCASE("bad axes are rejected")
        {
            ExperimentGrid bad = g;
            bad.map_count = 0;
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
            bad = g;
            bad.ratios = {0.0};
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
            bad = g;
            bad.sigmas = {-0.1};
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
            bad = g;
            bad.bits = {17};
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
            bad = g;
            bad.methods = {"kriging"};
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
            bad = g;
            bad.methods = {};
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
            bad = g;
            bad.seeds = {};
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
            bad = g;
            bad.gsc_samples = 0;
            CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        }
        SUBCASE("unknown keys are config errors")
        {
            json j = g.to_json();
            j["replicates"] = 3;
            CHECK_THROWS_AS(ExperimentGrid::from_json(j), ConfigError);
        }
    }

    TEST_CASE("records render to the documented csv")
    {
        MetricRecord r;
        r.method = "idw";
        r.ratio = 0.1;
        r.sigma = 0.05;
        r.bits = 2;
        r.seed = 7;
        r.mse = 0.00125;
        r.psnr_db = 10.0 * std::log10(1.0 / r.mse);
        std::string csv = render_records_csv({r});
        std::string expected = "method,ratio,sigma,bits,seed,psnr_db,mse\n";
        char line[160];
        std::snprintf(line, sizeof line, "idw,0.1000,0.0500,2,7,%.6f,%.10e\n", r.psnr_db, r.mse);
        expected += line;
        CHECK(csv == expected);
    }

    TEST_CASE("a small sweep behaves end to end")
    {
        // build a handful of evaluation maps
        MapConfig mc;
        mc.rows = 8;
        mc.cols = 8;
        MapTensor maps;
        maps.rows = 8;
        maps.cols = 8;
        Rng map_rng(3);
        for (int k = 0; k < 3; ++k)
            maps.append(generate_map(mc, map_rng));

        ExperimentGrid grid;
        grid.map_count = 3;
        grid.ratios = {0.3, 0.2};
        grid.sigmas = {0.0};
        grid.bits = {0};
        grid.methods = {"idw"};
        grid.seeds = {1, 2};

        DiffusionSchedule sched = build_schedule(5);
        auto records = run_experiment(grid, maps, nullptr, sched, GscConfig{}, IdwConfig{},
                                      "", "");
        REQUIRE((int)records.size() == 4);

        SUBCASE("rows are sorted and self-consistent")
        {
            for (std::size_t i = 1; i < records.size(); ++i) {
                const MetricRecord& p = records[i - 1];
                const MetricRecord& c = records[i];
                bool ordered = p.ratio < c.ratio || (p.ratio == c.ratio && p.seed < c.seed);
                CHECK(ordered);
            }
            for (const MetricRecord& rec : records) {
                CHECK(rec.method == "idw");
                CHECK(rec.mse > 0.0);
                CHECK(rec.psnr_db == doctest::Approx(10.0 * std::log10(1.0 / rec.mse)));
            }
        }
        SUBCASE("denser sampling helps on average")
        {
            double lo = 0.0, hi = 0.0;
            for (const MetricRecord& rec : records)
                (rec.ratio == 0.2 ? lo : hi) += rec.psnr_db / 2.0;
            CHECK(hi > lo - 3.0); // dense >= sparse up to seed noise
        }
        SUBCASE("the sweep is reproducible")
        {
            auto again = run_experiment(grid, maps, nullptr, sched, GscConfig{}, IdwConfig{},
                                        "", "");
            REQUIRE(again.size() == records.size());
            for (std::size_t i = 0; i < records.size(); ++i) {
                CHECK(again[i].mse == records[i].mse);
                CHECK(again[i].psnr_db == records[i].psnr_db);
            }
        }
        SUBCASE("files are written when paths are given")
        {
            std::string csv_path = "./eval_records.csv";
            std::string sum_path = "./eval_summary.txt";
            run_experiment(grid, maps, nullptr, sched, GscConfig{}, IdwConfig{}, csv_path,
                           sum_path);
            std::string csv = read_file_bytes(csv_path);
            CHECK(csv.rfind("method,ratio,sigma,bits,seed,psnr_db,mse\n", 0) == 0);
            CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
            std::string summary = read_file_bytes(sum_path);
            CHECK(summary.find("idw") != std::string::npos);
            std::remove(csv_path.c_str());
            std::remove(sum_path.c_str());
        }
    }

    TEST_CASE("averaging posterior samples lowers the sweep error")
    {
        MapTensor maps;
        maps.rows = 8;
        maps.cols = 8;
        SpectrumMap mean_map(8, 8, 0.5);
        AnalyticGaussianPrior prior(mean_map, 0.02);
        Rng truth_rng(11);
        for (int k = 0; k < 3; ++k) {
            SpectrumMap truth = mean_map;
            for (int i = 0; i < truth.size(); ++i)
                truth[i] += std::sqrt(0.02) * truth_rng.normal();
            maps.append(truth);
        }

        ExperimentGrid grid;
        grid.map_count = 3;
        grid.ratios = {0.25};
        grid.methods = {"gsc"};
        grid.seeds = {1, 2};

        DiffusionSchedule sched = build_schedule(20);
        auto single = run_experiment(grid, maps, &prior, sched, GscConfig{}, IdwConfig{}, "", "");
        grid.gsc_samples = 8;
        auto ens = run_experiment(grid, maps, &prior, sched, GscConfig{}, IdwConfig{}, "", "");
        REQUIRE(single.size() == 2);
        REQUIRE(ens.size() == 2);
        double mse_single = (single[0].mse + single[1].mse) / 2.0;
        double mse_ens = (ens[0].mse + ens[1].mse) / 2.0;
        CHECK(mse_ens < mse_single);
    }

    TEST_CASE("sampler cells without a prior are reported, not fatal")
    {
        MapConfig mc;
        mc.rows = 8;
        mc.cols = 8;
        MapTensor maps;
        maps.rows = 8;
        maps.cols = 8;
        Rng map_rng(5);
        maps.append(generate_map(mc, map_rng));

        ExperimentGrid grid;
        grid.map_count = 1;
        grid.ratios = {0.3};
        grid.methods = {"gsc", "idw"};
        grid.seeds = {1};

        DiffusionSchedule sched = build_schedule(5);
        std::string sum_path = "./eval_fail_summary.txt";
        auto records =
            run_experiment(grid, maps, nullptr, sched, GscConfig{}, IdwConfig{}, "", sum_path);
        REQUIRE((int)records.size() == 1); // only the idw cell survives
        CHECK(records[0].method == "idw");
        std::string summary = read_file_bytes(sum_path);
        CHECK(summary.find("FAILED") != std::string::npos);
        std::remove(sum_path.c_str());
    }

    TEST_CASE("map_count larger than the dataset is rejected")
    {
        MapTensor maps;
        maps.rows = 8;
        maps.cols = 8;
        maps.append(SpectrumMap(8, 8, 0.5));
        ExperimentGrid grid;
        grid.map_count = 2;
        grid.methods = {"idw"};
        DiffusionSchedule sched = build_schedule(5);
        CHECK_THROWS_AS(
            run_experiment(grid, maps, nullptr, sched, GscConfig{}, IdwConfig{}, "", ""),
            std::invalid_argument);
    }
}
