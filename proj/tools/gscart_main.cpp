// SPDX-License-Identifier: Apache-2.0
//
// gscart command line: generate training maps, train the denoiser,
// reconstruct single maps, run active measurement loops, and sweep
// benchmark grids. Every subcommand echoes its resolved configuration
// into the output directory so results stay reproducible.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gscart/active.hpp"
#include "gscart/baseline.hpp"
#include "gscart/errors.hpp"
#include "gscart/eval.hpp"
#include "gscart/json_util.hpp"
#include "gscart/mapgen.hpp"
#include "gscart/observe.hpp"
#include "gscart/prior.hpp"
#include "gscart/sampler.hpp"
#include "gscart/schedule.hpp"
#include "gscart/tensor_io.hpp"

namespace gsc {
namespace {

// ---------------------------------------------------------------------------
// run configuration file

struct ScheduleConfig {
    int steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double gamma_scale = 1.0;

    DiffusionSchedule build() const
    {
        return build_schedule(steps, beta_start, beta_end, ScheduleKind::linear, gamma_scale);
    }

    json to_json() const
    {
        return {{"steps", steps},
                {"beta_start", beta_start},
                {"beta_end", beta_end},
                {"gamma_scale", gamma_scale}};
    }

    static ScheduleConfig from_json(const json& j)
    {
        check_keys(j, {"steps", "beta_start", "beta_end", "gamma_scale"}, "schedule config");
        ScheduleConfig c;
        c.steps = get_or(j, "steps", c.steps);
        c.beta_start = get_or(j, "beta_start", c.beta_start);
        c.beta_end = get_or(j, "beta_end", c.beta_end);
        c.gamma_scale = get_or(j, "gamma_scale", c.gamma_scale);
        return c;
    }
};

struct ObservationConfig {
    double ratio = 0.1;
    double sigma = 0.0;
    int bits = 0; // 0 = linear measurements
    double x_min = 0.0;
    double x_max = 1.0;

    json to_json() const
    {
        return {{"ratio", ratio},
                {"sigma", sigma},
                {"bits", bits},
                {"x_min", x_min},
                {"x_max", x_max}};
    }

    static ObservationConfig from_json(const json& j)
    {
        check_keys(j, {"ratio", "sigma", "bits", "x_min", "x_max"}, "observation config");
        ObservationConfig c;
        c.ratio = get_or(j, "ratio", c.ratio);
        c.sigma = get_or(j, "sigma", c.sigma);
        c.bits = get_or(j, "bits", c.bits);
        c.x_min = get_or(j, "x_min", c.x_min);
        c.x_max = get_or(j, "x_max", c.x_max);
        if (!(c.ratio > 0.0) || c.ratio > 1.0)
            throw ConfigError("observation config: ratio must be in (0, 1]");
        if (c.sigma < 0.0)
            throw ConfigError("observation config: sigma must be >= 0");
        if (c.bits < 0 || c.bits > 16)
            throw ConfigError("observation config: bits must be in [0, 16]");
        return c;
    }
};

struct ActiveConfig {
    double initial_ratio = 0.1;
    std::vector<double> increments{0.03, 0.02, 0.02};
    std::string policy = "kmeans";
    int ensemble = 8;
    double w_xy = 1.0;
    double w_v = 1.0;

    json to_json() const
    {
        return {{"initial_ratio", initial_ratio}, {"increments", increments},
                {"policy", policy},               {"ensemble", ensemble},
                {"w_xy", w_xy},                   {"w_v", w_v}};
    }

    static ActiveConfig from_json(const json& j)
    {
        check_keys(j, {"initial_ratio", "increments", "policy", "ensemble", "w_xy", "w_v"},
                   "active config");
        ActiveConfig c;
        c.initial_ratio = get_or(j, "initial_ratio", c.initial_ratio);
        if (j.contains("increments"))
            c.increments = j.at("increments").get<std::vector<double>>();
        c.policy = get_or(j, "policy", c.policy);
        c.ensemble = get_or(j, "ensemble", c.ensemble);
        c.w_xy = get_or(j, "w_xy", c.w_xy);
        c.w_v = get_or(j, "w_v", c.w_v);
        if (c.policy != "kmeans" && c.policy != "random")
            throw ConfigError("active config: policy must be \"kmeans\" or \"random\"");
        if (c.ensemble < 2)
            throw ConfigError("active config: ensemble must be >= 2");
        return c;
    }
};

json idw_to_json(const IdwConfig& c)
{
    return {{"power", c.power}, {"epsilon", c.epsilon}};
}

IdwConfig idw_from_json(const json& j)
{
    check_keys(j, {"power", "epsilon"}, "idw config");
    IdwConfig c;
    c.power = get_or(j, "power", c.power);
    c.epsilon = get_or(j, "epsilon", c.epsilon);
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("idw config: ") + e.what());
    }
    return c;
}

struct RunConfig {
    ScheduleConfig schedule;
    MapConfig map;
    TrainConfig train;
    GscConfig sampler;
    ObservationConfig observation;
    ActiveConfig active;
    ExperimentGrid experiment;
    IdwConfig idw;

    json to_json() const
    {
        return {{"schedule", schedule.to_json()},
                {"map", map.to_json()},
                {"train", train.to_json()},
                {"sampler", sampler.to_json()},
                {"observation", observation.to_json()},
                {"active", active.to_json()},
                {"experiment", experiment.to_json()},
                {"idw", idw_to_json(idw)}};
    }

    static RunConfig from_json(const json& j)
    {
        check_keys(j,
                   {"schedule", "map", "train", "sampler", "observation", "active", "experiment",
                    "idw"},
                   "run config");
        RunConfig c;
        if (j.contains("schedule"))
            c.schedule = ScheduleConfig::from_json(j.at("schedule"));
        if (j.contains("map"))
            c.map = MapConfig::from_json(j.at("map"));
        if (j.contains("train"))
            c.train = TrainConfig::from_json(j.at("train"));
        if (j.contains("sampler"))
            c.sampler = GscConfig::from_json(j.at("sampler"));
        if (j.contains("observation"))
            c.observation = ObservationConfig::from_json(j.at("observation"));
        if (j.contains("active"))
            c.active = ActiveConfig::from_json(j.at("active"));
        if (j.contains("experiment"))
            c.experiment = ExperimentGrid::from_json(j.at("experiment"));
        if (j.contains("idw"))
            c.idw = idw_from_json(j.at("idw"));
        return c;
    }
};

RunConfig load_config(const std::string& path)
{
    if (path.empty())
        return RunConfig{};
    json j;
    try {
        j = json::parse(read_file_bytes(path));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return RunConfig::from_json(j);
}

void echo_config(const RunConfig& cfg, const std::string& out_dir)
{
    write_text_file(out_dir + "/config.json", cfg.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// shared helpers

SpectrumMap load_truth(const std::string& data, int map_index)
{
    MapTensor maps = read_map_tensor(data);
    if (map_index < 0 || map_index >= maps.count)
        throw ConfigError("--map-index " + std::to_string(map_index) + " out of range, tensor has " +
                          std::to_string(maps.count) + " maps");
    return maps.sample(map_index);
}

Observation simulate_observation(const SpectrumMap& truth, const ObservationConfig& oc, Rng& rng)
{
    ObservationMask mask = random_mask(truth.rows(), truth.cols(), oc.ratio, rng);
    if (oc.bits > 0)
        return observe_quantized(truth, mask, oc.sigma, build_quantizer(oc.bits, oc.x_min, oc.x_max),
                                 rng);
    return observe_linear(truth, mask, oc.sigma, rng);
}

SelectPolicy parse_policy(const std::string& name)
{
    if (name == "kmeans")
        return SelectPolicy::kmeans;
    if (name == "random")
        return SelectPolicy::random;
    throw ConfigError("unknown policy \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_gen_data(const RunConfig& cfg, int count, std::uint64_t seed, const std::string& out)
{
    Rng rng(seed);
    DatasetSummary s = generate_dataset(cfg.map, count, out + "/maps.gsc", rng);
    echo_config(cfg, out);
    std::printf("count=%d peak=%.6f checksum=%08x\n", s.count, s.peak, s.checksum);
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data, const std::string& out)
{
    DiffusionSchedule sched = cfg.schedule.build();
    LearnedDenoiser model = train_denoiser(data, sched, cfg.train);
    save_prior(out + "/model.gscnet", model);

    const TrainReport& rep = model.report();
    std::string csv = "epoch,loss\n";
    for (std::size_t i = 0; i < rep.epoch_losses.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.8f\n", i + 1, rep.epoch_losses[i]);
        csv += buf;
    }
    write_text_file(out + "/train_log.csv", csv);
    echo_config(cfg, out);
    std::printf("epochs=%d params=%d train_loss=%.6f holdout_loss=%.6f\n", rep.epochs,
                rep.parameter_count, rep.final_train_loss, rep.holdout_loss);
    return 0;
}

int cmd_reconstruct(const RunConfig& cfg, const std::string& obs_path, const std::string& data,
                    int map_index, const std::string& prior_path, const std::string& method,
                    std::uint64_t seed, const std::string& out)
{
    DiffusionSchedule sched = cfg.schedule.build();

    std::optional<SpectrumMap> truth;
    Observation obs;
    if (!obs_path.empty()) {
        json j;
        try {
            j = json::parse(read_file_bytes(obs_path));
        } catch (const json::exception& e) {
            throw ConfigError(obs_path + ": " + e.what());
        }
        obs = Observation::from_json(j);
        if (!data.empty())
            truth = load_truth(data, map_index); // only used for scoring
    } else {
        if (data.empty())
            throw ConfigError("reconstruct: pass --obs, or --data to simulate an observation");
        truth = load_truth(data, map_index);
        Rng obs_rng = Rng(seed).fork(0x6f627376);
        obs = simulate_observation(*truth, cfg.observation, obs_rng);
    }

    SpectrumMap rec;
    json diag;
    diag["method"] = method;
    if (method == "idw") {
        rec = idw_reconstruct(obs, cfg.idw);
    } else if (method == "gsc") {
        if (prior_path.empty())
            throw ConfigError("reconstruct: method \"gsc\" needs --prior");
        LearnedDenoiser prior = load_prior(prior_path, sched);
        Rng rng = Rng(seed).fork(0x73616d70);
        auto [x, report] = reconstruct(obs, prior, sched, cfg.sampler, rng);
        rec = std::move(x);
        diag["sampler"] = report.to_json();
    } else {
        throw ConfigError("reconstruct: unknown method \"" + method + "\"");
    }

    diag["seed"] = seed;
    diag["quantized"] = obs.is_quantized();
    diag["observed"] = obs.mask.size();
    if (truth) {
        diag["psnr_db"] = psnr(*truth, rec, 1.0);
        diag["mse"] = mse(*truth, rec);
    }

    MapTensor t;
    t.rows = rec.rows();
    t.cols = rec.cols();
    t.append(rec);
    write_map_tensor(out + "/reconstruction.gsc", t);
    write_pgm(out + "/reconstruction.pgm", rec);
    if (truth)
        write_pgm(out + "/truth.pgm", *truth);
    write_text_file(out + "/observation.json", obs.to_json().dump(2) + "\n");
    write_text_file(out + "/report.json", diag.dump(2) + "\n");
    echo_config(cfg, out);

    if (truth)
        std::printf("method=%s observed=%d psnr_db=%.4f\n", method.c_str(), obs.mask.size(),
                    diag["psnr_db"].get<double>());
    else
        std::printf("method=%s observed=%d\n", method.c_str(), obs.mask.size());
    return 0;
}

int cmd_active(const RunConfig& cfg, const std::string& data, int map_index,
               const std::string& prior_path, int rounds, std::uint64_t seed,
               const std::string& out)
{
    DiffusionSchedule sched = cfg.schedule.build();
    LearnedDenoiser prior = load_prior(prior_path, sched);
    SpectrumMap truth = load_truth(data, map_index);

    std::vector<double> incs = cfg.active.increments;
    if (rounds >= 0) {
        if (rounds > (int)incs.size())
            throw ConfigError("active: --rounds " + std::to_string(rounds) + " but only " +
                              std::to_string(incs.size()) + " increments configured");
        incs.resize((std::size_t)rounds);
    }

    SelectPolicy policy = parse_policy(cfg.active.policy);
    ObsModel model;
    model.sigma = cfg.observation.sigma;
    if (cfg.observation.bits > 0)
        model.quantizer =
            build_quantizer(cfg.observation.bits, cfg.observation.x_min, cfg.observation.x_max);
    KmeansWeights weights{cfg.active.w_xy, cfg.active.w_v};

    auto sink = [&](int round, const Observation& obs, const PosteriorEnsemble& ens,
                    const SamplingPlan* plan) {
        std::string tag = std::to_string(round);
        write_pgm(out + "/mean_round" + tag + ".pgm", ens.mean);
        double hi = ens.variance.max_value();
        write_pgm(out + "/uncertainty_round" + tag + ".pgm", ens.variance, 0.0,
                  hi > 0.0 ? hi : 1.0);
        if (plan) {
            json pj = {{"round", round},
                       {"policy", policy_name(plan->policy)},
                       {"observed_after", obs.mask.size()},
                       {"points", plan->points}};
            write_text_file(out + "/plan_round" + tag + ".json", pj.dump(2) + "\n");
        }
    };

    Rng rng(seed);
    std::vector<TrajectoryPoint> traj =
        active_loop(truth, cfg.active.initial_ratio, incs, policy, model, prior, sched, cfg.sampler,
                    cfg.active.ensemble, weights, rng, sink);
    write_text_file(out + "/trajectory.csv", render_trajectory_csv(traj, policy, seed));
    echo_config(cfg, out);

    const TrajectoryPoint& last = traj.back();
    std::printf("rounds=%zu final_ratio=%.4f final_psnr_db=%.4f\n", traj.size() - 1,
                last.observed_ratio, last.psnr_db);
    return 0;
}

int cmd_bench(const RunConfig& cfg, const std::string& data, const std::string& prior_path,
              const std::string& out)
{
    DiffusionSchedule sched = cfg.schedule.build();
    MapTensor maps = read_map_tensor(data);

    bool needs_prior = false;
    for (const std::string& m : cfg.experiment.methods)
        needs_prior = needs_prior || m == "gsc";
    std::optional<LearnedDenoiser> prior;
    if (needs_prior) {
        if (prior_path.empty())
            throw ConfigError("bench: grid includes method \"gsc\" so --prior is required");
        prior.emplace(load_prior(prior_path, sched));
    }

    std::vector<MetricRecord> records =
        run_experiment(cfg.experiment, maps, prior ? &*prior : nullptr, sched, cfg.sampler,
                       cfg.idw, out + "/records.csv", out + "/summary.txt");
    echo_config(cfg, out);
    std::printf("records=%zu out=%s\n", records.size(), out.c_str());
    return 0;
}

int run(int argc, char** argv)
{
    CLI::App app{"generative spectrum cartography toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "run configuration JSON")->capture_default_str();

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a training/evaluation map tensor");
    int gen_count = 64;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--count", gen_count, "number of maps")->capture_default_str();
    gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train the denoising prior on a map tensor");
    std::string train_data, train_out;
    train->add_option("--data", train_data, "training tensor (.gsc)")->required();
    train->add_option("--out", train_out, "output directory")->required();

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "reconstruct one map from observations");
    std::string rec_obs, rec_data, rec_prior, rec_out;
    std::string rec_method = "gsc";
    int rec_index = 0;
    std::uint64_t rec_seed = 1;
    double rec_ratio = 0.0, rec_sigma = 0.0;
    int rec_bits = 0;
    rec->add_option("--obs", rec_obs, "observation JSON file");
    rec->add_option("--data", rec_data, "map tensor to simulate from / score against");
    rec->add_option("--map-index", rec_index, "map index within --data")->capture_default_str();
    rec->add_option("--prior", rec_prior, "trained model file (.gscnet)");
    rec->add_option("--method", rec_method, "gsc or idw")->capture_default_str();
    auto* rec_ratio_opt = rec->add_option("--ratio", rec_ratio, "observed pixel ratio override");
    auto* rec_sigma_opt = rec->add_option("--sigma", rec_sigma, "noise sigma override");
    auto* rec_bits_opt = rec->add_option("--bits", rec_bits, "quantizer bits override (0 = linear)");
    rec->add_option("--seed", rec_seed, "sampler seed")->capture_default_str();
    rec->add_option("--out", rec_out, "output directory")->required();

    // active
    auto* act = app.add_subcommand("active", "closed-loop measurement selection on one map");
    std::string act_data, act_prior, act_out, act_policy;
    int act_index = 0, act_rounds = -1;
    std::uint64_t act_seed = 1;
    act->add_option("--data", act_data, "map tensor holding the ground truth")->required();
    act->add_option("--map-index", act_index, "map index within --data")->capture_default_str();
    act->add_option("--prior", act_prior, "trained model file (.gscnet)")->required();
    auto* act_policy_opt = act->add_option("--policy", act_policy, "kmeans or random");
    act->add_option("--rounds", act_rounds, "number of acquisition rounds (-1 = all configured)")
        ->capture_default_str();
    act->add_option("--seed", act_seed, "loop seed")->capture_default_str();
    act->add_option("--out", act_out, "output directory")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "run the benchmark grid over held-out maps");
    std::string bench_data, bench_prior, bench_out;
    bench->add_option("--data", bench_data, "evaluation tensor (.gsc)")->required();
    bench->add_option("--prior", bench_prior, "trained model file (.gscnet)");
    bench->add_option("--out", bench_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    RunConfig cfg = load_config(config_path);

    if (gen->parsed())
        return cmd_gen_data(cfg, gen_count, gen_seed, gen_out);
    if (train->parsed())
        return cmd_train(cfg, train_data, train_out);
    if (rec->parsed()) {
        if (rec_ratio_opt->count())
            cfg.observation.ratio = rec_ratio;
        if (rec_sigma_opt->count())
            cfg.observation.sigma = rec_sigma;
        if (rec_bits_opt->count())
            cfg.observation.bits = rec_bits;
        if (!(cfg.observation.ratio > 0.0) || cfg.observation.ratio > 1.0)
            throw ConfigError("reconstruct: ratio must be in (0, 1]");
        if (cfg.observation.sigma < 0.0)
            throw ConfigError("reconstruct: sigma must be >= 0");
        if (cfg.observation.bits < 0 || cfg.observation.bits > 16)
            throw ConfigError("reconstruct: bits must be in [0, 16]");
        return cmd_reconstruct(cfg, rec_obs, rec_data, rec_index, rec_prior, rec_method, rec_seed,
                               rec_out);
    }
    if (act->parsed()) {
        if (act_policy_opt->count())
            cfg.active.policy = act_policy;
        return cmd_active(cfg, act_data, act_index, act_prior, act_rounds, act_seed, act_out);
    }
    if (bench->parsed())
        return cmd_bench(cfg, bench_data, bench_prior, bench_out);
    return 2; // unreachable: require_subcommand(1)
}

} // namespace
} // namespace gsc

int main(int argc, char** argv)
{
    try {
        return gsc::run(argc, argv);
    } catch (const gsc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const gsc::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const gsc::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const gsc::CompatibilityError& e) {
        std::fprintf(stderr, "compatibility error: %s\n", e.what());
        return 5;
    } catch (const gsc::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
