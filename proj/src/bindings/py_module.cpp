// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: map generation, schedule
// construction, prior training/loading, reconstruction, the IDW baseline,
// uncertainty-guided selection and the PSNR/MSE metrics. Maps cross the
// boundary as 2-D float64 numpy arrays; observation masks as 1-D integer
// arrays of linear pixel indices (row * cols + col).

#include <algorithm>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gscart/active.hpp"
#include "gscart/baseline.hpp"
#include "gscart/errors.hpp"
#include "gscart/eval.hpp"
#include "gscart/grid.hpp"
#include "gscart/mapgen.hpp"
#include "gscart/observe.hpp"
#include "gscart/prior.hpp"
#include "gscart/rng.hpp"
#include "gscart/sampler.hpp"
#include "gscart/schedule.hpp"

namespace py = pybind11;
using namespace gsc;

namespace {

SpectrumMap to_map(const py::array_t<double, py::array::c_style | py::array::forcecast>& a)
{
    if (a.ndim() != 2)
        throw std::invalid_argument("expected a 2-D array");
    std::vector<double> values(a.data(), a.data() + a.size());
    return SpectrumMap::from_values((int)a.shape(0), (int)a.shape(1), std::move(values));
}

py::array_t<double> to_array(const SpectrumMap& m)
{
    py::array_t<double> a({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), a.mutable_data());
    return a;
}

/// Builds a validated mask from unsorted linear indices, keeping the paired
/// values aligned when reordering.
Observation make_observation(py::array_t<std::int64_t> indices, py::array_t<double> values,
                             int rows, int cols, double sigma, int bits)
{
    if (indices.ndim() != 1 || values.ndim() != 1 || indices.size() != values.size())
        throw std::invalid_argument("indices and values must be 1-D arrays of equal length");
    std::vector<std::pair<int, double>> pairs((std::size_t)indices.size());
    for (py::ssize_t i = 0; i < indices.size(); ++i)
        pairs[(std::size_t)i] = {(int)indices.at(i), values.at(i)};
    std::sort(pairs.begin(), pairs.end());

    Observation obs;
    obs.mask.rows = rows;
    obs.mask.cols = cols;
    for (auto& [px, v] : pairs) {
        obs.mask.observed.push_back(px);
        obs.values.push_back(v);
    }
    obs.noise_sigma = sigma;
    if (bits > 0)
        obs.quantizer = build_quantizer(bits, 0.0, 1.0);
    obs.validate();
    return obs;
}

py::dict report_to_dict(const PosteriorUpdateReport& report)
{
    std::vector<int> t, clipped;
    std::vector<double> gamma_sq, gain;
    for (const StepRecord& s : report.steps) {
        t.push_back(s.t);
        gamma_sq.push_back(s.gamma_sq);
        gain.push_back(s.gain);
        clipped.push_back(s.clipped);
    }
    py::dict d;
    d["t"] = t;
    d["gamma_sq"] = gamma_sq;
    d["gain"] = gain;
    d["clipped"] = clipped;
    return d;
}

GscConfig make_gsc_config(const std::string& init, int steps_used)
{
    GscConfig cfg;
    if (init == "pure_noise")
        cfg.init_mode = GscConfig::Init::pure_noise;
    else if (init == "forward_diffused_fill")
        cfg.init_mode = GscConfig::Init::forward_diffused_fill;
    else
        throw std::invalid_argument("init must be pure_noise or forward_diffused_fill");
    cfg.steps_used = steps_used;
    return cfg;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "spectrum-map reconstruction core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<CompatibilityError>(m, "CompatibilityError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<DiffusionSchedule>(m, "Schedule")
        .def(py::init([](int steps, double beta_start, double beta_end, double gamma_scale) {
                 return build_schedule(steps, beta_start, beta_end, ScheduleKind::linear,
                                       gamma_scale);
             }),
             py::arg("steps") = 100, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02,
             py::arg("gamma_scale") = 1.0)
        .def_property_readonly("steps", &DiffusionSchedule::steps)
        .def_property_readonly("hash", &DiffusionSchedule::hash)
        .def("alpha_bar", &DiffusionSchedule::alpha_bar, py::arg("t"))
        .def("gamma_sq", &DiffusionSchedule::gamma_sq, py::arg("t"))
        .def("sigma_tilde", &DiffusionSchedule::sigma_tilde, py::arg("t"));

    py::class_<DenoisingPrior>(m, "Prior");

    py::class_<AnalyticGaussianPrior, DenoisingPrior>(m, "AnalyticGaussianPrior")
        .def(py::init([](const py::array_t<double>& mean_map, double tau_sq) {
                 return AnalyticGaussianPrior(to_map(mean_map), tau_sq);
             }),
             py::arg("mean_map"), py::arg("tau_sq"))
        .def_property_readonly("rows", &AnalyticGaussianPrior::rows)
        .def_property_readonly("cols", &AnalyticGaussianPrior::cols)
        .def_property_readonly("tau_sq", &AnalyticGaussianPrior::tau_sq);

    py::class_<LearnedDenoiser, DenoisingPrior>(m, "LearnedModel")
        .def_property_readonly("rows", &LearnedDenoiser::rows)
        .def_property_readonly("cols", &LearnedDenoiser::cols)
        .def_property_readonly("schedule_hash", &LearnedDenoiser::schedule_hash)
        .def_property_readonly("parameter_count",
                               [](const LearnedDenoiser& p) { return p.net().params().size(); });

    m.def("mills_shift", &mills_shift, py::arg("a"), py::arg("b"),
          "Mean of a standard normal truncated to (a, b).");

    m.def(
        "generate_map",
        [](int rows, int cols, std::uint64_t seed) {
            MapConfig cfg;
            cfg.rows = rows;
            cfg.cols = cols;
            Rng rng(seed);
            return to_array(generate_map(cfg, rng));
        },
        py::arg("rows"), py::arg("cols"), py::arg("seed") = 1,
        "One normalized random map with the default generating model.");

    m.def(
        "generate_dataset",
        [](const std::string& path, int count, int rows, int cols, std::uint64_t seed) {
            MapConfig cfg;
            cfg.rows = rows;
            cfg.cols = cols;
            Rng rng(seed);
            DatasetSummary s = generate_dataset(cfg, count, path, rng);
            py::dict d;
            d["count"] = s.count;
            d["peak"] = s.peak;
            d["checksum"] = s.checksum;
            return d;
        },
        py::arg("path"), py::arg("count"), py::arg("rows"), py::arg("cols"), py::arg("seed") = 1,
        "Writes a map tensor plus JSON sidecar; returns its summary.");

    m.def(
        "train_model",
        [](const std::string& dataset, const std::string& model_path,
           const DiffusionSchedule& sched, int epochs, int batch_size, double learning_rate,
           std::uint64_t seed, double holdout_fraction) {
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.learning_rate = learning_rate;
            cfg.seed = seed;
            cfg.holdout_fraction = holdout_fraction;
            LearnedDenoiser model = train_denoiser(dataset, sched, cfg);
            save_prior(model_path, model);
            const TrainReport& r = model.report();
            py::dict d;
            d["epochs"] = r.epochs;
            d["parameter_count"] = r.parameter_count;
            d["final_train_loss"] = r.final_train_loss;
            d["holdout_loss"] = r.holdout_loss;
            d["epoch_losses"] = r.epoch_losses;
            return d;
        },
        py::arg("dataset"), py::arg("model_path"), py::arg("schedule"), py::arg("epochs") = 16,
        py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-3, py::arg("seed") = 1,
        py::arg("holdout_fraction") = 0.1,
        "Trains a denoiser on a map tensor file and saves it; returns the report.");

    m.def(
        "load_model",
        [](const std::string& path, const DiffusionSchedule& sched) {
            return load_prior(path, sched);
        },
        py::arg("path"), py::arg("schedule"),
        "Loads a trained model, verifying shape, checksum and schedule.");

    m.def(
        "reconstruct",
        [](const DenoisingPrior& prior, const DiffusionSchedule& sched,
           py::array_t<std::int64_t> indices, py::array_t<double> values, int rows, int cols,
           double sigma, int bits, const std::string& init, int steps_used, std::uint64_t seed) {
            Observation obs = make_observation(std::move(indices), std::move(values), rows, cols,
                                               sigma, bits);
            Rng rng(seed);
            auto [map, report] = reconstruct(obs, prior, sched, make_gsc_config(init, steps_used),
                                             rng);
            return py::make_tuple(to_array(map), report_to_dict(report));
        },
        py::arg("prior"), py::arg("schedule"), py::arg("indices"), py::arg("values"),
        py::arg("rows"), py::arg("cols"), py::arg("sigma") = 0.0, py::arg("bits") = 0,
        py::arg("init") = "pure_noise", py::arg("steps_used") = 0, py::arg("seed") = 1,
        "Posterior reconstruction from point observations; quantized when bits > 0 "
        "(values are then level indices). Returns (map, step_report).");

    m.def(
        "idw",
        [](py::array_t<std::int64_t> indices, py::array_t<double> values, int rows, int cols,
           double power) {
            Observation obs = make_observation(std::move(indices), std::move(values), rows, cols,
                                               0.0, 0);
            IdwConfig cfg;
            cfg.power = power;
            return to_array(idw_reconstruct(obs, cfg));
        },
        py::arg("indices"), py::arg("values"), py::arg("rows"), py::arg("cols"),
        py::arg("power") = 2.0, "Inverse-distance-weighting baseline reconstruction.");

    m.def(
        "kmeans_select",
        [](const py::array_t<double>& uncertainty, py::array_t<std::int64_t> observed, int q,
           std::uint64_t seed, double w_xy, double w_v) {
            SpectrumMap V = to_map(uncertainty);
            std::vector<int> idx((std::size_t)observed.size());
            for (py::ssize_t i = 0; i < observed.size(); ++i)
                idx[(std::size_t)i] = (int)observed.at(i);
            std::sort(idx.begin(), idx.end());
            ObservationMask mask{V.rows(), V.cols(), std::move(idx)};
            mask.validate();
            Rng rng(seed);
            SamplingPlan plan = kmeans_select(V, mask, q, KmeansWeights{w_xy, w_v}, rng);
            return py::array_t<std::int64_t>(py::cast(plan.points));
        },
        py::arg("uncertainty"), py::arg("observed"), py::arg("q"), py::arg("seed") = 1,
        py::arg("w_xy") = 1.0, py::arg("w_v") = 1.0,
        "Diversity-aware pick of q unobserved pixels; returns their linear indices.");

    m.def(
        "mse", [](const py::array_t<double>& a, const py::array_t<double>& b) {
            return mse(to_map(a), to_map(b));
        },
        py::arg("truth"), py::arg("estimate"));

    m.def(
        "psnr",
        [](const py::array_t<double>& a, const py::array_t<double>& b, double peak) {
            return psnr(to_map(a), to_map(b), peak);
        },
        py::arg("truth"), py::arg("estimate"), py::arg("peak") = 1.0);
}
