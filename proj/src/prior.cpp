// SPDX-License-Identifier: Apache-2.0

#include "gscart/prior.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "gscart/errors.hpp"
#include "gscart/tensor_io.hpp"

namespace gsc {

namespace {

constexpr char kNetMagic[8] = {'G', 'S', 'C', 'N', 'E', 'T', '0', '1'};

void put_u32le(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back((char)((v >> (8 * i)) & 0xffu));
}

void put_u64le(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back((char)((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32le(const unsigned char* p)
{
    return (std::uint32_t)p[0] | ((std::uint32_t)p[1] << 8) | ((std::uint32_t)p[2] << 16) |
           ((std::uint32_t)p[3] << 24);
}

std::uint64_t get_u64le(const unsigned char* p)
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | p[i];
    return v;
}

} // namespace

// ---- interface -------------------------------------------------------------

double DenoisingPrior::clean_signal_variance(int t, const DiffusionSchedule& sched) const
{
    return sched.gamma_sq(t);
}

void DenoisingPrior::require_shape(const SpectrumMap& m) const
{
    if (m.rows() != rows() || m.cols() != cols())
        throw std::invalid_argument("DenoisingPrior: got " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()) + " map, prior supports " +
                                    std::to_string(rows()) + "x" + std::to_string(cols()));
}

// ---- analytic Gaussian prior -----------------------------------------------

AnalyticGaussianPrior::AnalyticGaussianPrior(SpectrumMap mean_map, double tau_sq)
    : mean_(std::move(mean_map)), tau_sq_(tau_sq)
{
    if (!(tau_sq_ > 0.0))
        throw std::invalid_argument("AnalyticGaussianPrior: tau_sq must be > 0");
}

SpectrumMap AnalyticGaussianPrior::conditional_mean(const SpectrumMap& x_t, int t,
                                                    const DiffusionSchedule& sched) const
{
    require_shape(x_t);
    double ab = sched.alpha_bar(t);
    double root_ab = std::sqrt(ab);
    // conjugate-Gaussian shrinkage of x_t toward the scaled prior mean
    double gain = root_ab * tau_sq_ / (ab * tau_sq_ + 1.0 - ab);
    SpectrumMap out(x_t.rows(), x_t.cols());
    for (int i = 0; i < out.size(); ++i)
        out[i] = mean_[i] + gain * (x_t[i] - root_ab * mean_[i]);
    return out;
}

SpectrumMap AnalyticGaussianPrior::predict_noise(const SpectrumMap& x_t, int t,
                                                 const DiffusionSchedule& sched) const
{
    SpectrumMap cond = conditional_mean(x_t, t, sched);
    double ab = sched.alpha_bar(t);
    double root_ab = std::sqrt(ab);
    double root_om = std::sqrt(1.0 - ab);
    // the unique eps for which the clean-signal estimate equals E[x0 | x_t]
    SpectrumMap eps(x_t.rows(), x_t.cols());
    for (int i = 0; i < eps.size(); ++i)
        eps[i] = (x_t[i] - root_ab * cond[i]) / root_om;
    return eps;
}

double AnalyticGaussianPrior::clean_signal_variance(int t, const DiffusionSchedule& sched) const
{
    // exact conditional variance: harmonic combination of the prior variance
    // and the schedule's diffusion-state variance
    double g = sched.gamma_sq(t);
    return tau_sq_ * g / (tau_sq_ + g);
}

// ---- training configuration ------------------------------------------------

void TrainConfig::validate() const
{
    if (epochs < 1)
        throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (!(holdout_fraction > 0.0) || holdout_fraction >= 1.0)
        throw std::invalid_argument("TrainConfig: holdout_fraction must be in (0, 1)");
}

json TrainConfig::to_json() const
{
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"holdout_fraction", holdout_fraction}};
}

TrainConfig TrainConfig::from_json(const json& j)
{
    check_keys(j, {"epochs", "batch_size", "learning_rate", "seed", "holdout_fraction"},
               "train config");
    TrainConfig c;
    c.epochs = get_or(j, "epochs", c.epochs);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
    c.seed = get_or(j, "seed", c.seed);
    c.holdout_fraction = get_or(j, "holdout_fraction", c.holdout_fraction);
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    return c;
}

// ---- learned denoiser ------------------------------------------------------

LearnedDenoiser::LearnedDenoiser(int rows, int cols, net::NetSpec spec,
                                 std::uint64_t schedule_hash, Rng& rng)
    : rows_(rows), cols_(cols), spec_(spec), schedule_hash_(schedule_hash), net_(spec, rng)
{
    if (rows_ < 8 || cols_ < 8)
        throw std::invalid_argument("LearnedDenoiser: grid must be at least 8x8");
}

LearnedDenoiser::LearnedDenoiser(int rows, int cols, net::NetSpec spec,
                                 std::uint64_t schedule_hash, std::vector<float> params)
    : rows_(rows), cols_(cols), spec_(spec), schedule_hash_(schedule_hash),
      net_(spec, std::move(params))
{
    if (rows_ < 8 || cols_ < 8)
        throw std::invalid_argument("LearnedDenoiser: grid must be at least 8x8");
}

SpectrumMap LearnedDenoiser::predict_noise(const SpectrumMap& x_t, int t,
                                           const DiffusionSchedule& sched) const
{
    require_shape(x_t);
    sched.check_step(t);
    if (sched.hash() != schedule_hash_)
        throw CompatibilityError("LearnedDenoiser: schedule differs from the one trained for");

    net::Batch x;
    x.resize(1, 1, rows_, cols_);
    for (int i = 0; i < x_t.size(); ++i)
        x.m.data()[i] = (float)x_t[i];

    net::Trace tr;
    net::Batch y = net_.forward(x, {t}, tr);

    SpectrumMap out(rows_, cols_);
    for (int i = 0; i < out.size(); ++i)
        out[i] = (double)y.m.data()[i];
    return out;
}

// ---- training --------------------------------------------------------------

namespace {

/// Mean squared difference between prediction and target over all entries.
double batch_loss(const net::Batch& pred, const net::Batch& target)
{
    double s = 0.0;
    const float* a = pred.m.data();
    const float* b = target.m.data();
    Eigen::Index n = pred.m.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        double d = (double)a[i] - b[i];
        s += d * d;
    }
    return s / (double)n;
}

/// Assembles diffused inputs x_t and their noise targets for the given
/// dataset rows. Maps enter on the network's [-1, 1] scale.
void make_training_batch(const MapTensor& data, const std::vector<int>& rows_in_batch,
                         const DiffusionSchedule& sched, Rng& rng, net::Batch& x,
                         net::Batch& target, std::vector<int>& t)
{
    int n = (int)rows_in_batch.size();
    int pix = data.rows * data.cols;
    x.resize(n, 1, data.rows, data.cols);
    target.resize(n, 1, data.rows, data.cols);
    t.resize((std::size_t)n);
    for (int j = 0; j < n; ++j) {
        t[(std::size_t)j] = 1 + (int)rng.uniform_int((std::uint64_t)sched.steps());
        double ab = sched.alpha_bar(t[(std::size_t)j]);
        double ra = std::sqrt(ab), ro = std::sqrt(1.0 - ab);
        const float* x0 = data.data.data() + (std::size_t)rows_in_batch[(std::size_t)j] * pix;
        float* px = x.m.data() + (std::size_t)j * pix;
        float* pt = target.m.data() + (std::size_t)j * pix;
        for (int i = 0; i < pix; ++i) {
            float eps = (float)rng.normal();
            pt[i] = eps;
            px[i] = (float)(ra * (2.0 * x0[i] - 1.0) + ro * eps);
        }
    }
}

} // namespace

LearnedDenoiser train_denoiser(const std::string& dataset, const DiffusionSchedule& sched,
                               const TrainConfig& cfg)
{
    cfg.validate();
    MapTensor data = read_map_tensor(dataset);
    if (data.count < 2)
        throw std::invalid_argument("train_denoiser: need at least 2 samples");
    if (data.rows < 8 || data.cols < 8)
        throw std::invalid_argument("train_denoiser: dataset grids must be at least 8x8");

    int n_hold = std::max(1, (int)std::lround(cfg.holdout_fraction * data.count));
    int n_train = data.count - n_hold;
    if (n_train < 1)
        throw std::invalid_argument("train_denoiser: holdout fraction leaves no training data");

    Rng rng(cfg.seed);
    LearnedDenoiser model(data.rows, data.cols, net::NetSpec{}, sched.hash(), rng);
    Rng holdout_rng = rng.fork(0x686f6c64); // fixed stream: holdout loss is deterministic

    net::Batch x, target, pred;
    std::vector<int> t;
    net::Trace tr;

    std::vector<int> order((std::size_t)n_train);
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    report.epochs = cfg.epochs;
    report.parameter_count = model.net_.param_count();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // cosine decay to 5% of the base rate over the run
        double frac = cfg.epochs > 1 ? (double)epoch / (cfg.epochs - 1) : 0.0;
        float lr = (float)(cfg.learning_rate * (0.05 + 0.475 * (1.0 + std::cos(M_PI * frac))));

        // Fisher-Yates reshuffle each epoch
        for (int i = n_train - 1; i > 0; --i)
            std::swap(order[(std::size_t)i], order[(std::size_t)rng.uniform_int((std::uint64_t)(i + 1))]);

        double loss_sum = 0.0;
        int batches = 0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            int stop = std::min(start + cfg.batch_size, n_train);
            std::vector<int> idx(order.begin() + start, order.begin() + stop);
            make_training_batch(data, idx, sched, rng, x, target, t);

            pred = model.net_.forward(x, t, tr);
            double loss = batch_loss(pred, target);
            if (!std::isfinite(loss))
                throw NumericalError("train_denoiser: non-finite loss at epoch " +
                                     std::to_string(epoch + 1));
            loss_sum += loss;
            ++batches;

            // d(loss)/d(pred) for the mean-squared objective
            net::Batch dy = pred;
            float scale = 2.0f / (float)pred.m.size();
            dy.m = (pred.m - target.m) * scale;

            model.net_.store().zero_grad();
            model.net_.backward(tr, dy);
            model.net_.store().adam_step(lr);
        }
        report.epoch_losses.push_back(loss_sum / batches);
    }
    report.final_train_loss = report.epoch_losses.back();

    // held-out loss with its own fixed draws
    double hold_sum = 0.0;
    long hold_n = 0;
    for (int start = 0; start < n_hold; start += cfg.batch_size) {
        int stop = std::min(start + cfg.batch_size, n_hold);
        std::vector<int> idx;
        for (int k = start; k < stop; ++k)
            idx.push_back(n_train + k);
        make_training_batch(data, idx, sched, holdout_rng, x, target, t);
        pred = model.net_.forward(x, t, tr);
        hold_sum += batch_loss(pred, target) * (double)pred.m.size();
        hold_n += pred.m.size();
    }
    report.holdout_loss = hold_sum / (double)hold_n;

    model.report_ = report;
    return model;
}

// ---- model file ------------------------------------------------------------

void save_prior(const std::string& path, const LearnedDenoiser& prior)
{
    const std::vector<float>& params = prior.net().params();
    std::string blob;
    blob.reserve(params.size() * 4);
    for (float f : params) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32le(blob, u);
    }

    std::string bytes;
    bytes.reserve(40 + blob.size() + 4);
    bytes.append(kNetMagic, 8);
    put_u32le(bytes, (std::uint32_t)prior.rows());
    put_u32le(bytes, (std::uint32_t)prior.cols());
    put_u32le(bytes, (std::uint32_t)prior.spec().base_channels);
    put_u32le(bytes, (std::uint32_t)prior.spec().time_dim);
    put_u64le(bytes, prior.schedule_hash());
    put_u32le(bytes, (std::uint32_t)params.size());
    put_u32le(bytes, 0); // reserved
    bytes += blob;
    put_u32le(bytes, crc32(blob.data(), blob.size()));
    write_file_bytes(path, bytes);

    const TrainReport& r = prior.report();
    json meta;
    meta["rows"] = prior.rows();
    meta["cols"] = prior.cols();
    meta["base_channels"] = prior.spec().base_channels;
    meta["time_dim"] = prior.spec().time_dim;
    meta["schedule_hash"] = prior.schedule_hash();
    meta["parameter_count"] = params.size();
    meta["optimizer"] = "adam";
    meta["epochs"] = r.epochs;
    meta["final_train_loss"] = r.final_train_loss;
    meta["holdout_loss"] = r.holdout_loss;
    meta["epoch_losses"] = r.epoch_losses;
    write_text_file(path + ".json", meta.dump(2) + "\n");
}

LearnedDenoiser load_prior(const std::string& path, const DiffusionSchedule& sched)
{
    std::string bytes = read_file_bytes(path);
    if (bytes.size() < 44 || std::memcmp(bytes.data(), kNetMagic, 8) != 0)
        throw IoError("not a model file (bad magic): " + path);
    const auto* p = (const unsigned char*)bytes.data();
    int rows = (int)get_u32le(p + 8);
    int cols = (int)get_u32le(p + 12);
    net::NetSpec spec;
    spec.base_channels = (int)get_u32le(p + 16);
    spec.time_dim = (int)get_u32le(p + 20);
    std::uint64_t hash = get_u64le(p + 24);
    std::uint32_t param_count = get_u32le(p + 32);

    if (bytes.size() != 40 + (std::size_t)param_count * 4 + 4)
        throw IoError("truncated model file: " + path);
    const char* blob = bytes.data() + 40;
    std::uint32_t stored_crc = get_u32le(p + 40 + (std::size_t)param_count * 4);
    if (crc32(blob, (std::size_t)param_count * 4) != stored_crc)
        throw IoError("corrupt model file (checksum mismatch): " + path);
    if (hash != sched.hash())
        throw CompatibilityError("model file " + path + " was trained for a different schedule");

    std::vector<float> params((std::size_t)param_count);
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::uint32_t u = get_u32le((const unsigned char*)blob + i * 4);
        std::memcpy(&params[i], &u, 4);
    }
    return LearnedDenoiser(rows, cols, spec, hash, std::move(params));
}

} // namespace gsc
