// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gscart/rng.hpp"

namespace gsc::net {

/// Row-major float32 matrix; row-major keeps per-channel pixel runs
/// contiguous in the batch layout below.
using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Mini-batch of multi-channel grids stored as one matrix of shape
/// [channels x (batch * rows * cols)]; columns are sample-major with
/// row-major pixels inside a sample.
struct Batch {
    int n = 0;
    int ch = 0;
    int rows = 0;
    int cols = 0;
    Matrix m;

    void resize(int n_, int ch_, int rows_, int cols_)
    {
        n = n_;
        ch = ch_;
        rows = rows_;
        cols = cols_;
        m.setZero(ch, (Eigen::Index)n * rows * cols);
    }
    int pixels() const { return rows * cols; }
};

/// Flat parameter and gradient arrays with Adam state. Layers address their
/// slices through integer offsets, which keeps serialization and the
/// optimizer step trivial.
class ParamStore {
public:
    int alloc(int count);
    int size() const { return (int)value_.size(); }

    float* value(int off) { return value_.data() + off; }
    const float* value(int off) const { return value_.data() + off; }
    float* grad(int off) { return grad_.data() + off; }

    const std::vector<float>& values() const { return value_; }
    void set_values(std::vector<float> v);

    void zero_grad();
    void adam_step(float lr, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);

private:
    std::vector<float> value_, grad_, adam_m_, adam_v_;
    long steps_ = 0;
};

/// Architecture knobs; the layer graph itself is fixed.
struct NetSpec {
    int base_channels = 24;
    int time_dim = 48;
};

// Parameter slices of the primitive layers.
struct ConvP {
    int cin = 0, cout = 0, stride = 1;
    int w = 0, b = 0;
};
struct NormP {
    int ch = 0, groups = 0;
    int scale = 0, shift = 0;
};
struct LinP {
    int in = 0, out = 0;
    int w = 0, b = 0;
};
struct ResBlockP {
    NormP n1;
    ConvP c1;
    LinP emb;
    NormP n2;
    ConvP c2;
};

// Forward caches consumed by backward; double as inference scratch.
struct ConvTrace {
    Matrix cols; // im2col patches, [cin*9 x n*hout*wout]
    int n = 0, hin = 0, win = 0, hout = 0, wout = 0;
};
struct NormTrace {
    Batch in;
    Matrix mean, invstd; // [groups*n] stored as [groups x n]
};
struct SiluTrace {
    Batch pre;
};
struct ResBlockTrace {
    NormTrace n1;
    SiluTrace a1;
    ConvTrace c1;
    Batch after_bias;
    NormTrace n2;
    SiluTrace a2;
    ConvTrace c2;
};
struct UpTrace {
    int hs = 0, ws = 0; // source dims (pre-upsample)
    int hd = 0, wd = 0; // dims after cropping to the skip branch
};
struct Trace {
    Matrix e0, e1_pre, e2, e3; // time-embedding stages; e3 feeds the blocks
    ConvTrace conv_in;
    ResBlockTrace rb[6];
    ConvTrace down1, down2, up1, up2;
    UpTrace up1_shape, up2_shape;
    NormTrace n_out;
    SiluTrace a_out;
    ConvTrace conv_out;
};

/// Small encoder-decoder convolutional noise predictor with three
/// resolutions, residual blocks and an additive sinusoidal time embedding.
/// Works on any grid with rows, cols >= 8.
class DenoiserNet {
public:
    DenoiserNet(NetSpec spec, Rng& rng);
    DenoiserNet(NetSpec spec, std::vector<float> params);

    const NetSpec& spec() const { return spec_; }
    int param_count() const { return store_.size(); }
    const std::vector<float>& params() const { return store_.values(); }
    ParamStore& store() { return store_; }

    /// Noise prediction for a batch; t holds one 1-based step per sample.
    /// The trace is required scratch and feeds backward.
    Batch forward(const Batch& x, const std::vector<int>& t, Trace& tr) const;

    /// Accumulates parameter gradients given d(loss)/d(output).
    void backward(const Trace& tr, const Batch& dy);

private:
    void build(Rng* rng);

    NetSpec spec_;
    ParamStore store_;
    ConvP conv_in_, down1_, down2_, up1_, up2_, conv_out_;
    ResBlockP rb_[6];
    NormP n_out_;
    LinP mlp1_, mlp2_;
};

} // namespace gsc::net
