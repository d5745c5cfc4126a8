// SPDX-License-Identifier: Apache-2.0

#include "gscart/denoiser_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsc::net {

namespace {

using Eigen::Index;

// ---- primitive layers ------------------------------------------------------

/// Unrolls 3x3 neighborhoods (zero padding 1) into tr.cols so the convolution
/// becomes one GEMM. Patch rows are ordered (channel, kr, kc).
void im2col(const Batch& x, int stride, ConvTrace& tr)
{
    int h = x.rows, w = x.cols, s = stride;
    int ho = (h - 1) / s + 1, wo = (w - 1) / s + 1;
    tr.n = x.n;
    tr.hin = h;
    tr.win = w;
    tr.hout = ho;
    tr.wout = wo;
    tr.cols.resize((Index)x.ch * 9, (Index)x.n * ho * wo);

    Index in_stride = x.m.cols();
    Index out_stride = tr.cols.cols();
    for (int k = 0; k < x.ch; ++k) {
        const float* src_ch = x.m.data() + (Index)k * in_stride;
        for (int kr = 0; kr < 3; ++kr)
            for (int kc = 0; kc < 3; ++kc) {
                float* dst_row = tr.cols.data() + ((Index)k * 9 + kr * 3 + kc) * out_stride;
                int c0 = (kc == 0) ? 1 : 0;
                int c1 = std::min(wo, (w - kc) / s + 1);
                for (int j = 0; j < x.n; ++j) {
                    const float* src = src_ch + (Index)j * h * w;
                    float* dst = dst_row + (Index)j * ho * wo;
                    for (int r = 0; r < ho; ++r, dst += wo) {
                        int ri = r * s - 1 + kr;
                        if (ri < 0 || ri >= h) {
                            std::fill(dst, dst + wo, 0.0f);
                            continue;
                        }
                        const float* in_row = src + (Index)ri * w;
                        std::fill(dst, dst + c0, 0.0f);
                        if (s == 1)
                            std::copy(in_row + c0 - 1 + kc, in_row + c1 - 1 + kc, dst + c0);
                        else
                            for (int c = c0; c < c1; ++c)
                                dst[c] = in_row[c * s - 1 + kc];
                        std::fill(dst + c1, dst + wo, 0.0f);
                    }
                }
            }
    }
}

/// Scatter-add transpose of im2col: patch gradients back onto the input grid.
void col2im(const Matrix& dcols, int cin, int stride, const ConvTrace& tr, Batch& dx)
{
    int h = tr.hin, w = tr.win, s = stride, ho = tr.hout, wo = tr.wout;
    dx.resize(tr.n, cin, h, w);

    Index in_stride = dx.m.cols();
    Index out_stride = dcols.cols();
    for (int k = 0; k < cin; ++k) {
        float* dst_ch = dx.m.data() + (Index)k * in_stride;
        for (int kr = 0; kr < 3; ++kr)
            for (int kc = 0; kc < 3; ++kc) {
                const float* src_row = dcols.data() + ((Index)k * 9 + kr * 3 + kc) * out_stride;
                int c0 = (kc == 0) ? 1 : 0;
                int c1 = std::min(wo, (w - kc) / s + 1);
                for (int j = 0; j < tr.n; ++j) {
                    float* dst = dst_ch + (Index)j * h * w;
                    const float* src = src_row + (Index)j * ho * wo;
                    for (int r = 0; r < ho; ++r, src += wo) {
                        int ri = r * s - 1 + kr;
                        if (ri < 0 || ri >= h)
                            continue;
                        float* out_row = dst + (Index)ri * w;
                        if (s == 1)
                            for (int c = c0; c < c1; ++c)
                                out_row[c - 1 + kc] += src[c];
                        else
                            for (int c = c0; c < c1; ++c)
                                out_row[c * s - 1 + kc] += src[c];
                    }
                }
            }
    }
}

Batch conv_forward(const ConvP& p, const ParamStore& ps, const Batch& x, ConvTrace& tr)
{
    im2col(x, p.stride, tr);
    Batch y;
    y.resize(x.n, p.cout, tr.hout, tr.wout);
    Eigen::Map<const Matrix> W(ps.value(p.w), p.cout, p.cin * 9);
    Eigen::Map<const Eigen::VectorXf> b(ps.value(p.b), p.cout);
    y.m.noalias() = W * tr.cols;
    y.m.colwise() += b;
    return y;
}

Batch conv_backward(const ConvP& p, ParamStore& ps, const ConvTrace& tr, const Batch& dy,
                    bool need_dx)
{
    Eigen::Map<Matrix> dW(ps.grad(p.w), p.cout, p.cin * 9);
    Eigen::Map<Eigen::VectorXf> db(ps.grad(p.b), p.cout);
    dW.noalias() += dy.m * tr.cols.transpose();
    db.noalias() += dy.m.rowwise().sum();
    Batch dx;
    if (need_dx) {
        Eigen::Map<const Matrix> W(ps.value(p.w), p.cout, p.cin * 9);
        Matrix dcols = W.transpose() * dy.m;
        col2im(dcols, p.cin, p.stride, tr, dx);
    }
    return dx;
}

Batch norm_forward(const NormP& p, const ParamStore& ps, const Batch& x, NormTrace& tr)
{
    int g = p.groups, cs = p.ch / g, pix = x.pixels();
    tr.in = x;
    tr.mean.resize(g, x.n);
    tr.invstd.resize(g, x.n);
    Batch y;
    y.resize(x.n, x.ch, x.rows, x.cols);
    const float* scale = ps.value(p.scale);
    const float* shift = ps.value(p.shift);
    Index stride = x.m.cols();
    for (int j = 0; j < x.n; ++j)
        for (int q = 0; q < g; ++q) {
            double sum = 0.0, sq = 0.0;
            for (int c = q * cs; c < (q + 1) * cs; ++c) {
                const float* px = x.m.data() + (Index)c * stride + (Index)j * pix;
                for (int i = 0; i < pix; ++i) {
                    sum += px[i];
                    sq += (double)px[i] * px[i];
                }
            }
            double cnt = (double)cs * pix;
            double mean = sum / cnt;
            double var = std::max(sq / cnt - mean * mean, 0.0);
            float mu = (float)mean;
            float is = (float)(1.0 / std::sqrt(var + 1e-5));
            tr.mean(q, j) = mu;
            tr.invstd(q, j) = is;
            for (int c = q * cs; c < (q + 1) * cs; ++c) {
                const float* px = x.m.data() + (Index)c * stride + (Index)j * pix;
                float* py = y.m.data() + (Index)c * stride + (Index)j * pix;
                float sc = scale[c], sh = shift[c];
                for (int i = 0; i < pix; ++i)
                    py[i] = sc * ((px[i] - mu) * is) + sh;
            }
        }
    return y;
}

Batch norm_backward(const NormP& p, ParamStore& ps, const NormTrace& tr, const Batch& dy)
{
    const Batch& x = tr.in;
    int g = p.groups, cs = p.ch / g, pix = x.pixels();
    Batch dx;
    dx.resize(x.n, x.ch, x.rows, x.cols);
    const float* scale = ps.value(p.scale);
    float* dscale = ps.grad(p.scale);
    float* dshift = ps.grad(p.shift);
    Index stride = x.m.cols();
    for (int j = 0; j < x.n; ++j)
        for (int q = 0; q < g; ++q) {
            float mu = tr.mean(q, j), is = tr.invstd(q, j);
            // group means of d(xhat) and d(xhat)*xhat, plus per-channel
            // scale/shift gradients, in one pass
            double m1 = 0.0, m2 = 0.0;
            for (int c = q * cs; c < (q + 1) * cs; ++c) {
                const float* px = x.m.data() + (Index)c * stride + (Index)j * pix;
                const float* pd = dy.m.data() + (Index)c * stride + (Index)j * pix;
                double dsc = 0.0, dsh = 0.0;
                float sc = scale[c];
                for (int i = 0; i < pix; ++i) {
                    float xh = (px[i] - mu) * is;
                    float dxh = pd[i] * sc;
                    dsc += (double)pd[i] * xh;
                    dsh += pd[i];
                    m1 += dxh;
                    m2 += (double)dxh * xh;
                }
                dscale[c] += (float)dsc;
                dshift[c] += (float)dsh;
            }
            double cnt = (double)cs * pix;
            float f1 = (float)(m1 / cnt), f2 = (float)(m2 / cnt);
            for (int c = q * cs; c < (q + 1) * cs; ++c) {
                const float* px = x.m.data() + (Index)c * stride + (Index)j * pix;
                const float* pd = dy.m.data() + (Index)c * stride + (Index)j * pix;
                float* pout = dx.m.data() + (Index)c * stride + (Index)j * pix;
                float sc = scale[c];
                for (int i = 0; i < pix; ++i) {
                    float xh = (px[i] - mu) * is;
                    pout[i] = is * (pd[i] * sc - f1 - xh * f2);
                }
            }
        }
    return dx;
}

Matrix msilu(const Matrix& x)
{
    return (x.array() * (1.0f / (1.0f + (-x.array()).exp()))).matrix();
}

Matrix msilu_grad(const Matrix& pre, const Matrix& dy)
{
    Matrix sig = (1.0f / (1.0f + (-pre.array()).exp())).matrix();
    return (dy.array() * sig.array() * (1.0f + pre.array() * (1.0f - sig.array()))).matrix();
}

Batch silu_forward(const Batch& x, SiluTrace& tr)
{
    tr.pre = x;
    Batch y = x;
    y.m = msilu(x.m);
    return y;
}

Batch silu_backward(const SiluTrace& tr, const Batch& dy)
{
    Batch dx = dy;
    dx.m = msilu_grad(tr.pre.m, dy.m);
    return dx;
}

/// Nearest-neighbor x2 upsampling, cropped to the target dims so odd-sized
/// skip branches line up.
Batch upsample_to(const Batch& x, int hd, int wd, UpTrace& tr)
{
    tr.hs = x.rows;
    tr.ws = x.cols;
    tr.hd = hd;
    tr.wd = wd;
    Batch y;
    y.resize(x.n, x.ch, hd, wd);
    Index si = x.m.cols(), so = y.m.cols();
    for (int c = 0; c < x.ch; ++c)
        for (int j = 0; j < x.n; ++j) {
            const float* src = x.m.data() + (Index)c * si + (Index)j * x.rows * x.cols;
            float* dst = y.m.data() + (Index)c * so + (Index)j * hd * wd;
            for (int r = 0; r < hd; ++r) {
                const float* in_row = src + (Index)(r / 2) * x.cols;
                float* out_row = dst + (Index)r * wd;
                for (int cc = 0; cc < wd; ++cc)
                    out_row[cc] = in_row[cc / 2];
            }
        }
    return y;
}

Batch upsample_grad(const UpTrace& tr, const Batch& dy)
{
    Batch dx;
    dx.resize(dy.n, dy.ch, tr.hs, tr.ws);
    Index si = dx.m.cols(), so = dy.m.cols();
    for (int c = 0; c < dy.ch; ++c)
        for (int j = 0; j < dy.n; ++j) {
            float* dst = dx.m.data() + (Index)c * si + (Index)j * tr.hs * tr.ws;
            const float* src = dy.m.data() + (Index)c * so + (Index)j * tr.hd * tr.wd;
            for (int r = 0; r < tr.hd; ++r) {
                float* out_row = dst + (Index)(r / 2) * tr.ws;
                const float* in_row = src + (Index)r * tr.wd;
                for (int cc = 0; cc < tr.wd; ++cc)
                    out_row[cc / 2] += in_row[cc];
            }
        }
    return dx;
}

Matrix lin_forward(const LinP& p, const ParamStore& ps, const Matrix& x)
{
    Eigen::Map<const Matrix> W(ps.value(p.w), p.out, p.in);
    Eigen::Map<const Eigen::VectorXf> b(ps.value(p.b), p.out);
    Matrix y = W * x;
    y.colwise() += b;
    return y;
}

Matrix lin_backward(const LinP& p, ParamStore& ps, const Matrix& x, const Matrix& dy)
{
    Eigen::Map<Matrix> dW(ps.grad(p.w), p.out, p.in);
    Eigen::Map<Eigen::VectorXf> db(ps.grad(p.b), p.out);
    dW.noalias() += dy * x.transpose();
    db.noalias() += dy.rowwise().sum();
    Eigen::Map<const Matrix> W(ps.value(p.w), p.out, p.in);
    return W.transpose() * dy;
}

Matrix time_embedding(const std::vector<int>& t, int dim)
{
    int half = dim / 2;
    Matrix e(dim, (int)t.size());
    for (int j = 0; j < (int)t.size(); ++j) {
        if (t[j] < 1)
            throw std::invalid_argument("DenoiserNet: step index must be >= 1");
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * i / (half - 1));
            e(i, j) = (float)std::sin(t[j] * freq);
            e(half + i, j) = (float)std::cos(t[j] * freq);
        }
    }
    return e;
}

Batch resblock_forward(const ResBlockP& p, const ParamStore& ps, const Batch& h, const Matrix& e,
                       ResBlockTrace& tr)
{
    Batch y = norm_forward(p.n1, ps, h, tr.n1);
    y = silu_forward(y, tr.a1);
    y = conv_forward(p.c1, ps, y, tr.c1);

    Matrix bias = lin_forward(p.emb, ps, e); // [ch x n], one bias per channel/sample
    int pix = y.pixels();
    Index stride = y.m.cols();
    for (int c = 0; c < y.ch; ++c)
        for (int j = 0; j < y.n; ++j) {
            float* py = y.m.data() + (Index)c * stride + (Index)j * pix;
            float b = bias(c, j);
            for (int i = 0; i < pix; ++i)
                py[i] += b;
        }
    tr.after_bias = y;

    y = norm_forward(p.n2, ps, y, tr.n2);
    y = silu_forward(y, tr.a2);
    y = conv_forward(p.c2, ps, y, tr.c2);
    y.m += h.m; // identity skip
    return y;
}

Batch resblock_backward(const ResBlockP& p, ParamStore& ps, const ResBlockTrace& tr,
                        const Matrix& e, const Batch& dout, Matrix& de)
{
    Batch d = conv_backward(p.c2, ps, tr.c2, dout, true);
    d = silu_backward(tr.a2, d);
    d = norm_backward(p.n2, ps, tr.n2, d);

    // the time bias is constant across pixels, so its gradient is a per
    // (channel, sample) sum
    int pix = d.pixels();
    Index stride = d.m.cols();
    Matrix dbias(d.ch, d.n);
    for (int c = 0; c < d.ch; ++c)
        for (int j = 0; j < d.n; ++j) {
            const float* pd = d.m.data() + (Index)c * stride + (Index)j * pix;
            double s = 0.0;
            for (int i = 0; i < pix; ++i)
                s += pd[i];
            dbias(c, j) = (float)s;
        }
    de.noalias() += lin_backward(p.emb, ps, e, dbias);

    d = conv_backward(p.c1, ps, tr.c1, d, true);
    d = silu_backward(tr.a1, d);
    d = norm_backward(p.n1, ps, tr.n1, d);
    d.m += dout.m; // identity skip
    return d;
}

int norm_groups(int ch)
{
    int g = std::min(8, ch);
    while (ch % g)
        --g;
    return g;
}

} // namespace

// ---- parameter store -------------------------------------------------------

int ParamStore::alloc(int count)
{
    int off = (int)value_.size();
    value_.resize(value_.size() + (std::size_t)count, 0.0f);
    grad_.resize(value_.size(), 0.0f);
    adam_m_.resize(value_.size(), 0.0f);
    adam_v_.resize(value_.size(), 0.0f);
    return off;
}

void ParamStore::set_values(std::vector<float> v)
{
    if (v.size() != value_.size())
        throw std::invalid_argument("ParamStore: parameter blob size mismatch");
    value_ = std::move(v);
}

void ParamStore::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0f); }

void ParamStore::adam_step(float lr, float beta1, float beta2, float eps)
{
    ++steps_;
    float c1 = 1.0f - std::pow(beta1, (float)steps_);
    float c2 = 1.0f - std::pow(beta2, (float)steps_);
    for (std::size_t i = 0; i < value_.size(); ++i) {
        float g = grad_[i];
        adam_m_[i] = beta1 * adam_m_[i] + (1.0f - beta1) * g;
        adam_v_[i] = beta2 * adam_v_[i] + (1.0f - beta2) * g * g;
        value_[i] -= lr * (adam_m_[i] / c1) / (std::sqrt(adam_v_[i] / c2) + eps);
    }
}

// ---- network ---------------------------------------------------------------

DenoiserNet::DenoiserNet(NetSpec spec, Rng& rng) : spec_(spec) { build(&rng); }

DenoiserNet::DenoiserNet(NetSpec spec, std::vector<float> params) : spec_(spec)
{
    build(nullptr);
    store_.set_values(std::move(params));
}

void DenoiserNet::build(Rng* rng)
{
    if (spec_.base_channels < 2)
        throw std::invalid_argument("NetSpec: base_channels must be >= 2");
    if (spec_.time_dim < 4 || spec_.time_dim % 2)
        throw std::invalid_argument("NetSpec: time_dim must be even and >= 4");

    auto conv = [&](int cin, int cout, int stride, bool zero_init) {
        ConvP p;
        p.cin = cin;
        p.cout = cout;
        p.stride = stride;
        p.w = store_.alloc(cout * cin * 9);
        p.b = store_.alloc(cout);
        if (rng && !zero_init) {
            float std = std::sqrt(2.0f / (float)(cin * 9));
            float* w = store_.value(p.w);
            for (int i = 0; i < cout * cin * 9; ++i)
                w[i] = (float)rng->normal() * std;
        }
        return p;
    };
    auto norm = [&](int ch) {
        NormP p;
        p.ch = ch;
        p.groups = norm_groups(ch);
        p.scale = store_.alloc(ch);
        p.shift = store_.alloc(ch);
        std::fill(store_.value(p.scale), store_.value(p.scale) + ch, 1.0f);
        return p;
    };
    auto lin = [&](int in, int out) {
        LinP p;
        p.in = in;
        p.out = out;
        p.w = store_.alloc(out * in);
        p.b = store_.alloc(out);
        if (rng) {
            float std = std::sqrt(1.0f / (float)in);
            float* w = store_.value(p.w);
            for (int i = 0; i < out * in; ++i)
                w[i] = (float)rng->normal() * std;
        }
        return p;
    };
    auto resblock = [&](int ch) {
        ResBlockP p;
        p.n1 = norm(ch);
        p.c1 = conv(ch, ch, 1, false);
        p.emb = lin(spec_.time_dim, ch);
        p.n2 = norm(ch);
        p.c2 = conv(ch, ch, 1, true); // zero-init: block starts as identity
        return p;
    };

    int C = spec_.base_channels;
    conv_in_ = conv(1, C, 1, false);
    rb_[0] = resblock(C);
    down1_ = conv(C, 2 * C, 2, false);
    rb_[1] = resblock(2 * C);
    down2_ = conv(2 * C, 4 * C, 2, false);
    rb_[2] = resblock(4 * C);
    rb_[3] = resblock(4 * C);
    up1_ = conv(4 * C, 2 * C, 1, false);
    rb_[4] = resblock(2 * C);
    up2_ = conv(2 * C, C, 1, false);
    rb_[5] = resblock(C);
    n_out_ = norm(C);
    conv_out_ = conv(C, 1, 1, true); // zero-init: fresh net predicts zero
    mlp1_ = lin(spec_.time_dim, spec_.time_dim);
    mlp2_ = lin(spec_.time_dim, spec_.time_dim);
}

Batch DenoiserNet::forward(const Batch& x, const std::vector<int>& t, Trace& tr) const
{
    if (x.ch != 1)
        throw std::invalid_argument("DenoiserNet: input must have one channel");
    if ((int)t.size() != x.n)
        throw std::invalid_argument("DenoiserNet: one step index per sample required");
    if (x.rows < 8 || x.cols < 8)
        throw std::invalid_argument("DenoiserNet: grid must be at least 8x8");

    tr.e0 = time_embedding(t, spec_.time_dim);
    tr.e1_pre = lin_forward(mlp1_, store_, tr.e0);
    tr.e2 = msilu(tr.e1_pre);
    tr.e3 = lin_forward(mlp2_, store_, tr.e2);

    Batch h0 = conv_forward(conv_in_, store_, x, tr.conv_in);
    Batch h1 = resblock_forward(rb_[0], store_, h0, tr.e3, tr.rb[0]);
    Batch h2 = conv_forward(down1_, store_, h1, tr.down1);
    Batch h3 = resblock_forward(rb_[1], store_, h2, tr.e3, tr.rb[1]);
    Batch h4 = conv_forward(down2_, store_, h3, tr.down2);
    Batch h5 = resblock_forward(rb_[2], store_, h4, tr.e3, tr.rb[2]);
    Batch h6 = resblock_forward(rb_[3], store_, h5, tr.e3, tr.rb[3]);

    Batch u1 = upsample_to(h6, h3.rows, h3.cols, tr.up1_shape);
    u1 = conv_forward(up1_, store_, u1, tr.up1);
    u1.m += h3.m;
    Batch h7 = resblock_forward(rb_[4], store_, u1, tr.e3, tr.rb[4]);

    Batch u2 = upsample_to(h7, h1.rows, h1.cols, tr.up2_shape);
    u2 = conv_forward(up2_, store_, u2, tr.up2);
    u2.m += h1.m;
    Batch h8 = resblock_forward(rb_[5], store_, u2, tr.e3, tr.rb[5]);

    Batch y = norm_forward(n_out_, store_, h8, tr.n_out);
    y = silu_forward(y, tr.a_out);
    return conv_forward(conv_out_, store_, y, tr.conv_out);
}

void DenoiserNet::backward(const Trace& tr, const Batch& dy)
{
    Matrix de = Matrix::Zero(spec_.time_dim, dy.n);

    Batch d = conv_backward(conv_out_, store_, tr.conv_out, dy, true);
    d = silu_backward(tr.a_out, d);
    d = norm_backward(n_out_, store_, tr.n_out, d);
    d = resblock_backward(rb_[5], store_, tr.rb[5], tr.e3, d, de);

    Batch dh1_skip = d; // u2 = conv(up2, .) + h1
    Batch dup2 = conv_backward(up2_, store_, tr.up2, d, true);
    d = upsample_grad(tr.up2_shape, dup2);
    d = resblock_backward(rb_[4], store_, tr.rb[4], tr.e3, d, de);

    Batch dh3_skip = d; // u1 = conv(up1, .) + h3
    Batch dup1 = conv_backward(up1_, store_, tr.up1, d, true);
    d = upsample_grad(tr.up1_shape, dup1);
    d = resblock_backward(rb_[3], store_, tr.rb[3], tr.e3, d, de);
    d = resblock_backward(rb_[2], store_, tr.rb[2], tr.e3, d, de);

    d = conv_backward(down2_, store_, tr.down2, d, true);
    d.m += dh3_skip.m;
    d = resblock_backward(rb_[1], store_, tr.rb[1], tr.e3, d, de);

    d = conv_backward(down1_, store_, tr.down1, d, true);
    d.m += dh1_skip.m;
    d = resblock_backward(rb_[0], store_, tr.rb[0], tr.e3, d, de);
    (void)conv_backward(conv_in_, store_, tr.conv_in, d, false);

    Matrix de2 = lin_backward(mlp2_, store_, tr.e2, de);
    Matrix de1 = msilu_grad(tr.e1_pre, de2);
    (void)lin_backward(mlp1_, store_, tr.e0, de1);
}

} // namespace gsc::net
