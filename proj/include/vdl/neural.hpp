#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vdl/core.hpp"

namespace vdl::neural {

constexpr std::size_t kLatentDim = 24;  // M
constexpr std::size_t kImageSide = 16;
constexpr std::size_t kImagePixels = kImageSide * kImageSide;  // N

/// Normalized activation image: scaled to [0,1] and flipped so contraction
/// troughs carry the largest values.
struct ThetaImage {
    Matrix grid;
    std::string provenance;
};

ThetaImage normalize_theta(const Matrix& theta, const std::string& provenance = "");

double kld_closed_form(const Vec& mu, const Vec& log_var);
Vec reparameterize(const Vec& mu, const Vec& log_var, const Vec& eps);

/// Parameter array with its gradient and the two optimizer moment buffers.
template <typename T>
struct ParamBlock {
    std::vector<T> value, grad, m1, m2;
    explicit ParamBlock(std::size_t n = 0) : value(n), grad(n), m1(n), m2(n) {}
    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
struct Dense {
    std::size_t in = 0, out = 0;
    ParamBlock<T> w, b;  // w is out x in, row-major

    Dense() = default;
    Dense(std::size_t in_dim, std::size_t out_dim, double init_std, Rng& rng)
        : in(in_dim), out(out_dim), w(in_dim * out_dim), b(out_dim) {
        for (T& v : w.value) v = static_cast<T>(init_std * rng.normal());
    }

    std::vector<T> forward(const std::vector<T>& x) const {
        std::vector<T> y(out);
        for (std::size_t o = 0; o < out; ++o) {
            T acc = b.value[o];
            const T* row = &w.value[o * in];
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
        return y;
    }

    /// Accumulates parameter gradients and returns the input gradient.
    std::vector<T> backward(const std::vector<T>& x, const std::vector<T>& dy) {
        std::vector<T> dx(in, T(0));
        for (std::size_t o = 0; o < out; ++o) {
            T g = dy[o];
            b.grad[o] += g;
            T* wrow = &w.grad[o * in];
            const T* vrow = &w.value[o * in];
            for (std::size_t i = 0; i < in; ++i) {
                wrow[i] += g * x[i];
                dx[i] += vrow[i] * g;
            }
        }
        return dx;
    }
};

/// 3x3 convolution with unit zero-padding; stride 1 or 2. Feature maps are
/// flat (channel, row, col) row-major arrays.
template <typename T>
struct Conv2d {
    std::size_t in_ch = 0, out_ch = 0, stride = 1;
    ParamBlock<T> w, b;  // w is out_ch x in_ch x 3 x 3

    Conv2d() = default;
    Conv2d(std::size_t in_c, std::size_t out_c, std::size_t stride_, double init_std, Rng& rng)
        : in_ch(in_c), out_ch(out_c), stride(stride_), w(in_c * out_c * 9), b(out_c) {
        for (T& v : w.value) v = static_cast<T>(init_std * rng.normal());
    }

    static std::size_t out_side(std::size_t side, std::size_t stride) {
        return (side - 1) / stride + 1;
    }

    std::vector<T> forward(const std::vector<T>& x, std::size_t side) const {
        std::size_t os = out_side(side, stride);
        std::vector<T> y(out_ch * os * os);
        for (std::size_t oc = 0; oc < out_ch; ++oc)
            for (std::size_t oy = 0; oy < os; ++oy)
                for (std::size_t ox = 0; ox < os; ++ox) {
                    T acc = b.value[oc];
                    for (std::size_t ic = 0; ic < in_ch; ++ic) {
                        const T* wk = &w.value[(oc * in_ch + ic) * 9];
                        for (std::size_t ky = 0; ky < 3; ++ky) {
                            long iy = static_cast<long>(oy * stride + ky) - 1;
                            if (iy < 0 || iy >= static_cast<long>(side)) continue;
                            for (std::size_t kx = 0; kx < 3; ++kx) {
                                long ix = static_cast<long>(ox * stride + kx) - 1;
                                if (ix < 0 || ix >= static_cast<long>(side)) continue;
                                acc += wk[ky * 3 + kx] * x[(ic * side + iy) * side + ix];
                            }
                        }
                    }
                    y[(oc * os + oy) * os + ox] = acc;
                }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& x, std::size_t side,
                            const std::vector<T>& dy) {
        std::size_t os = out_side(side, stride);
        std::vector<T> dx(in_ch * side * side, T(0));
        for (std::size_t oc = 0; oc < out_ch; ++oc)
            for (std::size_t oy = 0; oy < os; ++oy)
                for (std::size_t ox = 0; ox < os; ++ox) {
                    T g = dy[(oc * os + oy) * os + ox];
                    b.grad[oc] += g;
                    for (std::size_t ic = 0; ic < in_ch; ++ic) {
                        T* wg = &w.grad[(oc * in_ch + ic) * 9];
                        const T* wv = &w.value[(oc * in_ch + ic) * 9];
                        for (std::size_t ky = 0; ky < 3; ++ky) {
                            long iy = static_cast<long>(oy * stride + ky) - 1;
                            if (iy < 0 || iy >= static_cast<long>(side)) continue;
                            for (std::size_t kx = 0; kx < 3; ++kx) {
                                long ix = static_cast<long>(ox * stride + kx) - 1;
                                if (ix < 0 || ix >= static_cast<long>(side)) continue;
                                std::size_t xi = (ic * side + iy) * side + ix;
                                wg[ky * 3 + kx] += g * x[xi];
                                dx[xi] += wv[ky * 3 + kx] * g;
                            }
                        }
                    }
                }
        return dx;
    }
};

template <typename T>
std::vector<T> relu(const std::vector<T>& x) {
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

template <typename T>
std::vector<T> relu_backward(const std::vector<T>& pre, const std::vector<T>& dy) {
    std::vector<T> dx(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) dx[i] = pre[i] > T(0) ? dy[i] : T(0);
    return dx;
}

template <typename T>
std::vector<T> sigmoid(const std::vector<T>& x) {
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
    return y;
}

template <typename T>
std::vector<T> upsample2x(const std::vector<T>& x, std::size_t ch, std::size_t side) {
    std::size_t os = side * 2;
    std::vector<T> y(ch * os * os);
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t r = 0; r < os; ++r)
            for (std::size_t q = 0; q < os; ++q)
                y[(c * os + r) * os + q] = x[(c * side + r / 2) * side + q / 2];
    return y;
}

template <typename T>
std::vector<T> upsample2x_backward(const std::vector<T>& dy, std::size_t ch,
                                   std::size_t side) {
    std::size_t os = side * 2;
    std::vector<T> dx(ch * side * side, T(0));
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t r = 0; r < os; ++r)
            for (std::size_t q = 0; q < os; ++q)
                dx[(c * side + r / 2) * side + q / 2] += dy[(c * os + r) * os + q];
    return dx;
}

/// Network 1: convolutional encoder to a 24-d Gaussian code, mirrored
/// upsampling decoder squashed to [0,1].
template <typename T>
struct VaeModel {
    Conv2d<T> enc1, enc2;
    Dense<T> mu_head, logvar_head, dec_in;
    Conv2d<T> dec1, dec2;

    static VaeModel random(std::uint64_t seed) {
        Rng rng(seed);
        VaeModel m;
        m.enc1 = Conv2d<T>(1, 8, 2, std::sqrt(2.0 / 9.0), rng);
        m.enc2 = Conv2d<T>(8, 16, 2, std::sqrt(2.0 / 72.0), rng);
        m.mu_head = Dense<T>(256, kLatentDim, std::sqrt(1.0 / 256.0), rng);
        m.logvar_head = Dense<T>(256, kLatentDim, 0.1 * std::sqrt(1.0 / 256.0), rng);
        m.dec_in = Dense<T>(kLatentDim, 256, std::sqrt(2.0 / kLatentDim), rng);
        m.dec1 = Conv2d<T>(16, 8, 1, std::sqrt(2.0 / 144.0), rng);
        m.dec2 = Conv2d<T>(8, 1, 1, std::sqrt(1.0 / 72.0), rng);
        return m;
    }

    std::vector<ParamBlock<T>*> blocks() {
        return {&enc1.w, &enc1.b, &enc2.w, &enc2.b, &mu_head.w, &mu_head.b,
                &logvar_head.w, &logvar_head.b, &dec_in.w, &dec_in.b,
                &dec1.w, &dec1.b, &dec2.w, &dec2.b};
    }
};

/// Per-sample activations kept for the backward pass.
template <typename T>
struct VaeTrace {
    std::vector<T> a1, r1, a2, r2;  // encoder pre/post activations
    std::vector<T> mu, logvar, z;
    std::vector<T> d0, rd0, u1, a3, r3, u2, a4, recon;
};

template <typename T>
void vae_forward(const VaeModel<T>& model, const std::vector<T>& x,
                 const std::vector<T>& eps, VaeTrace<T>& t) {
    t.a1 = model.enc1.forward(x, 16);
    t.r1 = relu(t.a1);
    t.a2 = model.enc2.forward(t.r1, 8);
    t.r2 = relu(t.a2);
    t.mu = model.mu_head.forward(t.r2);
    t.logvar = model.logvar_head.forward(t.r2);
    t.z.resize(kLatentDim);
    for (std::size_t i = 0; i < kLatentDim; ++i)
        t.z[i] = t.mu[i] + eps[i] * std::exp(T(0.5) * t.logvar[i]);

    t.d0 = model.dec_in.forward(t.z);
    t.rd0 = relu(t.d0);
    t.u1 = upsample2x(t.rd0, 16, 4);
    t.a3 = model.dec1.forward(t.u1, 8);
    t.r3 = relu(t.a3);
    t.u2 = upsample2x(t.r3, 8, 8);
    t.a4 = model.dec2.forward(t.u2, 16);
    t.recon = sigmoid(t.a4);
}

/// Decode a latent vector without touching the encoder.
template <typename T>
std::vector<T> vae_decode(const VaeModel<T>& model, const std::vector<T>& z) {
    std::vector<T> d0 = relu(model.dec_in.forward(z));
    std::vector<T> u1 = upsample2x(d0, 16, 4);
    std::vector<T> r3 = relu(model.dec1.forward(u1, 8));
    std::vector<T> u2 = upsample2x(r3, 8, 8);
    return sigmoid(model.dec2.forward(u2, 16));
}

struct LossParts {
    double total = 0.0, kld = 0.0, recon_mse = 0.0;
};

/// Eq-style objective: KLD averaged by 1/(2M) plus (beta/N) summed squared
/// reconstruction error.
template <typename T>
LossParts vae_loss(const std::vector<T>& recon, const std::vector<T>& x,
                   const std::vector<T>& mu, const std::vector<T>& log_var, double beta) {
    LossParts parts;
    double kl_sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double m = mu[i], lv = log_var[i];
        kl_sum += m * m + std::exp(lv) - 1.0 - lv;
    }
    double se = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = static_cast<double>(x[i]) - static_cast<double>(recon[i]);
        se += d * d;
    }
    parts.kld = 0.5 * kl_sum;
    parts.recon_mse = se / static_cast<double>(x.size());
    parts.total = kl_sum / (2.0 * static_cast<double>(mu.size())) +
                  beta * se / static_cast<double>(x.size());
    return parts;
}

double loss_n1(const Matrix& recon, const Matrix& input, const Vec& mu, const Vec& log_var,
               double beta);

/// Accumulates gradients of the per-sample objective into the model blocks.
template <typename T>
void vae_backward(VaeModel<T>& model, const VaeTrace<T>& t, const std::vector<T>& x,
                  const std::vector<T>& eps, double beta) {
    std::size_t n = x.size();
    std::size_t m = t.mu.size();

    std::vector<T> da4(n);
    for (std::size_t i = 0; i < n; ++i) {
        T dy = static_cast<T>(2.0 * beta / static_cast<double>(n)) * (t.recon[i] - x[i]);
        da4[i] = dy * t.recon[i] * (T(1) - t.recon[i]);
    }
    std::vector<T> du2 = model.dec2.backward(t.u2, 16, da4);
    std::vector<T> dr3 = upsample2x_backward(du2, 8, 8);
    std::vector<T> da3 = relu_backward(t.a3, dr3);
    std::vector<T> du1 = model.dec1.backward(t.u1, 8, da3);
    std::vector<T> drd0 = upsample2x_backward(du1, 16, 4);
    std::vector<T> dd0 = relu_backward(t.d0, drd0);
    std::vector<T> dz = model.dec_in.backward(t.z, dd0);

    std::vector<T> dmu(m), dlv(m);
    for (std::size_t i = 0; i < m; ++i) {
        T sigma = std::exp(T(0.5) * t.logvar[i]);
        dmu[i] = dz[i] + static_cast<T>(t.mu[i] / static_cast<double>(m));
        dlv[i] = dz[i] * eps[i] * sigma * T(0.5) +
                 static_cast<T>((std::exp(static_cast<double>(t.logvar[i])) - 1.0) /
                                (2.0 * static_cast<double>(m)));
    }
    std::vector<T> dr2 = model.mu_head.backward(t.r2, dmu);
    std::vector<T> dr2b = model.logvar_head.backward(t.r2, dlv);
    for (std::size_t i = 0; i < dr2.size(); ++i) dr2[i] += dr2b[i];
    std::vector<T> da2 = relu_backward(t.a2, dr2);
    std::vector<T> dr1 = model.enc2.backward(t.r1, 8, da2);
    std::vector<T> da1 = relu_backward(t.a1, dr1);
    model.enc1.backward(x, 16, da1);
}

/// Network 2: 30 -> 75 -> 75 -> 75 -> 4, rectified-linear throughout.
template <typename T>
struct WorkNet {
    Dense<T> l1, l2, l3, l4;

    static WorkNet random(std::uint64_t seed) {
        Rng rng(seed);
        WorkNet n;
        n.l1 = Dense<T>(30, 75, std::sqrt(2.0 / 30.0), rng);
        n.l2 = Dense<T>(75, 75, std::sqrt(2.0 / 75.0), rng);
        n.l3 = Dense<T>(75, 75, std::sqrt(2.0 / 75.0), rng);
        n.l4 = Dense<T>(75, 4, std::sqrt(2.0 / 75.0), rng);
        // positive output bias keeps the final rectifier live at the start
        for (T& v : n.l4.b.value) v = T(0.5);
        return n;
    }

    std::vector<ParamBlock<T>*> blocks() {
        return {&l1.w, &l1.b, &l2.w, &l2.b, &l3.w, &l3.b, &l4.w, &l4.b};
    }
};

template <typename T>
struct WorkTrace {
    std::vector<T> a1, r1, a2, r2, a3, r3, a4, out;
};

template <typename T>
void worknet_forward(const WorkNet<T>& net, const std::vector<T>& x, WorkTrace<T>& t) {
    t.a1 = net.l1.forward(x);
    t.r1 = relu(t.a1);
    t.a2 = net.l2.forward(t.r1);
    t.r2 = relu(t.a2);
    t.a3 = net.l3.forward(t.r2);
    t.r3 = relu(t.a3);
    t.a4 = net.l4.forward(t.r3);
    t.out = relu(t.a4);
}

/// Mean-squared-error gradient over the 4 outputs.
template <typename T>
void worknet_backward(WorkNet<T>& net, const WorkTrace<T>& t, const std::vector<T>& x,
                      const std::vector<T>& target) {
    std::vector<T> dout(t.out.size());
    for (std::size_t i = 0; i < t.out.size(); ++i)
        dout[i] = static_cast<T>(2.0 / static_cast<double>(t.out.size())) *
                  (t.out[i] - target[i]);
    std::vector<T> da4 = relu_backward(t.a4, dout);
    std::vector<T> dr3 = net.l4.backward(t.r3, da4);
    std::vector<T> da3 = relu_backward(t.a3, dr3);
    std::vector<T> dr2 = net.l3.backward(t.r2, da3);
    std::vector<T> da2 = relu_backward(t.a2, dr2);
    std::vector<T> dr1 = net.l2.backward(t.r1, da2);
    std::vector<T> da1 = relu_backward(t.a1, dr1);
    net.l1.backward(x, da1);
}

struct TrainConfig {
    double beta = 1000.0;
    std::size_t epochs = 250;
    double lr_stage1 = 1.0e-4, lr_stage2 = 3.3e-5, lr_stage3 = 5.0e-6;
    double stage1_frac = 0.4, stage2_frac = 0.4;  // remainder runs at stage 3
    double rms_lr = 1.0e-3;
    std::size_t batch = 32;
    double val_fraction = 0.25;  // network-2 reporting split
    std::uint64_t seed = 0;
};

struct EpochStats {
    double recon_mse = 0.0, kld = 0.0, total = 0.0, val_mse = 0.0;
};

VaeModel<float> train_network1(const std::vector<ThetaImage>& dataset,
                               const TrainConfig& config, std::vector<EpochStats>& curve);

WorkNet<float> train_network2(const Matrix& inputs, const Matrix& targets,
                              const TrainConfig& config, std::vector<EpochStats>& curve);

/// Persisted min/max per feature; inference without them is an error.
struct NormStats {
    Vec lo, hi;
    Vec normalize(const Vec& v) const;
    Vec denormalize(const Vec& v) const;
};
NormStats fit_stats(const Matrix& rows);

Vec encode_mu(const VaeModel<float>& model, const ThetaImage& image);
Matrix decode_latent(const VaeModel<float>& model, const Vec& z);
Vec predict_work(const WorkNet<float>& net, const Vec& vdl_vector);

void write_curve_csv(const std::string& path, const std::vector<EpochStats>& curve);

/// Little-endian checkpoint (magic, version, architecture JSON, float32
/// parameters) plus a JSON sidecar with seed, config and normalization stats.
void save_vae(const std::string& path, VaeModel<float>& model, const TrainConfig& config);
VaeModel<float> load_vae(const std::string& path);
void save_worknet(const std::string& path, WorkNet<float>& net, const NormStats& in_stats,
                  const NormStats& out_stats, const TrainConfig& config);
struct WorkNetArtifact {
    WorkNet<float> net;
    NormStats in_stats, out_stats;
};
WorkNetArtifact load_worknet(const std::string& path);

/// Finite-difference verification on a randomized double-precision model;
/// returns the worst relative error over sampled parameters of every block.
double gradcheck_vae(std::uint64_t seed);
double gradcheck_worknet(std::uint64_t seed);

}  // namespace vdl::neural
