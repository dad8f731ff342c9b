#pragma once

// Layer functions parameterized by explicit weight tensors: linear,
// layer norm, sinusoidal positions, multi-head attention, feed-forward,
// convolutional subsampling, dropout and the label-smoothed loss.

#include <cstdint>
#include <map>
#include <optional>
#include <random>

#include "bass/tensor.hpp"

namespace bass {

template <typename Real>
using ParamMap = std::map<std::string, Tensor<Real>>;

struct AttentionConfig {
    int model_dim = 64;
    int heads = 4;
    double dropout_rate = 0.0;

    void validate() const {
        if (model_dim <= 0 || heads <= 0) throw std::invalid_argument("attention: non-positive dims");
        if (model_dim % heads != 0) throw std::invalid_argument("attention: model_dim must be divisible by heads");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw std::invalid_argument("attention: dropout_rate outside [0,1)");
    }
};

// Key mask for attention: mask[q * n_keys + k] nonzero means key k is
// visible to query q. Empty mask = everything visible.
using AttentionMask = std::vector<std::uint8_t>;

template <typename Real>
inline Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b) {
    return add_rowwise(matmul(x, w), b);
}

template <typename Real>
inline Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                               Real eps = Real(1e-5)) {
    if (x.rank() != 2) throw std::invalid_argument("layer_norm: expects 2-D input");
    const int n = x.dim(0), d = x.dim(1);
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
        throw std::invalid_argument("layer_norm: gamma/beta must have shape [d]");
    Tensor<Real> out = Tensor<Real>::zeros(x.shape(), grad_needed(x) || grad_needed(gamma) || grad_needed(beta));
    std::vector<Real> xhat(static_cast<std::size_t>(n) * d);
    std::vector<Real> inv_sigma(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Real mean = 0;
        for (int j = 0; j < d; ++j) mean += x.at(static_cast<std::size_t>(i) * d + j);
        mean /= Real(d);
        Real var = 0;
        for (int j = 0; j < d; ++j) {
            const Real c = x.at(static_cast<std::size_t>(i) * d + j) - mean;
            var += c * c;
        }
        var /= Real(d);
        const Real is = Real(1) / std::sqrt(var + eps);
        inv_sigma[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < d; ++j) {
            const Real h = (x.at(static_cast<std::size_t>(i) * d + j) - mean) * is;
            xhat[static_cast<std::size_t>(i) * d + j] = h;
            out.values()[static_cast<std::size_t>(i) * d + j] = gamma.at(j) * h + beta.at(j);
        }
    }
    if (out.requires_grad()) {
        auto xd = x.data(), gd = gamma.data(), bd = beta.data(), od = out.data();
        autograd::record<Real>([xd, gd, bd, od, xhat, inv_sigma, n, d]() {
            for (int i = 0; i < n; ++i) {
                Real gmean = 0, gxmean = 0;
                std::vector<Real> g(static_cast<std::size_t>(d));
                for (int j = 0; j < d; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * d + j;
                    g[static_cast<std::size_t>(j)] = od->grad[k] * gd->values[static_cast<std::size_t>(j)];
                    gmean += g[static_cast<std::size_t>(j)];
                    gxmean += g[static_cast<std::size_t>(j)] * xhat[k];
                    if (gd->requires_grad) gd->grad[static_cast<std::size_t>(j)] += od->grad[k] * xhat[k];
                    if (bd->requires_grad) bd->grad[static_cast<std::size_t>(j)] += od->grad[k];
                }
                gmean /= Real(d);
                gxmean /= Real(d);
                if (xd->requires_grad) {
                    for (int j = 0; j < d; ++j) {
                        const std::size_t k = static_cast<std::size_t>(i) * d + j;
                        xd->grad[k] += inv_sigma[static_cast<std::size_t>(i)] *
                                       (g[static_cast<std::size_t>(j)] - gmean - xhat[k] * gxmean);
                    }
                }
            }
        });
    }
    return out;
}

template <typename Real>
inline Tensor<Real> sinusoidal_positions(int length, int dim) {
    if (length < 1) throw std::invalid_argument("sinusoidal_positions: length must be >= 1");
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("sinusoidal_positions: dim must be even and >= 2");
    Tensor<Real> pe = Tensor<Real>::zeros({length, dim});
    for (int p = 0; p < length; ++p)
        for (int i = 0; i < dim / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * i / dim);
            pe.values()[static_cast<std::size_t>(p) * dim + 2 * i] = Real(std::sin(p * freq));
            pe.values()[static_cast<std::size_t>(p) * dim + 2 * i + 1] = Real(std::cos(p * freq));
        }
    return pe;
}

namespace detail {

template <typename Real>
inline Tensor<Real> masked_scores(const Tensor<Real>& scores, const AttentionMask& mask) {
    if (mask.empty()) return scores;
    const int m = scores.dim(0), n = scores.dim(1);
    if (mask.size() != static_cast<std::size_t>(m) * n)
        throw std::invalid_argument("attention: mask size does not match [queries,keys]");
    Tensor<Real> bias = Tensor<Real>::zeros(scores.shape());
    for (int q = 0; q < m; ++q) {
        bool any = false;
        for (int k = 0; k < n; ++k) {
            if (mask[static_cast<std::size_t>(q) * n + k]) {
                any = true;
            } else {
                bias.values()[static_cast<std::size_t>(q) * n + k] = Real(-1e30);
            }
        }
        if (!any) throw std::invalid_argument("attention: query " + std::to_string(q) + " has no visible keys");
    }
    return add(scores, bias);
}

}  // namespace detail

// Scaled dot-product attention for one head (or ungrouped use); softmax over
// keys, forbidden keys get exactly zero weight.
template <typename Real>
inline Tensor<Real> scaled_dot_attention(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                                         const AttentionMask& mask = {}) {
    const Real inv_sqrt = Real(1) / std::sqrt(Real(q.dim(1)));
    auto scores = scale(matmul(q, transpose(k)), inv_sqrt);
    auto weights = softmax(detail::masked_scores(scores, mask), 1);
    return matmul(weights, v);
}

// Multi-head attention with learned projections. Params: W_q, W_k, W_v,
// W_o [d,d] and b_q, b_k, b_v, b_o [d], looked up under `prefix`.
template <typename Real>
inline Tensor<Real> multi_head_attention(const Tensor<Real>& queries, const Tensor<Real>& keys,
                                         const Tensor<Real>& values_in, const ParamMap<Real>& params,
                                         const std::string& prefix, const AttentionConfig& cfg,
                                         const AttentionMask& mask = {}) {
    cfg.validate();
    if (queries.dim(1) != cfg.model_dim)
        throw std::invalid_argument("attention: query dim " + std::to_string(queries.dim(1)) +
                                    " != model_dim " + std::to_string(cfg.model_dim));
    const auto& wq = params.at(prefix + ".W_q");
    const auto& wk = params.at(prefix + ".W_k");
    const auto& wv = params.at(prefix + ".W_v");
    const auto& wo = params.at(prefix + ".W_o");
    auto q = linear(queries, wq, params.at(prefix + ".b_q"));
    auto k = linear(keys, wk, params.at(prefix + ".b_k"));
    auto v = linear(values_in, wv, params.at(prefix + ".b_v"));
    const int dh = cfg.model_dim / cfg.heads;
    std::vector<Tensor<Real>> head_out;
    head_out.reserve(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        auto qh = slice(q, 1, h * dh, (h + 1) * dh);
        auto kh = slice(k, 1, h * dh, (h + 1) * dh);
        auto vh = slice(v, 1, h * dh, (h + 1) * dh);
        head_out.push_back(scaled_dot_attention(qh, kh, vh, mask));
    }
    return linear(concat(head_out, 1), wo, params.at(prefix + ".b_o"));
}

// Position-wise feed-forward: linear -> relu -> linear.
// Params under `prefix`: W_1 [d,ff], b_1 [ff], W_2 [ff,d], b_2 [d].
template <typename Real>
inline Tensor<Real> feed_forward(const Tensor<Real>& x, const ParamMap<Real>& params, const std::string& prefix) {
    auto h = relu(linear(x, params.at(prefix + ".W_1"), params.at(prefix + ".b_1")));
    return linear(h, params.at(prefix + ".W_2"), params.at(prefix + ".b_2"));
}

inline constexpr int kSubsampleKernel = 3;
inline constexpr int kSubsampleStride = 2;
// Two stride-2 kernel-3 stages: smallest N with a valid output.
inline constexpr int kSubsampleMinFrames = 7;

inline int subsampled_length(int n_frames) {
    const int l1 = (n_frames - kSubsampleKernel) / kSubsampleStride + 1;
    return (l1 - kSubsampleKernel) / kSubsampleStride + 1;
}

// Convolutional subsampler (factor ~4): two stride-2 1-D convs over time
// with relu, then a linear map to model_dim. Params under `prefix`:
// conv1_W [3*D, C], conv1_b [C], conv2_W [3*C, C], conv2_b [C],
// proj_W [C, model_dim], proj_b [model_dim].
template <typename Real>
inline Tensor<Real> conv_subsample(const Tensor<Real>& x, const ParamMap<Real>& params,
                                   const std::string& prefix) {
    if (x.rank() != 2) throw std::invalid_argument("conv_subsample: expects [N,D] input");
    if (x.dim(0) < kSubsampleMinFrames)
        throw std::invalid_argument("conv_subsample: input has " + std::to_string(x.dim(0)) +
                                    " frames, minimum is " + std::to_string(kSubsampleMinFrames));
    auto h1 = relu(linear(gather_time_windows(x, kSubsampleKernel, kSubsampleStride),
                          params.at(prefix + ".conv1_W"), params.at(prefix + ".conv1_b")));
    auto h2 = relu(linear(gather_time_windows(h1, kSubsampleKernel, kSubsampleStride),
                          params.at(prefix + ".conv2_W"), params.at(prefix + ".conv2_b")));
    return linear(h2, params.at(prefix + ".proj_W"), params.at(prefix + ".proj_b"));
}

// Inverted dropout: zero with probability `rate`, survivors scaled by
// 1/(1-rate). Identity when not training or rate == 0.
template <typename Real>
inline Tensor<Real> dropout(const Tensor<Real>& x, double rate, bool training, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate outside [0,1)");
    if (!training || rate == 0.0) return x;
    Tensor<Real> mask = Tensor<Real>::zeros(x.shape());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Real keep_scale = Real(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < mask.numel(); ++i)
        mask.values()[i] = (u(rng) < rate) ? Real(0) : keep_scale;
    return mul(x, mask);
}

// Mean over non-pad positions of KL(smoothed one-hot || softmax(logits)).
// The gold class keeps 1-epsilon; every other non-PAD class gets
// epsilon/(V-1); the PAD column carries no target mass.
template <typename Real>
inline Tensor<Real> label_smoothed_cross_entropy(const Tensor<Real>& logits, const std::vector<int>& targets,
                                                 Real epsilon, int pad_id) {
    if (logits.rank() != 2) throw std::invalid_argument("label_smoothed_cross_entropy: logits must be [L,V]");
    const int l = logits.dim(0), v = logits.dim(1);
    if (static_cast<int>(targets.size()) != l)
        throw std::invalid_argument("label_smoothed_cross_entropy: targets length != logit rows");
    if (epsilon < Real(0) || epsilon >= Real(1))
        throw std::invalid_argument("label_smoothed_cross_entropy: epsilon outside [0,1)");
    int n_nonpad = 0;
    for (int t : targets) {
        if (t != pad_id && (t < 0 || t >= v))
            throw std::out_of_range("label_smoothed_cross_entropy: target " + std::to_string(t) +
                                    " outside vocabulary");
        if (t != pad_id) ++n_nonpad;
    }
    if (n_nonpad == 0) throw std::invalid_argument("label_smoothed_cross_entropy: all targets are PAD");

    const Real off = epsilon / Real(v - 1);
    Tensor<Real> weights = Tensor<Real>::zeros({l, v});
    Real target_log_mass = 0;  // sum w*log w, the constant KL term
    for (int i = 0; i < l; ++i) {
        const int gold = targets[static_cast<std::size_t>(i)];
        if (gold == pad_id) continue;
        for (int c = 0; c < v; ++c) {
            Real w;
            if (c == gold) {
                w = Real(1) - epsilon;
            } else if (c == pad_id) {
                w = Real(0);
            } else {
                w = off;
            }
            weights.values()[static_cast<std::size_t>(i) * v + c] = w;
            if (w > Real(0)) target_log_mass += w * std::log(w);
        }
    }
    auto logp = log_softmax(logits, 1);
    auto cross = scale(sum_all(mul(logp, weights)), Real(-1) / Real(n_nonpad));
    return add(cross, Tensor<Real>::scalar(target_log_mass / Real(n_nonpad)));
}

}  // namespace bass
