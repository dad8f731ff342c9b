#pragma once

// The block-wise summarizer: encoder P(S|X), updater P(S^i|S^{1:i-1},X^i)
// and decoder P(Y|S). Inputs arrive as abutting blocks; detached semantic
// context is carried across block boundaries, bounded by a Markov window.

#include <deque>
#include <functional>

#include "bass/layers.hpp"

namespace bass {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumReservedIds = 4;

enum class UpdaterKind { concat, gated, hierarchical };

inline std::string updater_kind_name(UpdaterKind k) {
    switch (k) {
        case UpdaterKind::concat: return "concat";
        case UpdaterKind::gated: return "gated";
        case UpdaterKind::hierarchical: return "hierarchical";
    }
    throw std::logic_error("unknown updater kind");
}

inline UpdaterKind updater_kind_from_name(const std::string& name) {
    if (name == "concat") return UpdaterKind::concat;
    if (name == "gated") return UpdaterKind::gated;
    if (name == "hierarchical") return UpdaterKind::hierarchical;
    throw std::invalid_argument("unknown updater kind '" + name + "'");
}

struct ModelConfig {
    int feature_dim = 16;
    int model_dim = 64;
    int heads = 4;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int ff_dim = 128;
    int vocab_size = 68;
    double dropout_rate = 0.0;
    UpdaterKind updater_kind = UpdaterKind::concat;
    int markov_window = 1;
    int max_decode_len = 32;

    void validate() const {
        if (feature_dim < 1 || model_dim < 1 || heads < 1 || encoder_layers < 1 || decoder_layers < 1 ||
            ff_dim < 1 || markov_window < 1 || max_decode_len < 1)
            throw std::invalid_argument("model config: non-positive field");
        if (model_dim % heads != 0) throw std::invalid_argument("model config: model_dim % heads != 0");
        if (model_dim % 2 != 0) throw std::invalid_argument("model config: model_dim must be even");
        if (vocab_size <= kNumReservedIds)
            throw std::invalid_argument("model config: vocab_size must exceed the reserved ids");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw std::invalid_argument("model config: dropout_rate outside [0,1)");
    }

    AttentionConfig attention() const { return AttentionConfig{model_dim, heads, dropout_rate}; }
};

// Forward-pass mode: training enables dropout and needs an RNG.
struct RunMode {
    bool training = false;
    std::mt19937_64* rng = nullptr;
};

// Detached semantic embeddings from previous blocks, oldest first,
// at most markov_window entries. Entries carry no gradient linkage.
template <typename Real>
struct CarriedContext {
    std::deque<Tensor<Real>> entries;

    bool empty() const { return entries.empty(); }

    void push(Tensor<Real> detached_embedding, int markov_window) {
        entries.push_back(std::move(detached_embedding));
        while (static_cast<int>(entries.size()) > markov_window) entries.pop_front();
    }

    Tensor<Real> concatenated() const {
        if (entries.empty()) throw std::logic_error("carried context: empty");
        if (entries.size() == 1) return entries.front();
        return concat(std::vector<Tensor<Real>>(entries.begin(), entries.end()), 0);
    }
};

template <typename Real>
class Summarizer {
  public:
    ModelConfig config;
    ParamMap<Real> params;

    static Summarizer random_init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Summarizer m;
        m.config = cfg;
        std::mt19937_64 rng(seed);
        for (const auto& [name, shape] : parameter_shapes(cfg)) m.params.emplace(name, init_tensor(name, shape, rng));
        return m;
    }

    // Deterministic name -> shape map; parameter count is a pure function
    // of the config.
    static std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& cfg) {
        const int d = cfg.model_dim, ff = cfg.ff_dim, v = cfg.vocab_size, df = cfg.feature_dim;
        std::vector<std::pair<std::string, Shape>> out;
        auto attn = [&](const std::string& p) {
            for (const char* w : {"W_q", "W_k", "W_v", "W_o"}) out.push_back({p + "." + w, {d, d}});
            for (const char* b : {"b_q", "b_k", "b_v", "b_o"}) out.push_back({p + "." + b, {d}});
        };
        auto norm = [&](const std::string& p) {
            out.push_back({p + ".gamma", {d}});
            out.push_back({p + ".beta", {d}});
        };
        auto ffn = [&](const std::string& p) {
            out.push_back({p + ".W_1", {d, ff}});
            out.push_back({p + ".b_1", {ff}});
            out.push_back({p + ".W_2", {ff, d}});
            out.push_back({p + ".b_2", {d}});
        };
        out.push_back({"subsample.conv1_W", {kSubsampleKernel * df, d}});
        out.push_back({"subsample.conv1_b", {d}});
        out.push_back({"subsample.conv2_W", {kSubsampleKernel * d, d}});
        out.push_back({"subsample.conv2_b", {d}});
        out.push_back({"subsample.proj_W", {d, d}});
        out.push_back({"subsample.proj_b", {d}});
        for (int i = 0; i < cfg.encoder_layers; ++i) {
            const std::string p = "encoder." + std::to_string(i);
            norm(p + ".ln1");
            attn(p + ".self");
            norm(p + ".ln2");
            ffn(p + ".ff");
        }
        norm("encoder.final_ln");
        out.push_back({"embed.tok", {v, d}});
        for (int i = 0; i < cfg.decoder_layers; ++i) {
            const std::string p = "decoder." + std::to_string(i);
            norm(p + ".ln1");
            attn(p + ".self");
            norm(p + ".ln2");
            attn(p + ".cross");
            norm(p + ".ln3");
            ffn(p + ".ff");
            if (cfg.updater_kind == UpdaterKind::hierarchical) out.push_back({p + ".hier_W", {d, d}});
        }
        norm("decoder.final_ln");
        out.push_back({"out.W", {d, v}});
        out.push_back({"out.b", {v}});
        if (cfg.updater_kind == UpdaterKind::gated) {
            out.push_back({"updater.gate", {1}});
            attn("updater.attn");
        }
        return out;
    }

    // Names introduced by the updater choice; absent from truncated-baseline
    // checkpoints and freshly initialized during adaptation.
    static bool is_updater_param(const std::string& name, const ModelConfig& cfg) {
        if (name.rfind("updater.", 0) == 0) return true;
        if (cfg.updater_kind == UpdaterKind::hierarchical && name.size() > 7 &&
            name.compare(name.size() - 7, 7, ".hier_W") == 0)
            return true;
        return false;
    }

    static Tensor<Real> init_tensor(const std::string& name, const Shape& shape, std::mt19937_64& rng) {
        // gamma starts at 1, gate at 0 (adaptation starts at the truncated
        // behavior), everything else Xavier-uniform
        if (name.size() > 6 && name.compare(name.size() - 6, 6, ".gamma") == 0)
            return Tensor<Real>::full(shape, Real(1), true);
        if (name == "updater.gate") return Tensor<Real>::zeros(shape, true);
        if (shape.size() == 1) return Tensor<Real>::zeros(shape, true);
        const double fan_in = shape[0], fan_out = shape[1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        Tensor<Real> t = Tensor<Real>::zeros(shape, true);
        for (std::size_t i = 0; i < t.numel(); ++i) t.values()[i] = Real(u(rng));
        return t;
    }

    void zero_grads() {
        for (auto& [name, p] : params) p.zero_grad();
    }
};

// ---------------------------------------------------------------------------
// Encoder

template <typename Real>
inline Tensor<Real> encode_block(const Summarizer<Real>& model, const Tensor<Real>& features,
                                 const RunMode& mode = {}) {
    const auto& cfg = model.config;
    if (features.rank() != 2 || features.dim(1) != cfg.feature_dim)
        throw std::invalid_argument("encode_block: expected [N," + std::to_string(cfg.feature_dim) +
                                    "] features, got " + shape_str(features.shape()));
    auto& p = model.params;
    auto h = scale(conv_subsample(features, p, "subsample"), std::sqrt(Real(cfg.model_dim)));
    // positions restart at 0 in every block
    h = add(h, sinusoidal_positions<Real>(h.dim(0), cfg.model_dim));
    if (mode.training && mode.rng) h = dropout(h, cfg.dropout_rate, true, *mode.rng);
    const auto acfg = cfg.attention();
    for (int i = 0; i < cfg.encoder_layers; ++i) {
        const std::string pre = "encoder." + std::to_string(i);
        auto n1 = layer_norm(h, p.at(pre + ".ln1.gamma"), p.at(pre + ".ln1.beta"));
        auto a = multi_head_attention(n1, n1, n1, p, pre + ".self", acfg);
        if (mode.training && mode.rng) a = dropout(a, cfg.dropout_rate, true, *mode.rng);
        h = add(h, a);
        auto f = feed_forward(layer_norm(h, p.at(pre + ".ln2.gamma"), p.at(pre + ".ln2.beta")), p, pre + ".ff");
        if (mode.training && mode.rng) f = dropout(f, cfg.dropout_rate, true, *mode.rng);
        h = add(h, f);
    }
    return layer_norm(h, p.at("encoder.final_ln.gamma"), p.at("encoder.final_ln.beta"));
}

// ---------------------------------------------------------------------------
// Updaters

template <typename Real>
inline Tensor<Real> updater_concat(const CarriedContext<Real>& prev, const Tensor<Real>& enc_out) {
    if (prev.empty()) return enc_out;
    std::vector<Tensor<Real>> parts(prev.entries.begin(), prev.entries.end());
    parts.push_back(enc_out);
    return concat(parts, 0);
}

template <typename Real>
inline Tensor<Real> updater_gated(const Summarizer<Real>& model, const CarriedContext<Real>& prev,
                                  const Tensor<Real>& enc_out) {
    if (prev.empty()) return enc_out;
    auto ctx = prev.concatenated();
    // current encoding queries the past context; the learned scalar gate
    // scales the attended context before the residual add
    auto attended = multi_head_attention(enc_out, ctx, ctx, model.params, "updater.attn",
                                         model.config.attention());
    return add(enc_out, mul(attended, model.params.at("updater.gate")));
}

template <typename Real>
inline Tensor<Real> update_semantics(const Summarizer<Real>& model, const CarriedContext<Real>& prev,
                                     const Tensor<Real>& enc_out) {
    if (prev.empty()) return enc_out;
    switch (model.config.updater_kind) {
        case UpdaterKind::concat: return updater_concat(prev, enc_out);
        case UpdaterKind::gated: return updater_gated(model, prev, enc_out);
        case UpdaterKind::hierarchical:
            // context passing happens inside the decoder's cross-attention
            return enc_out;
    }
    throw std::logic_error("unknown updater kind");
}

// What the decoder attends over: the block's semantic embedding, plus the
// raw carried context when the hierarchical updater routes it in-decoder.
template <typename Real>
struct DecodeContext {
    Tensor<Real> memory;
    std::vector<Tensor<Real>> prev;  // hierarchical only

    static DecodeContext make(const Summarizer<Real>& model, const Tensor<Real>& semantics,
                              const CarriedContext<Real>& ctx) {
        DecodeContext d;
        d.memory = semantics;
        if (model.config.updater_kind == UpdaterKind::hierarchical && !ctx.empty())
            d.prev.assign(ctx.entries.begin(), ctx.entries.end());
        return d;
    }

    static DecodeContext plain(const Tensor<Real>& semantics) {
        DecodeContext d;
        d.memory = semantics;
        return d;
    }
};

inline AttentionMask causal_mask(int len) {
    AttentionMask m(static_cast<std::size_t>(len) * len, 0);
    for (int q = 0; q < len; ++q)
        for (int k = 0; k <= q; ++k) m[static_cast<std::size_t>(q) * len + k] = 1;
    return m;
}

namespace detail {

// Second-level attention of the hierarchical updater: the decoder state
// picks between the per-position context vectors attended from the previous
// blocks and from the current block.
template <typename Real>
inline Tensor<Real> hierarchical_combine(const Tensor<Real>& dec_state, const Tensor<Real>& c_prev,
                                         const Tensor<Real>& c_cur, const Tensor<Real>& hier_w) {
    const int l = dec_state.dim(0), d = dec_state.dim(1);
    auto q = matmul(dec_state, hier_w);
    Tensor<Real> ones_col = Tensor<Real>::full({d, 1}, Real(1));
    Tensor<Real> ones_row = Tensor<Real>::full({1, d}, Real(1));
    const Real inv_sqrt = Real(1) / std::sqrt(Real(d));
    auto s_prev = scale(matmul(mul(q, c_prev), ones_col), inv_sqrt);  // [l,1] rowwise dots
    auto s_cur = scale(matmul(mul(q, c_cur), ones_col), inv_sqrt);
    auto w = softmax(concat(std::vector<Tensor<Real>>{s_prev, s_cur}, 1), 1);  // [l,2]
    auto w_prev = matmul(slice(w, 1, 0, 1), ones_row);  // broadcast row weights over features
    auto w_cur = matmul(slice(w, 1, 1, 2), ones_row);
    (void)l;
    return add(mul(c_prev, w_prev), mul(c_cur, w_cur));
}

}  // namespace detail

template <typename Real>
inline Tensor<Real> decode_logits(const Summarizer<Real>& model, const DecodeContext<Real>& ctx,
                                  const std::vector<int>& prefix, const RunMode& mode = {}) {
    const auto& cfg = model.config;
    if (prefix.empty()) throw std::invalid_argument("decode_logits: empty prefix");
    if (prefix.front() != kBosId) throw std::invalid_argument("decode_logits: prefix must begin with BOS");
    auto& p = model.params;
    const int l = static_cast<int>(prefix.size());
    auto h = add(scale(embedding_lookup(p.at("embed.tok"), prefix), std::sqrt(Real(cfg.model_dim))),
                 sinusoidal_positions<Real>(l, cfg.model_dim));
    if (mode.training && mode.rng) h = dropout(h, cfg.dropout_rate, true, *mode.rng);
    const auto acfg = cfg.attention();
    const auto cmask = causal_mask(l);
    const bool hierarchical = cfg.updater_kind == UpdaterKind::hierarchical && !ctx.prev.empty();
    Tensor<Real> prev_ctx;
    if (hierarchical)
        prev_ctx = ctx.prev.size() == 1 ? ctx.prev.front() : concat(ctx.prev, 0);
    for (int i = 0; i < cfg.decoder_layers; ++i) {
        const std::string pre = "decoder." + std::to_string(i);
        auto n1 = layer_norm(h, p.at(pre + ".ln1.gamma"), p.at(pre + ".ln1.beta"));
        auto a = multi_head_attention(n1, n1, n1, p, pre + ".self", acfg, cmask);
        if (mode.training && mode.rng) a = dropout(a, cfg.dropout_rate, true, *mode.rng);
        h = add(h, a);
        auto n2 = layer_norm(h, p.at(pre + ".ln2.gamma"), p.at(pre + ".ln2.beta"));
        Tensor<Real> c;
        if (hierarchical) {
            auto c_prev = multi_head_attention(n2, prev_ctx, prev_ctx, p, pre + ".cross", acfg);
            auto c_cur = multi_head_attention(n2, ctx.memory, ctx.memory, p, pre + ".cross", acfg);
            c = detail::hierarchical_combine(n2, c_prev, c_cur, p.at(pre + ".hier_W"));
        } else {
            c = multi_head_attention(n2, ctx.memory, ctx.memory, p, pre + ".cross", acfg);
        }
        if (mode.training && mode.rng) c = dropout(c, cfg.dropout_rate, true, *mode.rng);
        h = add(h, c);
        auto f = feed_forward(layer_norm(h, p.at(pre + ".ln3.gamma"), p.at(pre + ".ln3.beta")), p, pre + ".ff");
        if (mode.training && mode.rng) f = dropout(f, cfg.dropout_rate, true, *mode.rng);
        h = add(h, f);
    }
    h = layer_norm(h, p.at("decoder.final_ln.gamma"), p.at("decoder.final_ln.beta"));
    return linear(h, p.at("out.W"), p.at("out.b"));
}

// ---------------------------------------------------------------------------
// Whole-sequence forwards (teacher forced)

template <typename Real>
inline void check_reference(const std::vector<int>& reference) {
    if (reference.size() < 2 || reference.front() != kBosId || reference.back() != kEosId)
        throw std::invalid_argument("reference must be framed BOS ... EOS");
}

template <typename Real>
struct BlockwiseResult {
    std::vector<Real> losses;
    CarriedContext<Real> final_context;
};

// Teacher-forced loss of one block given the carried context; returns the
// loss tensor (still attached to the tape) and the block's semantic
// embedding.
template <typename Real>
inline std::pair<Tensor<Real>, Tensor<Real>> block_loss(const Summarizer<Real>& model,
                                                        const CarriedContext<Real>& ctx,
                                                        const Tensor<Real>& block_features,
                                                        const std::vector<int>& reference, Real label_smoothing,
                                                        const RunMode& mode = {}) {
    check_reference<Real>(reference);
    auto enc = encode_block(model, block_features, mode);
    auto semantics = update_semantics(model, ctx, enc);
    auto dctx = DecodeContext<Real>::make(model, semantics, ctx);
    std::vector<int> prefix(reference.begin(), reference.end() - 1);
    std::vector<int> targets(reference.begin() + 1, reference.end());
    auto logits = decode_logits(model, dctx, prefix, mode);
    auto loss = label_smoothed_cross_entropy(logits, targets, label_smoothing, kPadId);
    // the carried embedding: current encoder output for concat (bounded
    // context), the updated semantics for gated/hierarchical
    Tensor<Real> carry = model.config.updater_kind == UpdaterKind::concat ? enc : semantics;
    return {loss, carry};
}

template <typename Real>
inline BlockwiseResult<Real> forward_blockwise(
    const Summarizer<Real>& model, const std::vector<Tensor<Real>>& blocks, const std::vector<int>& reference,
    Real label_smoothing = Real(0.15), const RunMode& mode = {},
    const std::function<void(int, Tensor<Real>&)>& on_block_loss = nullptr) {
    if (blocks.empty()) throw std::invalid_argument("forward_blockwise: need at least one block");
    BlockwiseResult<Real> result;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        auto [loss, carry] = block_loss(model, result.final_context, blocks[i], reference, label_smoothing, mode);
        result.losses.push_back(loss.item());
        Tensor<Real> detached = carry.detach();  // no gradient crosses the block boundary
        if (on_block_loss) on_block_loss(static_cast<int>(i), loss);
        result.final_context.push(std::move(detached), model.config.markov_window);
    }
    return result;
}

template <typename Real>
inline std::pair<Tensor<Real>, Tensor<Real>> forward_standard(const Summarizer<Real>& model,
                                                              const Tensor<Real>& features,
                                                              const std::vector<int>& reference,
                                                              Real label_smoothing = Real(0.15),
                                                              const RunMode& mode = {}) {
    check_reference<Real>(reference);
    CarriedContext<Real> empty;
    auto enc = encode_block(model, features, mode);
    auto semantics = update_semantics(model, empty, enc);
    auto dctx = DecodeContext<Real>::make(model, semantics, empty);
    std::vector<int> prefix(reference.begin(), reference.end() - 1);
    std::vector<int> targets(reference.begin() + 1, reference.end());
    auto logits = decode_logits(model, dctx, prefix, mode);
    auto loss = label_smoothed_cross_entropy(logits, targets, label_smoothing, kPadId);
    return {loss, logits};
}

}  // namespace bass
