#pragma once

// Decoding over P(Y|S): greedy and beam search, plus the two whole-input
// strategies (standard: one block; block: abutting blocks with carried
// context and a full re-decode after every block).

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bass/model.hpp"

namespace bass {

struct InferConfig {
    int beam_size = 8;
    int max_decode_len = 32;
    int block_size_frames = 400;
    double length_alpha = 0.0;  // score = log_prob / len^alpha; 0 = raw sum

    void validate() const {
        if (beam_size < 1 || max_decode_len < 1 || block_size_frames < 1)
            throw std::invalid_argument("infer config: non-positive field");
        if (length_alpha < 0.0) throw std::invalid_argument("infer config: negative length_alpha");
    }
};

template <typename Real>
struct Hypothesis {
    std::vector<int> tokens{kBosId};  // BOS-rooted
    double log_prob = 0.0;
    bool finished = false;

    int generated_length() const { return static_cast<int>(tokens.size()) - 1; }

    double score(double alpha) const {
        if (alpha == 0.0) return log_prob;
        return log_prob / std::pow(static_cast<double>(std::max(1, generated_length())), alpha);
    }
};

namespace detail {

template <typename Real>
inline std::vector<double> next_token_log_probs(const Summarizer<Real>& model, const DecodeContext<Real>& ctx,
                                                const std::vector<int>& prefix) {
    auto logits = decode_logits(model, ctx, prefix);
    auto logp = log_softmax(logits, 1);
    const int v = model.config.vocab_size;
    const int last = logits.dim(0) - 1;
    std::vector<double> out(static_cast<std::size_t>(v));
    for (int c = 0; c < v; ++c) out[static_cast<std::size_t>(c)] = static_cast<double>(logp.at(static_cast<std::size_t>(last) * v + c));
    return out;
}

}  // namespace detail

template <typename Real>
inline Hypothesis<Real> greedy_decode(const Summarizer<Real>& model, const DecodeContext<Real>& ctx,
                                      int max_len) {
    autograd::NoGradGuard<Real> nograd;
    Hypothesis<Real> hyp;
    for (int step = 0; step < max_len; ++step) {
        auto logp = detail::next_token_log_probs(model, ctx, hyp.tokens);
        int best = 0;  // ties break toward the lowest token id
        for (int c = 1; c < model.config.vocab_size; ++c)
            if (logp[static_cast<std::size_t>(c)] > logp[static_cast<std::size_t>(best)]) best = c;
        hyp.tokens.push_back(best);
        hyp.log_prob += logp[static_cast<std::size_t>(best)];
        if (best == kEosId) {
            hyp.finished = true;
            break;
        }
    }
    return hyp;
}

// Length-synchronous beam search. Finished hypotheses retire from the beam;
// the best finished hypothesis under the (optional) length-normalized score
// wins. Deterministic tie-break: higher score, then lower token id, then
// earlier parent hypothesis.
template <typename Real>
inline Hypothesis<Real> beam_search(const Summarizer<Real>& model, const DecodeContext<Real>& ctx,
                                    const InferConfig& cfg) {
    cfg.validate();
    autograd::NoGradGuard<Real> nograd;
    const int v = model.config.vocab_size;
    std::vector<Hypothesis<Real>> active{Hypothesis<Real>{}};
    std::vector<Hypothesis<Real>> finished;

    struct Candidate {
        double log_prob;
        int parent;
        int token;
    };

    for (int step = 0; step < cfg.max_decode_len && !active.empty(); ++step) {
        std::vector<Candidate> candidates;
        candidates.reserve(active.size() * static_cast<std::size_t>(v));
        for (int p = 0; p < static_cast<int>(active.size()); ++p) {
            auto logp = detail::next_token_log_probs(model, ctx, active[static_cast<std::size_t>(p)].tokens);
            for (int c = 0; c < v; ++c)
                candidates.push_back({active[static_cast<std::size_t>(p)].log_prob + logp[static_cast<std::size_t>(c)], p, c});
        }
        std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
            if (a.token != b.token) return a.token < b.token;
            return a.parent < b.parent;
        });
        std::vector<Hypothesis<Real>> next;
        int slots = 0;  // retired hypotheses still consume their beam slot
        for (const auto& cand : candidates) {
            if (slots >= cfg.beam_size) break;
            ++slots;
            Hypothesis<Real> h = active[static_cast<std::size_t>(cand.parent)];
            h.tokens.push_back(cand.token);
            h.log_prob = cand.log_prob;
            if (cand.token == kEosId) {
                h.finished = true;
                finished.push_back(std::move(h));
            } else {
                next.push_back(std::move(h));
            }
        }
        active = std::move(next);
    }

    auto better = [&](const Hypothesis<Real>& a, const Hypothesis<Real>& b) {
        return a.score(cfg.length_alpha) > b.score(cfg.length_alpha);
    };
    if (!finished.empty()) {
        auto best = std::max_element(finished.begin(), finished.end(),
                                     [&](const auto& a, const auto& b) { return better(b, a); });
        return *best;
    }
    // nothing finished within max_decode_len: best unfinished, flagged by
    // finished == false
    auto best = std::max_element(active.begin(), active.end(),
                                 [&](const auto& a, const auto& b) { return better(b, a); });
    return *best;
}

template <typename Real>
inline Hypothesis<Real> infer_standard(const Summarizer<Real>& model, const Tensor<Real>& features,
                                       const InferConfig& cfg) {
    autograd::NoGradGuard<Real> nograd;
    CarriedContext<Real> empty;
    auto enc = encode_block(model, features);
    auto semantics = update_semantics(model, empty, enc);
    return beam_search(model, DecodeContext<Real>::make(model, semantics, empty), cfg);
}

template <typename Real>
struct BlockInferenceResult {
    std::vector<Hypothesis<Real>> per_block;
    const Hypothesis<Real>& final_hypothesis() const { return per_block.back(); }
};

template <typename Real>
inline BlockInferenceResult<Real> infer_block(const Summarizer<Real>& model,
                                              const std::vector<Tensor<Real>>& blocks, const InferConfig& cfg) {
    if (blocks.empty()) throw std::invalid_argument("infer_block: need at least one block");
    autograd::NoGradGuard<Real> nograd;
    BlockInferenceResult<Real> result;
    CarriedContext<Real> ctx;
    for (const auto& block : blocks) {
        auto enc = encode_block(model, block);
        auto semantics = update_semantics(model, ctx, enc);
        // full re-decode of the whole hypothesis after every block
        result.per_block.push_back(beam_search(model, DecodeContext<Real>::make(model, semantics, ctx), cfg));
        Tensor<Real> carry = model.config.updater_kind == UpdaterKind::concat ? enc : semantics;
        ctx.push(carry.detach(), model.config.markov_window);
    }
    return result;
}

// Partition into abutting blocks of block_size_frames; a tail too short to
// subsample is merged into the previous block.
template <typename Real>
inline std::vector<Tensor<Real>> partition_blocks(const Tensor<Real>& features, int block_frames) {
    if (block_frames < 1) throw std::invalid_argument("partition_blocks: block_frames must be positive");
    const int n = features.dim(0);
    std::vector<Tensor<Real>> blocks;
    int start = 0;
    while (start < n) {
        int len = std::min(block_frames, n - start);
        int remainder = n - start - len;
        if (remainder > 0 && remainder < kSubsampleMinFrames) len += remainder;
        blocks.push_back(slice(features, 0, start, start + len));
        start += len;
    }
    if (blocks.empty()) blocks.push_back(features);
    return blocks;
}

template <typename Real>
inline BlockInferenceResult<Real> infer_block(const Summarizer<Real>& model, const Tensor<Real>& features,
                                              const InferConfig& cfg) {
    return infer_block(model, partition_blocks(features, cfg.block_size_frames), cfg);
}

}  // namespace bass
