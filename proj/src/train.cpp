#include "bass/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <iomanip>

namespace bass {

double warmup_lr(long step, double peak_lr, int warmup_steps) {
    if (step < 1) throw std::invalid_argument("warmup_lr: step must be >= 1");
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(warmup_steps);
    return peak_lr * std::min(s / w, std::sqrt(w / s));
}

namespace {

void clip_gradients(Summarizer<float>& model, double max_norm) {
    double sq = 0.0;
    for (auto& [name, p] : model.params)
        for (float g : p.grad()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const float factor = static_cast<float>(max_norm / norm);
        for (auto& [name, p] : model.params)
            for (float& g : p.grad()) g *= factor;
    }
}

}  // namespace

void adam_step(Summarizer<float>& model, AdamState& state, double lr, const TrainConfig& cfg) {
    if (lr < 0.0) throw std::invalid_argument("adam_step: negative learning rate");
    ++state.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (auto& [name, p] : model.params) {
        auto& mom = state.moments[name];
        if (mom.m.empty()) {
            mom.m.assign(p.numel(), 0.0f);
            mom.v.assign(p.numel(), 0.0f);
        }
        auto& grad = p.grad();
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double g = grad[i];
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in parameter '" + name + "'");
            mom.m[i] = static_cast<float>(b1 * mom.m[i] + (1.0 - b1) * g);
            mom.v[i] = static_cast<float>(b2 * mom.v[i] + (1.0 - b2) * g * g);
            const double mhat = mom.m[i] / bias1;
            const double vhat = mom.v[i] / bias2;
            p.values()[i] -= static_cast<float>(lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) +
                                                      cfg.weight_decay * p.values()[i]));
        }
        p.zero_grad();
    }
}

namespace {

// Shared per-block step so the truncated and block-wise paths run the exact
// same op sequence (the B >= N degeneracy must be bitwise).
float single_block_step(Summarizer<float>& model, const CarriedContext<float>& ctx,
                        const Tensor<float>& block, const std::vector<int>& reference, AdamState& state,
                        const TrainConfig& cfg, std::mt19937_64& dropout_rng, Tensor<float>* carry_out) {
    RunMode mode{model.config.dropout_rate > 0.0, &dropout_rng};
    auto [loss, carry] = block_loss(model, ctx, block, reference, static_cast<float>(cfg.label_smoothing), mode);
    const float loss_value = loss.item();
    backward(loss);
    clip_gradients(model, cfg.grad_clip_norm);
    adam_step(model, state, warmup_lr(state.step + 1, cfg.peak_lr, cfg.warmup_steps), cfg);
    if (carry_out) *carry_out = carry.detach();
    return loss_value;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

TrainResult run_training(Summarizer<float> model, const TrainConfig& tcfg,
                         const std::vector<Utterance>& train_set, bool blockwise) {
    tcfg.validate();
    if (train_set.empty()) throw std::invalid_argument("training: empty dataset");
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result{std::move(model), {}};
    AdamState state;
    std::mt19937_64 dropout_rng(tcfg.seed ^ 0xd509057f5a1cULL);
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t idx : epoch_order(train_set.size(), tcfg.seed, epoch)) {
            const auto& utt = train_set[idx];
            std::vector<float> losses;
            if (blockwise) {
                losses = block_training_step(result.model, utt.features, utt.reference, state, tcfg, dropout_rng);
            } else {
                const int n = std::min(utt.features.dim(0), tcfg.train_maxlen_frames);
                auto truncated = slice(utt.features, 0, 0, n);
                CarriedContext<float> empty;
                losses.push_back(single_block_step(result.model, empty, truncated, utt.reference, state, tcfg,
                                                   dropout_rng, nullptr));
            }
            for (float l : losses) loss_sum += l;
            loss_count += losses.size();
            result.report.block_traces.push_back(std::move(losses));
        }
        result.report.epoch_losses.push_back(loss_sum / static_cast<double>(loss_count));
    }
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace

std::vector<float> block_training_step(Summarizer<float>& model, const Tensor<float>& features,
                                       const std::vector<int>& reference, AdamState& state,
                                       const TrainConfig& cfg, std::mt19937_64& dropout_rng) {
    auto blocks = segment_blocks_merged(features, cfg.block_size_frames);
    std::vector<float> losses;
    CarriedContext<float> ctx;
    for (const auto& block : blocks) {
        Tensor<float> carry;
        losses.push_back(single_block_step(model, ctx, block, reference, state, cfg, dropout_rng, &carry));
        ctx.push(std::move(carry), model.config.markov_window);
    }
    return losses;
}

TrainResult train_truncated(const ModelConfig& mcfg, const TrainConfig& tcfg,
                            const std::vector<Utterance>& train_set) {
    return run_training(Summarizer<float>::random_init(mcfg, tcfg.seed), tcfg, train_set, false);
}

TrainResult bass_train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const std::vector<Utterance>& train_set) {
    return run_training(Summarizer<float>::random_init(mcfg, tcfg.seed), tcfg, train_set, true);
}

Summarizer<float> adapt_initialize(const Summarizer<float>& base, const ModelConfig& mcfg, std::uint64_t seed) {
    auto model = Summarizer<float>::random_init(mcfg, seed);
    const auto& bcfg = base.config;
    if (bcfg.feature_dim != mcfg.feature_dim || bcfg.model_dim != mcfg.model_dim || bcfg.heads != mcfg.heads ||
        bcfg.encoder_layers != mcfg.encoder_layers || bcfg.decoder_layers != mcfg.decoder_layers ||
        bcfg.ff_dim != mcfg.ff_dim || bcfg.vocab_size != mcfg.vocab_size)
        throw std::invalid_argument("adapt: base checkpoint dimensions incompatible with target config");
    std::string mismatches;
    for (auto& [name, p] : model.params) {
        auto it = base.params.find(name);
        if (it == base.params.end()) {
            if (!Summarizer<float>::is_updater_param(name, mcfg))
                mismatches += "  missing " + name + "\n";
            continue;  // updater params keep their fresh initialization
        }
        if (it->second.shape() != p.shape()) {
            mismatches += "  " + name + ": " + shape_str(it->second.shape()) + " vs " + shape_str(p.shape()) + "\n";
            continue;
        }
        p.values() = it->second.values();
    }
    if (!mismatches.empty())
        throw std::invalid_argument("adapt: incompatible base checkpoint:\n" + mismatches);
    return model;
}

TrainResult bass_adapt(const Summarizer<float>& base, const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const std::vector<Utterance>& train_set) {
    return run_training(adapt_initialize(base, mcfg, tcfg.seed), tcfg, train_set, true);
}

std::string RunReport::to_text() const {
    std::ostringstream os;
    os << std::setprecision(8) << std::fixed;
    for (std::size_t e = 0; e < epoch_losses.size(); ++e) os << "epoch " << e << " loss " << epoch_losses[e] << "\n";
    std::size_t steps = 0;
    for (const auto& t : block_traces) steps += t.size();
    os << "final epochs " << epoch_losses.size() << " steps " << steps << " loss "
       << (epoch_losses.empty() ? 0.0 : epoch_losses.back()) << "\n";
    return os.str();
}

}  // namespace bass
