#pragma once

// Optimizer and the three training procedures: truncated baseline,
// block-wise training from scratch, and block-wise adaptation from a
// truncated checkpoint.

#include "bass/data.hpp"

namespace bass {

enum class TrainMode { trunc, bass_train, bass_adapt };

inline TrainMode train_mode_from_name(const std::string& name) {
    if (name == "trunc") return TrainMode::trunc;
    if (name == "bass_train") return TrainMode::bass_train;
    if (name == "bass_adapt") return TrainMode::bass_adapt;
    throw std::invalid_argument("unknown training mode '" + name + "'");
}

struct TrainConfig {
    int epochs = 20;
    double peak_lr = 1e-3;
    int warmup_steps = 400;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-9;
    double label_smoothing = 0.15;
    double grad_clip_norm = 5.0;
    double weight_decay = 0.0;  // decoupled, applied at the current lr
    int train_maxlen_frames = 400;
    int block_size_frames = 400;
    std::uint64_t seed = 1;
    TrainMode mode = TrainMode::trunc;
    std::string base_checkpoint;

    void validate() const {
        if (epochs < 0 || warmup_steps < 1 || peak_lr <= 0.0) throw std::invalid_argument("train config: invalid schedule");
        if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw std::invalid_argument("train config: label_smoothing outside [0,1)");
        if (weight_decay < 0.0) throw std::invalid_argument("train config: negative weight_decay");
        if (block_size_frames < 1 || train_maxlen_frames < 1) throw std::invalid_argument("train config: non-positive lengths");
        if (block_size_frames > train_maxlen_frames)
            throw std::invalid_argument("train config: block size exceeds train_maxlen_frames");
    }
};

struct AdamState {
    struct Moments {
        std::vector<float> m, v;
    };
    std::map<std::string, Moments> moments;
    long step = 0;
};

// Inverse-square-root warmup: peak at step == warmup_steps.
double warmup_lr(long step, double peak_lr, int warmup_steps);

// Bias-corrected Adam update over every parameter; gradients are zeroed
// afterward. Throws on non-finite gradients, naming the parameter.
void adam_step(Summarizer<float>& model, AdamState& state, double lr, const TrainConfig& cfg);

struct RunReport {
    std::vector<double> epoch_losses;
    std::vector<std::vector<float>> block_traces;  // per-utterance-step block losses
    double wall_seconds = 0.0;
    std::string checkpoint_path;

    // "epoch <e> loss <float>" lines plus a final summary; wall time is
    // deliberately excluded so reports are reproducible byte-for-byte.
    std::string to_text() const;
};

struct TrainResult {
    Summarizer<float> model;
    RunReport report;
};

// One pass over an utterance in blocks: forward, backward and one optimizer
// step per block, context carried detached. Returns per-block losses.
std::vector<float> block_training_step(Summarizer<float>& model, const Tensor<float>& features,
                                       const std::vector<int>& reference, AdamState& state,
                                       const TrainConfig& cfg, std::mt19937_64& dropout_rng);

TrainResult train_truncated(const ModelConfig& mcfg, const TrainConfig& tcfg,
                            const std::vector<Utterance>& train_set);

TrainResult bass_train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const std::vector<Utterance>& train_set);

// Fresh model under `mcfg` with every compatible parameter copied from
// `base`; parameters introduced by the updater choice are freshly
// initialized (gate starts closed). Shape mismatches are fatal.
Summarizer<float> adapt_initialize(const Summarizer<float>& base, const ModelConfig& mcfg, std::uint64_t seed);

TrainResult bass_adapt(const Summarizer<float>& base, const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const std::vector<Utterance>& train_set);

}  // namespace bass
