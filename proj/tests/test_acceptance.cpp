// Acceptance suite: one pass/fail line per criterion. Heavier than the unit
// tests — the synthetic benchmark alone takes tens of minutes at full scale.
// Run with BASS_ACCEPT_FAST=1 to shrink the benchmark and reproducibility
// runs for a quick smoke pass (criteria 5 and 7 are then reported as SKIP).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "bass/checkpoint.hpp"
#include "bass/config_file.hpp"
#include "bass/gradcheck.hpp"
#include "bass/infer.hpp"
#include "bass/metrics.hpp"

namespace fs = std::filesystem;
using namespace bass;

namespace {

struct Criterion {
    int number;
    std::string name;
    bool passed = false;
    bool skipped = false;
    std::string detail;
};

std::vector<Criterion> g_results;

void report(int number, const std::string& name, bool passed, const std::string& detail) {
    g_results.push_back({number, name, passed, false, detail});
    std::cout << "[PRIMARY " << number << "] " << name << ": " << (passed ? "PASS" : "FAIL")
              << (detail.empty() ? "" : "  (" + detail + ")") << "\n"
              << std::flush;
}

void report_skip(int number, const std::string& name, const std::string& why) {
    g_results.push_back({number, name, false, true, why});
    std::cout << "[PRIMARY " << number << "] " << name << ": SKIP  (" << why << ")\n" << std::flush;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Real>
Tensor<Real> random_features(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> u(Real(-1), Real(1));
    auto x = Tensor<Real>::zeros({n, d});
    for (auto& v : x.values()) v = u(rng);
    return x;
}

ModelConfig small_config(UpdaterKind kind = UpdaterKind::concat) {
    ModelConfig cfg;
    cfg.feature_dim = 4;
    cfg.model_dim = 8;
    cfg.heads = 2;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.ff_dim = 16;
    cfg.vocab_size = 7;
    cfg.updater_kind = kind;
    return cfg;
}

// ---------------------------------------------------------------- criterion 1

void criterion_gradient_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg;
    cfg.feature_dim = 8;
    cfg.model_dim = 16;
    cfg.heads = 4;
    cfg.encoder_layers = 2;
    cfg.decoder_layers = 2;
    cfg.ff_dim = 32;
    cfg.vocab_size = 12;
    double worst = 0.0;
    for (auto kind : {UpdaterKind::concat, UpdaterKind::gated, UpdaterKind::hierarchical}) {
        cfg.updater_kind = kind;
        worst = std::max(worst, full_model_grad_error<double>(cfg, 7));
    }
    const double secs = seconds_since(t0);
    std::ostringstream detail;
    detail << "max relative error " << worst << ", " << secs << "s";
    report(1, "gradient oracle", worst < 1e-4 && secs < 120.0, detail.str());
}

// ---------------------------------------------------------------- criterion 2

void criterion_degenerate_equivalences() {
    std::string detail;
    bool ok = true;
    auto check = [&](bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what + " differs";
        }
    };

    // single-block blockwise forward == standard forward (bitwise)
    {
        auto model = Summarizer<float>::random_init(small_config(), 3);
        auto feats = random_features<float>(20, 4, 5);
        const std::vector<int> ref = {kBosId, 4, 5, kEosId};
        autograd::NoGradGuard<float> nograd;
        auto blockwise = forward_blockwise<float>(model, {feats}, ref, 0.1f);
        auto standard = forward_standard<float>(model, feats, ref, 0.1f);
        check(blockwise.losses.size() == 1 && blockwise.losses[0] == standard.first.item(),
              "forward_blockwise T=1 vs forward_standard");
    }

    // infer_block with block_size >= N == infer_standard
    {
        auto model = Summarizer<float>::random_init(small_config(), 4);
        auto feats = random_features<float>(20, 4, 6);
        InferConfig icfg;
        icfg.block_size_frames = 400;
        auto block = infer_block(model, feats, icfg);
        auto standard = infer_standard(model, feats, icfg);
        check(block.per_block.size() == 1 && block.final_hypothesis().tokens == standard.tokens &&
                  block.final_hypothesis().log_prob == standard.log_prob,
              "infer_block one block vs infer_standard");
    }

    // beam_size 1 == greedy
    {
        auto model = Summarizer<double>::random_init(small_config(), 5);
        auto enc = encode_block(model, random_features<double>(16, 4, 7));
        CarriedContext<double> empty;
        auto dctx = DecodeContext<double>::make(model, update_semantics(model, empty, enc), empty);
        InferConfig icfg;
        icfg.beam_size = 1;
        icfg.max_decode_len = 8;
        check(beam_search(model, dctx, icfg).tokens == greedy_decode(model, dctx, 8).tokens,
              "beam_size 1 vs greedy");
    }

    // bass_train with B >= max length reproduces the trunc trajectory bitwise
    {
        auto mcfg = small_config();
        TrainConfig tcfg;
        tcfg.epochs = 2;
        tcfg.warmup_steps = 10;
        tcfg.block_size_frames = 400;
        tcfg.train_maxlen_frames = 400;
        std::vector<Utterance> set;
        for (int i = 0; i < 4; ++i)
            set.push_back({"u" + std::to_string(i), random_features<float>(24, 4, 40 + i),
                           {kBosId, 4, 5 - i % 2, kEosId}});
        auto trunc = train_truncated(mcfg, tcfg, set);
        auto block = bass_train(mcfg, tcfg, set);
        bool same = trunc.report.block_traces == block.report.block_traces;
        for (const auto& [name, p] : trunc.model.params)
            if (p.values() != block.model.params.at(name).values()) same = false;
        check(same, "bass_train B>=N vs trunc trajectory");
    }

    report(2, "degenerate equivalences", ok, ok ? "all four bitwise" : detail);
}

// ---------------------------------------------------------------- criterion 3

void criterion_beam_optimality() {
    const auto t0 = std::chrono::steady_clock::now();
    // vocab_size 7 = 4 reserved ids + 3 words, i.e. the criterion's 4-way
    // effective branching (EOS or one of 3 words) after the reserved ids
    InferConfig icfg;
    icfg.beam_size = 64;
    icfg.max_decode_len = 5;
    int matches = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        auto model = Summarizer<double>::random_init(small_config(), 1000 + static_cast<std::uint64_t>(trial));
        auto enc = encode_block(model, random_features<double>(12, 4, 2000 + static_cast<std::uint64_t>(trial)));
        CarriedContext<double> empty;
        auto dctx = DecodeContext<double>::make(model, update_semantics(model, empty, enc), empty);

        // exhaustive argmax over every sequence finishing within max_len
        autograd::NoGradGuard<double> nograd;
        Hypothesis<double> best;
        best.log_prob = -std::numeric_limits<double>::infinity();
        std::vector<Hypothesis<double>> frontier{Hypothesis<double>{}};
        for (int step = 0; step < icfg.max_decode_len; ++step) {
            std::vector<Hypothesis<double>> next;
            for (const auto& hyp : frontier) {
                auto logp = detail::next_token_log_probs(model, dctx, hyp.tokens);
                for (int c = 0; c < model.config.vocab_size; ++c) {
                    auto h = hyp;
                    h.tokens.push_back(c);
                    h.log_prob += logp[static_cast<std::size_t>(c)];
                    if (c == kEosId) {
                        if (h.log_prob > best.log_prob) best = std::move(h);
                    } else if (step + 1 < icfg.max_decode_len) {
                        next.push_back(std::move(h));
                    }
                }
            }
            frontier = std::move(next);
        }

        auto beam = beam_search(model, dctx, icfg);
        if (beam.finished && beam.tokens == best.tokens && std::abs(beam.log_prob - best.log_prob) < 1e-12)
            ++matches;
    }
    const double secs = seconds_since(t0);
    std::ostringstream note;
    note << matches << "/" << trials << " trials, " << secs << "s";
    report(3, "beam-search optimality oracle", matches == trials && secs < 60.0, note.str());
}

// ---------------------------------------------------------------- criterion 4

void criterion_detachment_causality() {
    std::string detail;
    bool ok = true;
    auto check = [&](bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    };

    for (auto kind : {UpdaterKind::concat, UpdaterKind::gated, UpdaterKind::hierarchical}) {
        auto model = Summarizer<double>::random_init(small_config(kind), 6);
        if (kind == UpdaterKind::gated) model.params.at("updater.gate").values()[0] = 0.4;
        std::vector<Tensor<double>> blocks = {random_features<double>(12, 4, 60), random_features<double>(12, 4, 61),
                                              random_features<double>(12, 4, 62)};
        const std::vector<int> ref = {kBosId, 4, 5, kEosId};

        // gradients of the block-2 loss, context carried the normal way
        auto run = [&](const CarriedContext<double>& ctx) {
            model.zero_grads();
            auto [loss, carry] = block_loss(model, ctx, blocks[1], ref, 0.1);
            backward(loss);
            std::map<std::string, std::vector<double>> grads;
            for (const auto& [name, p] : model.params) grads[name] = p.grad();
            return grads;
        };
        CarriedContext<double> carried;
        {
            autograd::NoGradGuard<double> g;
            auto enc = encode_block(model, blocks[0]);
            auto carry = kind == UpdaterKind::concat ? enc : update_semantics(model, carried, enc);
            carried.push(carry.detach(), 1);
        }
        CarriedContext<double> constant;
        for (const auto& e : carried.entries)
            constant.entries.push_back(Tensor<double>(e.shape(), e.values()));  // fresh constant copy
        check(run(carried) == run(constant), updater_kind_name(kind) + ": grads change with constant context");

        // causality: losses and hypotheses of blocks <= i ignore blocks > i
        autograd::NoGradGuard<double> nograd;
        auto full = forward_blockwise<double>(model, blocks, ref, 0.1);
        InferConfig icfg;
        icfg.max_decode_len = 6;
        std::vector<std::vector<int>> full_hyps;
        {
            auto inf = infer_block(model, blocks, icfg);
            for (const auto& h : inf.per_block) full_hyps.push_back(h.tokens);
        }
        auto tampered_blocks = blocks;
        tampered_blocks[2] = random_features<double>(12, 4, 999);
        auto tampered = forward_blockwise<double>(model, tampered_blocks, ref, 0.1);
        auto tampered_inf = infer_block(model, tampered_blocks, icfg);
        check(full.losses[0] == tampered.losses[0] && full.losses[1] == tampered.losses[1],
              updater_kind_name(kind) + ": early losses see later blocks");
        check(full_hyps[0] == tampered_inf.per_block[0].tokens && full_hyps[1] == tampered_inf.per_block[1].tokens,
              updater_kind_name(kind) + ": early hypotheses see later blocks");
        check(full.losses[2] != tampered.losses[2], updater_kind_name(kind) + ": block-3 loss ignores its input");
    }

    report(4, "detachment and causality", ok, ok ? "bitwise for all three updaters" : detail);
}

// ---------------------------------------------------------------- criterion 5

void criterion_synthetic_benchmark(bool fast) {
    if (fast) {
        report_skip(5, "synthetic benchmark", "BASS_ACCEPT_FAST=1");
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticConfig scfg;  // defaults: 400 train / 50 test, 1200 frames
    auto data = generate_synthetic(scfg);

    // Benchmark recipe. The narrow two-head model with dropout is what lets
    // the truncated baseline learn keyword detection at all: with four heads
    // or without dropout the 400-utterance train split is memorized instead,
    // and both systems decode at chance.
    ModelConfig mcfg;
    mcfg.heads = 2;
    mcfg.dropout_rate = 0.2;
    TrainConfig tcfg;  // B = maxlen = 400
    tcfg.epochs = 40;

    auto evaluate = [&](const Summarizer<float>& m, bool blockwise) {
        InferConfig icfg;  // beam 8, block 400
        std::vector<TokenList> hyps, refs;
        for (const auto& utt : data.test) {
            auto hyp = blockwise ? infer_block(m, utt.features, icfg).final_hypothesis()
                                 : infer_standard(m, utt.features, icfg);
            hyps.push_back(split_tokens(data.vocab.detokenize(hyp.tokens)));
            refs.push_back(split_tokens(data.vocab.detokenize(utt.reference)));
        }
        return corpus_rouge(hyps, refs);
    };

    auto trunc = train_truncated(mcfg, tcfg, data.train);

    // Adaptation: 20 epochs on the full 1200-frame utterances, fresh warmup
    // at a higher peak rate, slightly lighter dropout. The three updaters are
    // independent given the base, so they adapt on concurrent threads; the
    // gated run is the scored one, concat/hierarchical fill the companion
    // table (ordering reported, no value requirement).
    TrainConfig acfg = tcfg;
    acfg.epochs = 20;
    acfg.peak_lr = 2e-3;
    const int companion_epochs = 10;
    auto launch_adapt = [&](UpdaterKind kind, int epochs) {
        return std::async(std::launch::async, [&, kind, epochs] {
            auto cfg = mcfg;
            cfg.updater_kind = kind;
            cfg.dropout_rate = 0.15;
            auto run = acfg;
            run.epochs = epochs;
            return bass_adapt(trunc.model, cfg, run, data.train);
        });
    };
    auto gated_fut = launch_adapt(UpdaterKind::gated, acfg.epochs);
    auto concat_fut = launch_adapt(UpdaterKind::concat, companion_epochs);
    auto hier_fut = launch_adapt(UpdaterKind::hierarchical, companion_epochs);

    auto trunc_scores = evaluate(trunc.model, false);
    auto adapt = gated_fut.get();
    auto adapt_scores = evaluate(adapt.model, true);

    const double gap = adapt_scores.rougeL.f1 - trunc_scores.rougeL.f1;

    std::cout << "  trunc  standard inference: " << format_rouge_report(trunc_scores) << "\n";
    std::cout << "  gated  block inference:    " << format_rouge_report(adapt_scores) << "\n";

    std::cout << "  companion (block-wise adaptation, block inference):\n";
    std::cout << "    gated         " << format_rouge_report(adapt_scores) << "\n";
    std::cout << "    concat        " << format_rouge_report(evaluate(concat_fut.get().model, true)) << "\n";
    std::cout << "    hierarchical  " << format_rouge_report(evaluate(hier_fut.get().model, true)) << "\n";

    const double secs = seconds_since(t0);
    std::ostringstream detail;
    detail << "ROUGE-L gap " << gap << " (need >= 5.0), " << secs << "s";
    report(5, "synthetic benchmark", gap >= 5.0 && secs < 45.0 * 60.0, detail.str());
}

// ---------------------------------------------------------------- criterion 6

void criterion_metrics() {
    std::string detail;
    bool ok = true;
    auto check = [&](bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    };
    auto near = [](double a, double b) { return std::abs(a - b) < 1e-9; };

    auto lcs = rouge_l({"the", "cat", "sat"}, {"the", "cat", "ate"});
    check(near(lcs.precision, 200.0 / 3) && near(lcs.recall, 200.0 / 3) && near(lcs.f1, 200.0 / 3),
          "LCS 66.67 case");
    auto clip = rouge_n({"a", "a"}, {"a"}, 1);
    check(near(clip.precision, 50.0) && near(clip.recall, 100.0) && near(clip.f1, 200.0 / 3), "clipping case");

    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> len(0, 12), word(0, 5);
    bool duality = true, bounds = true, identity = true;
    for (int i = 0; i < 1000; ++i) {
        TokenList a, b;
        for (int k = len(rng); k > 0; --k) a.push_back("w" + std::to_string(word(rng)));
        for (int k = len(rng); k > 0; --k) b.push_back("w" + std::to_string(word(rng)));
        auto ab = rouge_l(a, b), ba = rouge_l(b, a);
        if (!(near(ab.precision, ba.recall) && near(ab.recall, ba.precision) && near(ab.f1, ba.f1)))
            duality = false;
        for (double v : {ab.precision, ab.recall, ab.f1, rouge_n(a, b, 2).f1})
            if (v < 0.0 || v > 100.0) bounds = false;
        if (!a.empty() && !near(rouge_l(a, a).f1, 100.0)) identity = false;
    }
    check(duality, "hyp/ref duality");
    check(bounds, "[0,100] bounds");
    check(identity, "self-score 100");

    report(6, "metric correctness", ok, ok ? "exact cases + 1000 random pairs" : detail);
}

// ---------------------------------------------------------------- criterion 7

std::map<std::string, std::string> dir_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream is(entry.path(), std::ios::binary);
        out[fs::relative(entry.path(), root).string()] =
            std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }
    return out;
}

void criterion_reproducibility(bool fast) {
    if (fast) {
        report_skip(7, "reproducibility", "BASS_ACCEPT_FAST=1");
        return;
    }
    const fs::path work = fs::temp_directory_path() / "bass_accept_repro";
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cfg_path = work / "bench.cfg";
    {
        std::ofstream os(cfg_path);
        os << "feature_dim = 8\nmodel_dim = 16\nheads = 2\nencoder_layers = 1\ndecoder_layers = 1\n"
              "ff_dim = 32\nvocab_words = 16\nkeywords_per_utterance = 3\nutterance_frames = 180\n"
              "num_train = 12\nnum_val = 2\nnum_test = 6\nepochs = 2\nwarmup_steps = 10\n"
              "train_maxlen_frames = 60\nblock_size_frames = 60\nbeam_size = 4\nmax_decode_len = 10\nseed = 5\n";
    }
    auto run = [&](const std::string& out) {
        const std::string cmd =
            "./bass bench --config " + cfg_path.string() + " --out " + (work / out).string() + " >/dev/null";
        return std::system(cmd.c_str());
    };
    const int rc1 = run("run1");
    const int rc2 = run("run2");
    bool ok = rc1 == 0 && rc2 == 0;
    std::string detail = "two bench runs byte-identical";
    if (ok) {
        auto a = dir_bytes(work / "run1");
        auto b = dir_bytes(work / "run2");
        if (a.empty() || a.size() != b.size()) ok = false;
        std::size_t files = 0;
        for (const auto& [name, bytes] : a) {
            auto it = b.find(name);
            if (it == b.end() || it->second != bytes) {
                ok = false;
                detail = name + " differs between runs";
                break;
            }
            ++files;
        }
        if (ok) detail = std::to_string(files) + " files byte-identical across runs";
    } else {
        detail = "bench exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2);
    }
    fs::remove_all(work);
    report(7, "reproducibility", ok, detail);
}

// ---------------------------------------------------------------- criterion 8

void criterion_checkpoint_integrity() {
    std::string detail;
    bool ok = true;
    auto check = [&](bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    };

    auto mcfg = small_config();
    mcfg.vocab_size = 10;
    auto model = Summarizer<float>::random_init(mcfg, 31);
    const fs::path path = fs::temp_directory_path() / "bass_accept_ckpt.ckpt";
    save_checkpoint(path.string(), model);
    auto loaded = load_checkpoint(path.string());
    fs::remove(path);

    auto feats = random_features<float>(18, 4, 77);
    const std::vector<int> ref = {kBosId, 5, 6, 4, kEosId};
    autograd::NoGradGuard<float> nograd;
    auto a = forward_standard(model, feats, ref, 0.15f);
    auto b = forward_standard(loaded, feats, ref, 0.15f);
    check(a.first.item() == b.first.item() && a.second.values() == b.second.values(),
          "round trip changes forward outputs");

    // zero adaptation epochs: the adapted model (gate closed) is
    // forward-equivalent to its base
    auto gated_cfg = mcfg;
    gated_cfg.updater_kind = UpdaterKind::gated;
    auto adapted = adapt_initialize(loaded, gated_cfg, 123);
    check(adapted.params.at("updater.gate").values()[0] == 0.0f, "gate does not start closed");
    auto c = forward_standard(adapted, feats, ref, 0.15f);
    check(a.first.item() == c.first.item() && a.second.values() == c.second.values(),
          "zero-epoch adaptation changes forward outputs");
    // even with carried context the closed gate is inert: semantics == enc
    CarriedContext<float> ctx;
    ctx.push(encode_block(adapted, feats).detach(), 1);
    auto enc = encode_block(adapted, random_features<float>(14, 4, 78));
    auto sem = update_semantics(adapted, ctx, enc);
    check(sem.values() == enc.values(), "closed gate is not inert");

    report(8, "checkpoint integrity", ok, ok ? "bitwise round trip and inert zero-epoch adaptation" : detail);
}

}  // namespace

int main() {
    const bool fast = std::getenv("BASS_ACCEPT_FAST") != nullptr;
    criterion_gradient_oracle();
    criterion_degenerate_equivalences();
    criterion_beam_optimality();
    criterion_detachment_causality();
    criterion_synthetic_benchmark(fast);
    criterion_metrics();
    criterion_reproducibility(fast);
    criterion_checkpoint_integrity();

    int failures = 0;
    for (const auto& c : g_results)
        if (!c.passed && !c.skipped) ++failures;
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria FAILED") << "\n";
    return failures == 0 ? 0 : 1;
}
