#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bass/infer.hpp"

using bass::CarriedContext;
using bass::DecodeContext;
using bass::InferConfig;
using bass::ModelConfig;
using bass::Summarizer;
using bass::Tensor;
using T = Tensor<double>;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.feature_dim = 4;
    cfg.model_dim = 8;
    cfg.heads = 2;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.ff_dim = 16;
    cfg.vocab_size = 7;
    return cfg;
}

T random_features(int n, int d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    T x = T::zeros({n, d});
    for (auto& v : x.values()) v = u(rng);
    return x;
}

DecodeContext<double> single_block_context(const Summarizer<double>& model, const T& features) {
    auto enc = bass::encode_block(model, features);
    CarriedContext<double> empty;
    auto sem = bass::update_semantics(model, empty, enc);
    return DecodeContext<double>::make(model, sem, empty);
}

// Exhaustive enumeration of every sequence that finishes within max_len
// generated tokens; returns the best by total log probability.
bass::Hypothesis<double> exhaustive_best(const Summarizer<double>& model, const DecodeContext<double>& ctx,
                                         int max_len) {
    bass::autograd::NoGradGuard<double> nograd;
    bass::Hypothesis<double> best;
    best.log_prob = -std::numeric_limits<double>::infinity();
    std::vector<bass::Hypothesis<double>> frontier{bass::Hypothesis<double>{}};
    for (int step = 0; step < max_len; ++step) {
        std::vector<bass::Hypothesis<double>> next;
        for (const auto& hyp : frontier) {
            auto logp = bass::detail::next_token_log_probs(model, ctx, hyp.tokens);
            for (int c = 0; c < model.config.vocab_size; ++c) {
                auto h = hyp;
                h.tokens.push_back(c);
                h.log_prob += logp[static_cast<std::size_t>(c)];
                if (c == bass::kEosId) {
                    if (h.log_prob > best.log_prob) {
                        h.finished = true;
                        best = std::move(h);
                    }
                } else if (step + 1 < max_len) {
                    next.push_back(std::move(h));
                }
            }
        }
        frontier = std::move(next);
    }
    return best;
}

}  // namespace

TEST_CASE("config validation") {
    InferConfig cfg;
    cfg.beam_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = InferConfig{};
    cfg.length_alpha = -0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    InferConfig{}.validate();
}

TEST_CASE("a model that always emits end-of-sequence produces an empty summary") {
    auto model = Summarizer<double>::random_init(tiny_config(), 2);
    model.params.at("out.b").values()[bass::kEosId] = 100.0;
    auto ctx = single_block_context(model, random_features(10, 4, 1));
    auto hyp = bass::greedy_decode(model, ctx, 16);
    CHECK(hyp.tokens == std::vector<int>{bass::kBosId, bass::kEosId});
    CHECK(hyp.finished);
    CHECK(hyp.generated_length() == 1);

    auto beam = bass::beam_search(model, ctx, InferConfig{});
    CHECK(beam.tokens == hyp.tokens);
}

TEST_CASE("decoding stops at max_decode_len and flags the unfinished hypothesis") {
    auto model = Summarizer<double>::random_init(tiny_config(), 2);
    model.params.at("out.b").values()[bass::kEosId] = -100.0;  // suppress EOS
    auto ctx = single_block_context(model, random_features(10, 4, 1));
    auto hyp = bass::greedy_decode(model, ctx, 5);
    CHECK_FALSE(hyp.finished);
    CHECK(hyp.generated_length() == 5);

    // a beam narrower than the vocabulary never admits the suppressed EOS,
    // so no hypothesis finishes and the best unfinished one comes back flagged
    InferConfig cfg;
    cfg.max_decode_len = 5;
    cfg.beam_size = 4;
    auto beam = bass::beam_search(model, ctx, cfg);
    CHECK_FALSE(beam.finished);
    CHECK(beam.generated_length() == 5);
}

TEST_CASE("argmax ties break toward the lowest token id") {
    auto model = Summarizer<double>::random_init(tiny_config(), 2);
    // uniform output distribution at every step
    for (auto& v : model.params.at("out.W").values()) v = 0.0;
    for (auto& v : model.params.at("out.b").values()) v = 0.0;
    auto ctx = single_block_context(model, random_features(10, 4, 1));
    auto hyp = bass::greedy_decode(model, ctx, 3);
    CHECK(hyp.tokens == std::vector<int>{bass::kBosId, 0, 0, 0});
}

TEST_CASE("beam of one reproduces greedy token for token") {
    for (unsigned seed : {3u, 8u, 21u}) {
        auto model = Summarizer<double>::random_init(tiny_config(), seed);
        auto ctx = single_block_context(model, random_features(12, 4, seed + 100));
        auto greedy = bass::greedy_decode(model, ctx, 8);
        InferConfig cfg;
        cfg.beam_size = 1;
        cfg.max_decode_len = 8;
        auto beam = bass::beam_search(model, ctx, cfg);
        CHECK(beam.tokens == greedy.tokens);
        CHECK(beam.log_prob == doctest::Approx(greedy.log_prob).epsilon(1e-12));
    }
}

TEST_CASE("a wide beam matches exhaustive enumeration on a tiny vocabulary") {
    InferConfig cfg;
    cfg.beam_size = 64;
    cfg.max_decode_len = 4;
    for (unsigned seed = 1; seed <= 12; ++seed) {
        auto model = Summarizer<double>::random_init(tiny_config(), seed);
        auto ctx = single_block_context(model, random_features(12, 4, seed * 77 + 3));
        auto oracle = exhaustive_best(model, ctx, cfg.max_decode_len);
        auto beam = bass::beam_search(model, ctx, cfg);
        REQUIRE(beam.finished);
        CHECK(beam.tokens == oracle.tokens);
        CHECK(beam.log_prob == doctest::Approx(oracle.log_prob).epsilon(1e-12));
    }
}

TEST_CASE("beam search can beat a finished greedy hypothesis") {
    // pinned case where greedy commits to an early token and pays for it
    auto model = Summarizer<double>::random_init(tiny_config(), 9);
    auto ctx = single_block_context(model, random_features(12, 4, 9 * 77 + 3));
    auto greedy = bass::greedy_decode(model, ctx, 8);
    InferConfig cfg;
    cfg.max_decode_len = 8;
    auto beam = bass::beam_search(model, ctx, cfg);
    REQUIRE(greedy.finished);
    REQUIRE(beam.finished);
    CHECK(beam.log_prob > greedy.log_prob);
    CHECK(beam.tokens != greedy.tokens);
}

TEST_CASE("block partitioning merges a too-short tail") {
    auto even = bass::partition_blocks(random_features(30, 4, 1), 10);
    REQUIRE(even.size() == 3);
    for (const auto& b : even) CHECK(b.dim(0) == 10);

    auto merged = bass::partition_blocks(random_features(25, 4, 1), 10);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].dim(0) == 10);
    CHECK(merged[1].dim(0) == 15);  // 5-frame tail cannot be subsampled

    auto whole = bass::partition_blocks(random_features(8, 4, 1), 100);
    REQUIRE(whole.size() == 1);
    CHECK(whole[0].dim(0) == 8);

    CHECK_THROWS_AS(bass::partition_blocks(random_features(8, 4, 1), 0), std::invalid_argument);
}

TEST_CASE("block inference over one block equals standard inference") {
    auto model = Summarizer<double>::random_init(tiny_config(), 5);
    auto features = random_features(20, 4, 9);
    InferConfig cfg;
    cfg.block_size_frames = 100;  // one block
    auto standard = bass::infer_standard(model, features, cfg);
    auto blockwise = bass::infer_block(model, features, cfg);
    REQUIRE(blockwise.per_block.size() == 1);
    CHECK(blockwise.final_hypothesis().tokens == standard.tokens);
    CHECK(blockwise.final_hypothesis().log_prob == standard.log_prob);
}

TEST_CASE("block inference re-decodes after every block") {
    auto model = Summarizer<double>::random_init(tiny_config(), 5);
    auto features = random_features(36, 4, 9);
    InferConfig cfg;
    cfg.block_size_frames = 12;
    auto result = bass::infer_block(model, features, cfg);
    CHECK(result.per_block.size() == 3);
    for (const auto& hyp : result.per_block) {
        CHECK(hyp.tokens.front() == bass::kBosId);
        CHECK(hyp.generated_length() >= 1);
    }
    CHECK_THROWS_AS(bass::infer_block(model, std::vector<T>{}, cfg), std::invalid_argument);
}

TEST_CASE("inference is deterministic") {
    auto model = Summarizer<double>::random_init(tiny_config(), 6);
    auto features = random_features(24, 4, 13);
    InferConfig cfg;
    cfg.block_size_frames = 12;
    auto a = bass::infer_block(model, features, cfg);
    auto b = bass::infer_block(model, features, cfg);
    REQUIRE(a.per_block.size() == b.per_block.size());
    for (std::size_t i = 0; i < a.per_block.size(); ++i) {
        CHECK(a.per_block[i].tokens == b.per_block[i].tokens);
        CHECK(a.per_block[i].log_prob == b.per_block[i].log_prob);
    }
}
