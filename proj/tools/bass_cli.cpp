// Command-line front end: data generation, training, adaptation, decoding,
// evaluation, a gradient self-check and the end-to-end bench pipeline.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bass/checkpoint.hpp"
#include "bass/config_file.hpp"
#include "bass/gradcheck.hpp"
#include "bass/infer.hpp"
#include "bass/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint_path;
    std::string base_checkpoint_path;
    std::string mode = "trunc";
    std::string strategy = "standard";
    std::string hyp_path, ref_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

bass::AppConfig load_app_config(const CommonArgs& args) {
    auto cfg = args.config_path.empty() ? bass::AppConfig{} : bass::parse_config(args.config_path);
    if (args.seed_set) {
        cfg.train.seed = args.seed;
        cfg.synthetic.seed = args.seed;
    }
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << text;
}

int cmd_gen_data(const CommonArgs& args) {
    auto cfg = load_app_config(args);
    auto dataset = bass::generate_synthetic(cfg.synthetic);
    bass::save_dataset(args.out_dir, dataset);
    std::cout << "wrote " << dataset.train.size() << " train / " << dataset.val.size() << " val / "
              << dataset.test.size() << " test utterances to " << args.out_dir << "\n";
    return 0;
}

std::string default_checkpoint(const CommonArgs& args, const std::string& name) {
    return args.checkpoint_path.empty() ? (fs::path(args.out_dir) / name).string() : args.checkpoint_path;
}

int finish_training(const CommonArgs& args, bass::TrainResult result, const std::string& ckpt_name,
                    const std::string& report_name) {
    fs::create_directories(args.out_dir);
    result.report.checkpoint_path = default_checkpoint(args, ckpt_name);
    bass::save_checkpoint(result.report.checkpoint_path, result.model);
    const std::string text = result.report.to_text();
    write_text((fs::path(args.out_dir) / report_name).string(), text);
    std::cout << text << "checkpoint " << result.report.checkpoint_path << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    auto cfg = load_app_config(args);
    cfg.train.mode = bass::train_mode_from_name(args.mode);
    if (cfg.train.mode == bass::TrainMode::bass_adapt)
        throw std::invalid_argument("use the adapt subcommand for mode bass_adapt");
    auto dataset = bass::load_dataset(args.data_dir);
    auto result = cfg.train.mode == bass::TrainMode::trunc ? bass::train_truncated(cfg.model, cfg.train, dataset.train)
                                                          : bass::bass_train(cfg.model, cfg.train, dataset.train);
    return finish_training(args, std::move(result), "model.ckpt", "train_report.txt");
}

int cmd_adapt(const CommonArgs& args) {
    auto cfg = load_app_config(args);
    cfg.train.mode = bass::TrainMode::bass_adapt;
    cfg.train.base_checkpoint =
        args.base_checkpoint_path.empty() ? cfg.train.base_checkpoint : args.base_checkpoint_path;
    if (cfg.train.base_checkpoint.empty()) throw std::invalid_argument("adapt requires --base-checkpoint");
    auto base = bass::load_checkpoint(cfg.train.base_checkpoint);
    auto dataset = bass::load_dataset(args.data_dir);
    auto result = bass::bass_adapt(base, cfg.model, cfg.train, dataset.train);
    return finish_training(args, std::move(result), "adapted.ckpt", "adapt_report.txt");
}

// Decodes the test split; hypotheses land in <out>/hyps.txt and the paired
// references in <out>/refs.txt, one line per utterance, sorted by id.
int cmd_infer(const CommonArgs& args) {
    auto cfg = load_app_config(args);
    if (args.checkpoint_path.empty()) throw std::invalid_argument("infer requires --checkpoint");
    auto model = bass::load_checkpoint(args.checkpoint_path);
    auto dataset = bass::load_dataset(args.data_dir);
    cfg.infer.max_decode_len = model.config.max_decode_len;

    auto split = dataset.test;
    std::sort(split.begin(), split.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::string hyps, refs;
    for (const auto& utt : split) {
        bass::Hypothesis<float> hyp;
        if (args.strategy == "standard") {
            hyp = bass::infer_standard(model, utt.features, cfg.infer);
        } else if (args.strategy == "block") {
            hyp = bass::infer_block(model, utt.features, cfg.infer).final_hypothesis();
        } else {
            throw std::invalid_argument("unknown strategy '" + args.strategy + "'");
        }
        hyps += dataset.vocab.detokenize(hyp.tokens) + "\n";
        refs += dataset.vocab.detokenize(utt.reference) + "\n";
    }
    fs::create_directories(args.out_dir);
    write_text((fs::path(args.out_dir) / "hyps.txt").string(), hyps);
    write_text((fs::path(args.out_dir) / "refs.txt").string(), refs);
    std::cout << "decoded " << split.size() << " utterances (" << args.strategy << ") to " << args.out_dir << "\n";
    return 0;
}

std::vector<bass::TokenList> read_token_lines(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<bass::TokenList> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(bass::split_tokens(line));
    return lines;
}

int cmd_eval(const CommonArgs& args) {
    auto scores = bass::corpus_rouge(read_token_lines(args.hyp_path), read_token_lines(args.ref_path));
    std::cout << bass::format_rouge_report(scores) << "\n";
    return 0;
}

int cmd_gradcheck() {
    bass::ModelConfig cfg;
    cfg.feature_dim = 8;
    cfg.model_dim = 16;
    cfg.heads = 4;
    cfg.encoder_layers = 2;
    cfg.decoder_layers = 2;
    cfg.ff_dim = 32;
    cfg.vocab_size = 12;
    double worst = 0.0;
    for (auto kind : {bass::UpdaterKind::concat, bass::UpdaterKind::gated, bass::UpdaterKind::hierarchical}) {
        cfg.updater_kind = kind;
        const double err = bass::full_model_grad_error<double>(cfg, 7);
        std::cout << bass::updater_kind_name(kind) << " max relative error " << err << "\n";
        worst = std::max(worst, err);
    }
    std::cout << "max relative error " << worst << "\n";
    if (worst >= 1e-4) {
        std::cout << "FAIL: tolerance 1e-4 exceeded\n";
        return 1;
    }
    return 0;
}

// End-to-end pipeline on one output directory: synthetic data, truncated
// pre-training, gated block-wise adaptation, decoding with both strategies
// and a final comparison table. Everything it writes is a deterministic
// function of (config, seed).
int cmd_bench(const CommonArgs& args) {
    auto cfg = load_app_config(args);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);

    auto dataset = bass::generate_synthetic(cfg.synthetic);
    bass::save_dataset((out / "data").string(), dataset);

    auto trunc = bass::train_truncated(cfg.model, cfg.train, dataset.train);
    bass::save_checkpoint((out / "trunc.ckpt").string(), trunc.model);
    write_text((out / "trunc_report.txt").string(), trunc.report.to_text());

    auto gated_cfg = cfg.model;
    gated_cfg.updater_kind = bass::UpdaterKind::gated;
    auto adapted = bass::bass_adapt(trunc.model, gated_cfg, cfg.train, dataset.train);
    bass::save_checkpoint((out / "adapted.ckpt").string(), adapted.model);
    write_text((out / "adapt_report.txt").string(), adapted.report.to_text());

    auto evaluate = [&](const bass::Summarizer<float>& model, bool blockwise) {
        std::vector<bass::TokenList> hyps, refs;
        for (const auto& utt : dataset.test) {
            auto hyp = blockwise ? bass::infer_block(model, utt.features, cfg.infer).final_hypothesis()
                                 : bass::infer_standard(model, utt.features, cfg.infer);
            hyps.push_back(bass::split_tokens(dataset.vocab.detokenize(hyp.tokens)));
            refs.push_back(bass::split_tokens(dataset.vocab.detokenize(utt.reference)));
        }
        return bass::corpus_rouge(hyps, refs);
    };

    std::ostringstream table;
    auto trunc_scores = evaluate(trunc.model, false);
    auto adapted_scores = evaluate(adapted.model, true);
    table << "trunc standard\t" << bass::format_rouge_report(trunc_scores) << "\n";
    table << "adapt block\t" << bass::format_rouge_report(adapted_scores) << "\n";
    write_text((out / "bench_report.txt").string(), table.str());
    std::cout << table.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"block-wise speech summarization toolkit"};
    app.require_subcommand(1);
    CommonArgs args;

    auto add_common = [&](CLI::App* sub, bool data, bool out) {
        sub->add_option("--config", args.config_path, "run configuration file");
        if (out) sub->add_option("--out", args.out_dir, "output directory")->required();
        if (data) sub->add_option("--data", args.data_dir, "dataset directory")->required();
        sub->add_option("--seed", args.seed, "override the configured seed")
            ->each([&](const std::string&) { args.seed_set = true; });
    };

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic benchmark dataset");
    add_common(gen, false, true);

    auto* train = app.add_subcommand("train", "train from scratch (trunc or bass_train)");
    add_common(train, true, true);
    train->add_option("--mode", args.mode, "trunc|bass_train")->check(CLI::IsMember({"trunc", "bass_train"}));
    train->add_option("--checkpoint", args.checkpoint_path, "checkpoint output path");

    auto* adapt = app.add_subcommand("adapt", "block-wise adaptation from a base checkpoint");
    add_common(adapt, true, true);
    adapt->add_option("--base-checkpoint", args.base_checkpoint_path, "checkpoint to adapt from");
    adapt->add_option("--checkpoint", args.checkpoint_path, "checkpoint output path");

    auto* infer = app.add_subcommand("infer", "decode the test split");
    add_common(infer, true, true);
    infer->add_option("--checkpoint", args.checkpoint_path, "model checkpoint")->required();
    infer->add_option("--strategy", args.strategy, "standard|block")->check(CLI::IsMember({"standard", "block"}));

    auto* eval = app.add_subcommand("eval", "score hypotheses against references");
    eval->add_option("--hyp", args.hyp_path, "hypothesis file, one summary per line")->required();
    eval->add_option("--ref", args.ref_path, "reference file, one summary per line")->required();

    app.add_subcommand("gradcheck", "finite-difference check of the full model");

    auto* bench = app.add_subcommand("bench", "run the full pipeline end to end");
    add_common(bench, false, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;  // usage errors exit 2
    }

    try {
        if (gen->parsed()) return cmd_gen_data(args);
        if (train->parsed()) return cmd_train(args);
        if (adapt->parsed()) return cmd_adapt(args);
        if (infer->parsed()) return cmd_infer(args);
        if (eval->parsed()) return cmd_eval(args);
        if (bench->parsed()) return cmd_bench(args);
        return cmd_gradcheck();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
