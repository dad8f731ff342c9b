#include "bass/config_file.hpp"

#include <fstream>
#include <sstream>

namespace bass {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& message) {
    throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + message);
}

int parse_int(const std::string& origin, int line, const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        fail(origin, line, "malformed integer for '" + key + "': '" + value + "'");
    }
}

double parse_double(const std::string& origin, int line, const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        fail(origin, line, "malformed number for '" + key + "': '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& origin, int line, const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        fail(origin, line, "malformed unsigned integer for '" + key + "': '" + value + "'");
    }
}

void apply(AppConfig& cfg, const std::string& origin, int line, const std::string& key, const std::string& value) {
    auto as_int = [&] { return parse_int(origin, line, key, value); };
    auto as_double = [&] { return parse_double(origin, line, key, value); };

    // model
    if (key == "model_dim") cfg.model.model_dim = as_int();
    else if (key == "heads") cfg.model.heads = as_int();
    else if (key == "encoder_layers") cfg.model.encoder_layers = as_int();
    else if (key == "decoder_layers") cfg.model.decoder_layers = as_int();
    else if (key == "ff_dim") cfg.model.ff_dim = as_int();
    else if (key == "vocab_size") cfg.model.vocab_size = as_int();
    else if (key == "dropout_rate") cfg.model.dropout_rate = as_double();
    else if (key == "markov_window") cfg.model.markov_window = as_int();
    else if (key == "updater") {
        try {
            cfg.model.updater_kind = updater_kind_from_name(value);
        } catch (const std::exception& e) {
            fail(origin, line, e.what());
        }
    }
    // training
    else if (key == "epochs") cfg.train.epochs = as_int();
    else if (key == "peak_lr") cfg.train.peak_lr = as_double();
    else if (key == "warmup_steps") cfg.train.warmup_steps = as_int();
    else if (key == "adam_beta1") cfg.train.adam_beta1 = as_double();
    else if (key == "adam_beta2") cfg.train.adam_beta2 = as_double();
    else if (key == "adam_eps") cfg.train.adam_eps = as_double();
    else if (key == "label_smoothing") cfg.train.label_smoothing = as_double();
    else if (key == "grad_clip_norm") cfg.train.grad_clip_norm = as_double();
    else if (key == "weight_decay") cfg.train.weight_decay = as_double();
    else if (key == "train_maxlen_frames") cfg.train.train_maxlen_frames = as_int();
    else if (key == "mode") {
        try {
            cfg.train.mode = train_mode_from_name(value);
        } catch (const std::exception& e) {
            fail(origin, line, e.what());
        }
    } else if (key == "base_checkpoint") cfg.train.base_checkpoint = value;
    // inference
    else if (key == "beam_size") cfg.infer.beam_size = as_int();
    else if (key == "length_alpha") cfg.infer.length_alpha = as_double();
    // synthetic data
    else if (key == "frames_per_word") cfg.synthetic.frames_per_word = as_int();
    else if (key == "noise_sigma") cfg.synthetic.noise_sigma = as_double();
    else if (key == "keywords_per_utterance") cfg.synthetic.keywords_per_utterance = as_int();
    else if (key == "utterance_frames") cfg.synthetic.utterance_frames = as_int();
    else if (key == "num_train") cfg.synthetic.num_train = as_int();
    else if (key == "num_val") cfg.synthetic.num_val = as_int();
    else if (key == "num_test") cfg.synthetic.num_test = as_int();
    // shared keys
    else if (key == "feature_dim") cfg.model.feature_dim = cfg.synthetic.feature_dim = as_int();
    else if (key == "seed") cfg.train.seed = cfg.synthetic.seed = parse_u64(origin, line, key, value);
    else if (key == "block_size_frames") cfg.train.block_size_frames = cfg.infer.block_size_frames = as_int();
    else if (key == "max_decode_len") cfg.model.max_decode_len = cfg.infer.max_decode_len = as_int();
    else if (key == "vocab_words") {
        cfg.synthetic.vocab_words = as_int();
        cfg.model.vocab_size = cfg.synthetic.vocab_words + kNumReservedIds;
    } else {
        fail(origin, line, "unknown key '" + key + "'");
    }
}

}  // namespace

AppConfig parse_config_text(const std::string& text, const std::string& origin) {
    AppConfig cfg;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, line_no, "empty key");
        if (value.empty()) fail(origin, line_no, "empty value for '" + key + "'");
        apply(cfg, origin, line_no, key, value);
    }
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw std::invalid_argument(origin + ": " + e.what());
    }
    return cfg;
}

AppConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), path);
}

}  // namespace bass
