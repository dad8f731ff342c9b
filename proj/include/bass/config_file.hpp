#pragma once

// "key = value" run configuration files: '#' comments, unknown keys
// rejected with line numbers, missing keys take the documented defaults.
// A few keys deliberately fan out to every config that shares them
// (feature_dim, seed, block_size_frames, max_decode_len, vocab_words).

#include <string>

#include "bass/data.hpp"
#include "bass/infer.hpp"
#include "bass/train.hpp"

namespace bass {

struct AppConfig {
    ModelConfig model;
    TrainConfig train;
    InferConfig infer;
    SyntheticConfig synthetic;

    void validate() const {
        model.validate();
        train.validate();
        infer.validate();
        synthetic.validate();
    }
};

AppConfig parse_config(const std::string& path);
AppConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

}  // namespace bass
