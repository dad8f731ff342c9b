#pragma once

// Block segmentation, the synthetic long-input summarization benchmark,
// tokenization and binary feature-file I/O.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "bass/model.hpp"

namespace bass {

class Vocabulary {
  public:
    Vocabulary();  // reserved tokens only
    explicit Vocabulary(const std::vector<std::string>& words);  // reserved + words

    int size() const { return static_cast<int>(tokens_.size()); }
    int id_of(const std::string& token) const;  // kUnkId for unknown
    const std::string& token_of(int id) const;

    std::vector<int> tokenize(const std::string& text) const;    // adds BOS/EOS
    std::string detokenize(const std::vector<int>& ids) const;   // strips BOS/EOS/PAD

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

struct SyntheticConfig {
    int feature_dim = 16;
    int frames_per_word = 4;
    double noise_sigma = 0.1;
    int vocab_words = 64;
    int keywords_per_utterance = 6;
    int utterance_frames = 1200;
    int num_train = 400;
    int num_val = 20;
    int num_test = 50;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Utterance {
    std::string id;
    Tensor<float> features;       // [N, D]
    std::vector<int> reference;   // BOS ... EOS
};

struct Dataset {
    Vocabulary vocab;
    std::vector<Utterance> train, val, test;
};

// Partition of [0,N) into abutting spans of B frames; the final block keeps
// the remainder. Callers apply the short-tail merge rule where needed.
std::vector<Tensor<float>> segment_blocks(const Tensor<float>& features, int block_frames);

// Like segment_blocks, but a final block shorter than the subsampling
// minimum is merged into the preceding one.
std::vector<Tensor<float>> segment_blocks_merged(const Tensor<float>& features, int block_frames);

Dataset generate_synthetic(const SyntheticConfig& config);

// Binary feature file: magic "BASSFEAT", version u32=1, N u64, D u32, then
// N*D little-endian f32, row-major.
void save_features(const std::string& path, const Tensor<float>& features);
Tensor<float> load_features(const std::string& path);

// Writes features/, refs.txt, manifest.tsv and vocab.txt under `dir`.
void save_dataset(const std::string& dir, const Dataset& dataset);
Dataset load_dataset(const std::string& dir);

}  // namespace bass
