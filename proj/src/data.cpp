#include "bass/data.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bass {

namespace fs = std::filesystem;

static const char* kReserved[kNumReservedIds] = {"<pad>", "<bos>", "<eos>", "<unk>"};

Vocabulary::Vocabulary() {
    for (const char* t : kReserved) {
        ids_.emplace(t, static_cast<int>(tokens_.size()));
        tokens_.push_back(t);
    }
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
    for (const auto& w : words) {
        if (ids_.count(w)) throw std::invalid_argument("vocabulary: duplicate token '" + w + "'");
        ids_.emplace(w, static_cast<int>(tokens_.size()));
        tokens_.push_back(w);
    }
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocabulary: id " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
    std::vector<int> out{kBosId};
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(id_of(tok));
    out.push_back(kEosId);
    return out;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kBosId || id == kEosId || id == kPadId) continue;
        if (!out.empty()) out += ' ';
        out += token_of(id);
    }
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("vocabulary: cannot read " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.size() < kNumReservedIds) throw std::runtime_error("vocabulary: missing reserved tokens in " + path);
    for (int i = 0; i < kNumReservedIds; ++i)
        if (lines[static_cast<std::size_t>(i)] != kReserved[i])
            throw std::runtime_error("vocabulary: reserved id " + std::to_string(i) + " is '" +
                                     lines[static_cast<std::size_t>(i)] + "' in " + path);
    return Vocabulary(std::vector<std::string>(lines.begin() + kNumReservedIds, lines.end()));
}

void SyntheticConfig::validate() const {
    if (feature_dim < 1 || frames_per_word < 1 || vocab_words < 2 || keywords_per_utterance < 1 ||
        utterance_frames < 1 || num_train < 0 || num_val < 0 || num_test < 0 || noise_sigma < 0.0)
        throw std::invalid_argument("synthetic config: invalid field");
    if (utterance_frames % frames_per_word != 0)
        throw std::invalid_argument("synthetic config: utterance_frames must be divisible by frames_per_word");
    const int slots = utterance_frames / frames_per_word;
    if (keywords_per_utterance > slots)
        throw std::invalid_argument("synthetic config: more keywords than word slots");
    if (keywords_per_utterance > vocab_words / 2)
        throw std::invalid_argument("synthetic config: more keywords than keyword vocabulary");
}

std::vector<Tensor<float>> segment_blocks(const Tensor<float>& features, int block_frames) {
    if (block_frames < 1) throw std::invalid_argument("segment_blocks: block size must be >= 1");
    const int n = features.dim(0);
    std::vector<Tensor<float>> blocks;
    for (int start = 0; start < n; start += block_frames)
        blocks.push_back(slice(features, 0, start, std::min(start + block_frames, n)));
    return blocks;
}

std::vector<Tensor<float>> segment_blocks_merged(const Tensor<float>& features, int block_frames) {
    auto blocks = segment_blocks(features, block_frames);
    if (blocks.size() > 1 && blocks.back().dim(0) < kSubsampleMinFrames) {
        auto tail = std::move(blocks.back());
        blocks.pop_back();
        blocks.back() = concat(std::vector<Tensor<float>>{blocks.back(), tail}, 0);
    }
    return blocks;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Utterance make_utterance(const SyntheticConfig& cfg, const std::vector<float>& templates,
                         const std::string& id, std::uint64_t utterance_index) {
    // fillers are the first half of the word vocabulary, keywords the second
    const int filler_count = cfg.vocab_words / 2;
    const int keyword_count = cfg.vocab_words - filler_count;
    const int slots = cfg.utterance_frames / cfg.frames_per_word;
    std::mt19937_64 rng(mix_seed(cfg.seed, utterance_index));

    std::vector<int> keyword_ids(static_cast<std::size_t>(keyword_count));
    for (int i = 0; i < keyword_count; ++i) keyword_ids[static_cast<std::size_t>(i)] = filler_count + i;
    for (int i = 0; i < cfg.keywords_per_utterance; ++i) {
        std::uniform_int_distribution<int> pick(i, keyword_count - 1);
        std::swap(keyword_ids[static_cast<std::size_t>(i)], keyword_ids[static_cast<std::size_t>(pick(rng))]);
    }

    // distinct slots, uniform over the whole utterance
    std::vector<int> slot_ids(static_cast<std::size_t>(slots));
    for (int i = 0; i < slots; ++i) slot_ids[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < cfg.keywords_per_utterance; ++i) {
        std::uniform_int_distribution<int> pick(i, slots - 1);
        std::swap(slot_ids[static_cast<std::size_t>(i)], slot_ids[static_cast<std::size_t>(pick(rng))]);
    }

    std::vector<int> words(static_cast<std::size_t>(slots), -1);
    std::vector<std::pair<int, int>> placed;  // (slot, word)
    for (int i = 0; i < cfg.keywords_per_utterance; ++i) {
        words[static_cast<std::size_t>(slot_ids[static_cast<std::size_t>(i)])] =
            keyword_ids[static_cast<std::size_t>(i)];
        placed.push_back({slot_ids[static_cast<std::size_t>(i)], keyword_ids[static_cast<std::size_t>(i)]});
    }
    std::uniform_int_distribution<int> filler(0, filler_count - 1);
    for (int s = 0; s < slots; ++s)
        if (words[static_cast<std::size_t>(s)] < 0) words[static_cast<std::size_t>(s)] = filler(rng);

    Utterance utt;
    utt.id = id;
    utt.features = Tensor<float>::zeros({cfg.utterance_frames, cfg.feature_dim});
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    const std::size_t word_span = static_cast<std::size_t>(cfg.frames_per_word) * cfg.feature_dim;
    for (int s = 0; s < slots; ++s) {
        const float* tpl = templates.data() + static_cast<std::size_t>(words[static_cast<std::size_t>(s)]) * word_span;
        float* dst = utt.features.values().data() + static_cast<std::size_t>(s) * word_span;
        for (std::size_t i = 0; i < word_span; ++i)
            dst[i] = tpl[i] + (cfg.noise_sigma > 0.0 ? static_cast<float>(noise(rng)) : 0.0f);
    }

    // reference = keywords in order of first appearance
    std::sort(placed.begin(), placed.end());
    utt.reference.push_back(kBosId);
    for (const auto& [slot, word] : placed) utt.reference.push_back(kNumReservedIds + word);
    utt.reference.push_back(kEosId);
    return utt;
}

std::string word_name(const SyntheticConfig& cfg, int word) {
    const int filler_count = cfg.vocab_words / 2;
    std::ostringstream os;
    if (word < filler_count)
        os << "f" << std::setw(2) << word;
    else
        os << "k" << std::setw(2) << (word - filler_count);
    std::string s = os.str();
    std::replace(s.begin(), s.end(), ' ', '0');
    return s;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::vector<std::string> words;
    for (int w = 0; w < cfg.vocab_words; ++w) words.push_back(word_name(cfg, w));

    // one fixed [frames_per_word, feature_dim] template per word
    std::mt19937_64 tpl_rng(mix_seed(cfg.seed, 0x7e5f00d5));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<float> templates(static_cast<std::size_t>(cfg.vocab_words) * cfg.frames_per_word * cfg.feature_dim);
    for (auto& v : templates) v = static_cast<float>(unit(tpl_rng));

    Dataset ds;
    ds.vocab = Vocabulary(words);
    std::uint64_t index = 0;
    auto fill = [&](std::vector<Utterance>& split, const char* name, int count) {
        for (int i = 0; i < count; ++i) {
            std::ostringstream id;
            id << name << "-" << std::setw(4) << std::setfill('0') << i;
            split.push_back(make_utterance(cfg, templates, id.str(), index++));
        }
    };
    fill(ds.train, "train", cfg.num_train);
    fill(ds.val, "val", cfg.num_val);
    fill(ds.test, "test", cfg.num_test);
    return ds;
}

// ---------------------------------------------------------------------------
// Binary feature I/O

static constexpr char kFeatureMagic[8] = {'B', 'A', 'S', 'S', 'F', 'E', 'A', 'T'};
static constexpr std::uint32_t kFeatureVersion = 1;

void save_features(const std::string& path, const Tensor<float>& features) {
    if (features.rank() != 2) throw std::invalid_argument("save_features: expects [N,D]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_features: cannot write " + path);
    out.write(kFeatureMagic, 8);
    const std::uint32_t version = kFeatureVersion;
    const std::uint64_t n = static_cast<std::uint64_t>(features.dim(0));
    const std::uint32_t d = static_cast<std::uint32_t>(features.dim(1));
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(features.values().data()),
              static_cast<std::streamsize>(features.numel() * sizeof(float)));
    if (!out) throw std::runtime_error("save_features: write failed for " + path);
}

Tensor<float> load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_features: cannot read " + path);
    char magic[8];
    if (!in.read(magic, 8)) throw std::runtime_error("load_features: " + path + ": truncated magic at byte 0");
    if (std::memcmp(magic, kFeatureMagic, 8) != 0)
        throw std::runtime_error("load_features: " + path + ": bad magic at byte 0");
    std::uint32_t version = 0, d = 0;
    std::uint64_t n = 0;
    if (!in.read(reinterpret_cast<char*>(&version), 4))
        throw std::runtime_error("load_features: " + path + ": truncated version at byte 8");
    if (version != kFeatureVersion)
        throw std::runtime_error("load_features: " + path + ": unsupported version " + std::to_string(version) +
                                 " at byte 8");
    if (!in.read(reinterpret_cast<char*>(&n), 8))
        throw std::runtime_error("load_features: " + path + ": truncated frame count at byte 12");
    if (!in.read(reinterpret_cast<char*>(&d), 4))
        throw std::runtime_error("load_features: " + path + ": truncated feature dim at byte 20");
    Tensor<float> out = Tensor<float>::zeros({static_cast<int>(n), static_cast<int>(d)});
    const std::streamsize payload = static_cast<std::streamsize>(out.numel() * sizeof(float));
    if (payload > 0 && !in.read(reinterpret_cast<char*>(out.values().data()), payload)) {
        const std::streamsize got = in.gcount();
        throw std::runtime_error("load_features: " + path + ": truncated payload at byte " +
                                 std::to_string(24 + got));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset directory layout

namespace {

void save_split(const std::string& dir, const std::string& name, const std::vector<Utterance>& split,
                std::ofstream& refs, int& next_line) {
    std::ofstream manifest(dir + "/manifest_" + name + ".tsv");
    if (!manifest) throw std::runtime_error("save_dataset: cannot write manifest for " + name);
    for (const auto& utt : split) {
        const std::string rel = "features/" + utt.id + ".feat";
        save_features(dir + "/" + rel, utt.features);
        manifest << rel << '\t' << next_line++ << '\n';
    }
    (void)refs;
}

std::vector<Utterance> load_split(const std::string& dir, const std::string& name,
                                  const std::vector<std::string>& ref_lines, const Vocabulary& vocab) {
    std::ifstream manifest(dir + "/manifest_" + name + ".tsv");
    if (!manifest) throw std::runtime_error("load_dataset: missing manifest for split " + name);
    std::vector<Utterance> split;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("load_dataset: malformed manifest line '" + line + "'");
        Utterance utt;
        const std::string rel = line.substr(0, tab);
        const std::size_t ref_index = std::stoul(line.substr(tab + 1));
        if (ref_index >= ref_lines.size())
            throw std::runtime_error("load_dataset: reference line " + std::to_string(ref_index) + " out of range");
        utt.id = fs::path(rel).stem().string();
        utt.features = load_features(dir + "/" + rel);
        utt.reference = vocab.tokenize(ref_lines[ref_index]);
        split.push_back(std::move(utt));
    }
    return split;
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& dataset) {
    fs::create_directories(dir + "/features");
    dataset.vocab.save(dir + "/vocab.txt");
    std::ofstream refs(dir + "/refs.txt");
    if (!refs) throw std::runtime_error("save_dataset: cannot write refs.txt");
    for (const auto* split : {&dataset.train, &dataset.val, &dataset.test})
        for (const auto& utt : *split) refs << dataset.vocab.detokenize(utt.reference) << '\n';
    int next_line = 0;
    save_split(dir, "train", dataset.train, refs, next_line);
    save_split(dir, "val", dataset.val, refs, next_line);
    save_split(dir, "test", dataset.test, refs, next_line);
}

Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    ds.vocab = Vocabulary::load(dir + "/vocab.txt");
    std::ifstream refs(dir + "/refs.txt");
    if (!refs) throw std::runtime_error("load_dataset: missing refs.txt in " + dir);
    std::vector<std::string> ref_lines;
    std::string line;
    while (std::getline(refs, line)) ref_lines.push_back(line);
    ds.train = load_split(dir, "train", ref_lines, ds.vocab);
    ds.val = load_split(dir, "val", ref_lines, ds.vocab);
    ds.test = load_split(dir, "test", ref_lines, ds.vocab);
    return ds;
}

}  // namespace bass
