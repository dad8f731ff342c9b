#include "bass/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace bass {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(std::string("checkpoint: truncated file reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string shape_token(const Shape& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(shape[i]);
    }
    return out.empty() ? "scalar" : out;
}

Shape parse_shape_token(const std::string& token) {
    if (token == "scalar") return {};
    Shape shape;
    std::size_t pos = 0;
    while (pos < token.size()) {
        std::size_t next = token.find('x', pos);
        if (next == std::string::npos) next = token.size();
        shape.push_back(std::stoi(token.substr(pos, next - pos)));
        pos = next + 1;
    }
    return shape;
}

std::string config_manifest(const ModelConfig& cfg) {
    std::ostringstream os;
    os.precision(std::numeric_limits<double>::max_digits10);
    os << "config feature_dim " << cfg.feature_dim << "\n"
       << "config model_dim " << cfg.model_dim << "\n"
       << "config heads " << cfg.heads << "\n"
       << "config encoder_layers " << cfg.encoder_layers << "\n"
       << "config decoder_layers " << cfg.decoder_layers << "\n"
       << "config ff_dim " << cfg.ff_dim << "\n"
       << "config vocab_size " << cfg.vocab_size << "\n"
       << "config dropout_rate " << cfg.dropout_rate << "\n"
       << "config updater " << updater_kind_name(cfg.updater_kind) << "\n"
       << "config markov_window " << cfg.markov_window << "\n"
       << "config max_decode_len " << cfg.max_decode_len << "\n";
    return os.str();
}

void apply_config_line(ModelConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "feature_dim") cfg.feature_dim = std::stoi(value);
    else if (key == "model_dim") cfg.model_dim = std::stoi(value);
    else if (key == "heads") cfg.heads = std::stoi(value);
    else if (key == "encoder_layers") cfg.encoder_layers = std::stoi(value);
    else if (key == "decoder_layers") cfg.decoder_layers = std::stoi(value);
    else if (key == "ff_dim") cfg.ff_dim = std::stoi(value);
    else if (key == "vocab_size") cfg.vocab_size = std::stoi(value);
    else if (key == "dropout_rate") cfg.dropout_rate = std::stod(value);
    else if (key == "updater") cfg.updater_kind = updater_kind_from_name(value);
    else if (key == "markov_window") cfg.markov_window = std::stoi(value);
    else if (key == "max_decode_len") cfg.max_decode_len = std::stoi(value);
    else throw std::runtime_error("checkpoint: unknown config key '" + key + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const Summarizer<float>& model) {
    std::ostringstream manifest;
    manifest << config_manifest(model.config);
    std::uint64_t offset = 0;
    for (const auto& [name, p] : model.params) {
        manifest << name << " " << shape_token(p.shape()) << " f32 " << offset << "\n";
        offset += p.numel() * sizeof(float);
    }
    const std::string header = manifest.str();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(os, kCheckpointVersion);
    write_u32(os, static_cast<std::uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    static_assert(std::endian::native == std::endian::little, "payloads are little-endian");
    for (const auto& [name, p] : model.params)
        os.write(reinterpret_cast<const char*>(p.values().data()),
                 static_cast<std::streamsize>(p.numel() * sizeof(float)));
    if (!os) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

Summarizer<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[sizeof(kCheckpointMagic)];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    const std::uint32_t version = read_u32(is, "version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: version mismatch: got " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
    const std::uint32_t manifest_len = read_u32(is, "manifest length");
    std::string header(manifest_len, '\0');
    if (!is.read(header.data(), manifest_len))
        throw std::runtime_error("checkpoint: truncated file reading manifest");

    ModelConfig cfg;
    struct Entry {
        std::string name;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Entry> entries;
    std::istringstream lines(header);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string first;
        fields >> first;
        if (first == "config") {
            std::string key, value;
            fields >> key >> value;
            apply_config_line(cfg, key, value);
            continue;
        }
        Entry e;
        e.name = first;
        std::string shape_tok, dtype;
        fields >> shape_tok >> dtype >> e.offset;
        if (dtype != "f32") throw std::runtime_error("checkpoint: unsupported dtype '" + dtype + "' for " + e.name);
        e.shape = parse_shape_token(shape_tok);
        entries.push_back(std::move(e));
    }
    cfg.validate();

    // every parameter required by the config must be present with its shape
    auto expected = Summarizer<float>::parameter_shapes(cfg);
    if (entries.size() != expected.size())
        throw std::runtime_error("checkpoint: shape mismatch: manifest has " + std::to_string(entries.size()) +
                                 " parameters, config needs " + std::to_string(expected.size()));

    Summarizer<float> model;
    model.config = cfg;
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        auto it = std::find_if(expected.begin(), expected.end(), [&](const auto& kv) { return kv.first == e.name; });
        if (it == expected.end()) throw std::runtime_error("checkpoint: shape mismatch: unexpected parameter " + e.name);
        if (it->second != e.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + e.name + ": file has " + shape_token(e.shape) +
                                     ", config needs " + shape_token(it->second));
        if (e.offset != offset)
            throw std::runtime_error("checkpoint: shape mismatch: bad payload offset for " + e.name);
        Tensor<float> t = Tensor<float>::zeros(e.shape, /*requires_grad=*/true);
        if (!is.read(reinterpret_cast<char*>(t.values().data()),
                     static_cast<std::streamsize>(t.numel() * sizeof(float))))
            throw std::runtime_error("checkpoint: truncated file reading payload of " + e.name);
        model.params.emplace(e.name, std::move(t));
        offset += model.params.at(e.name).numel() * sizeof(float);
    }
    return model;
}

}  // namespace bass
