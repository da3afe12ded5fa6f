#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hsd/classifier.hpp"
#include "hsd/corpus.hpp"
#include "hsd/embed.hpp"
#include "hsd/rng.hpp"

namespace hsd::test {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = fs::temp_directory_path() / fmt::format("hsd-{}-{}-{}", tag, ::getpid(), counter++);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    fs::path operator/(const std::string& name) const { return path / name; }
};

inline void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline fs::path source_dir() { return fs::path(HSD_SOURCE_DIR); }

inline const std::vector<std::string>& keywords() {
    static const std::vector<std::string> k{"scum", "vermin", "filth", "savages", "parasites"};
    return k;
}

// Label = presence of any keyword. Filler tokens are "w0".."w{n-1}" pseudo-words.
inline corpus::Dataset keyword_dataset(std::size_t n, std::uint64_t seed, std::size_t filler = 200) {
    Rng rng(seed);
    corpus::Dataset out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t len = 5 + rng.uniform_index(11);
        std::vector<std::string> words;
        for (std::size_t j = 0; j < len; ++j) words.push_back(fmt::format("w{}", rng.uniform_index(filler)));
        const bool hate = rng.uniform_index(2) == 1;
        if (hate) {
            const std::size_t k = 1 + rng.uniform_index(2);
            for (std::size_t j = 0; j < k; ++j) {
                words.insert(words.begin() + static_cast<long>(rng.uniform_index(words.size() + 1)),
                             keywords()[rng.uniform_index(keywords().size())]);
            }
        }
        std::string text;
        for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
        out.push_back({fmt::format("kw-{}", i), text, hate ? "hate" : "nonhate",
                       hate ? corpus::Label::Hate : corpus::Label::NonHate});
    }
    return out;
}

// Two disjoint 50-token topic vocabularies ("a0".."a49", "b0".."b49"); each
// sentence draws all its tokens from one topic.
inline std::vector<text::TokenSequence> two_topic_corpus(std::size_t sentences, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<text::TokenSequence> out;
    for (std::size_t i = 0; i < sentences; ++i) {
        const char topic = rng.uniform_index(2) ? 'b' : 'a';
        text::TokenSequence s;
        const std::size_t len = 8 + rng.uniform_index(5);
        for (std::size_t j = 0; j < len; ++j) s.push_back(fmt::format("{}{}", topic, rng.uniform_index(50)));
        out.push_back(std::move(s));
    }
    return out;
}

// Hand-set classifier that outputs ~1 iff "scum" occurs. h = 1, d = 1: the
// keyword has embedding 1, everything else 0; gates i, f, o saturate open and
// the candidate is tanh(5x), so the cell stays near 0 without the keyword.
inline clf::Model perfect_keyword_model() {
    auto vocab = embed::Vocabulary::from_tokens({"<pad>", "<unk>", "scum", "hello", "world", "friend"});
    embed::EmbeddingMatrix emb(vocab, 1, {0.f, 0.f, 1.f, 0.f, 0.f, 0.f});
    clf::ModelConfig cfg;
    cfg.embed_dim = 1;
    cfg.hidden = 1;
    cfg.dense1 = 1;
    cfg.max_len = 8;
    cfg.pipeline.max_len = 8;
    auto model = clf::Model::build(cfg, emb);
    auto& p = model.params();
    for (auto* lstm : {&p.forward, &p.backward}) {
        lstm->w_input.fill(0.f);
        lstm->w_recurrent.fill(0.f);
        lstm->bias.storage() = {10.f, 10.f, 0.f, 10.f};
        lstm->w_input.storage() = {0.f, 0.f, 5.f, 0.f};
    }
    p.dense1.weights.storage() = {1.f, 1.f};
    p.dense1.bias.storage() = {0.f};
    p.dense2.weights.storage() = {10.f};
    p.dense2.bias.storage() = {-5.f};
    model.check();
    return model;
}

}  // namespace hsd::test
