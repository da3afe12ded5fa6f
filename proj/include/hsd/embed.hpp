#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hsd/textprep.hpp"

namespace hsd::embed {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Token <-> index bijection. Index 0 is PAD, 1 is UNK; corpus tokens occupy
// 2..V-1 ordered by (frequency desc, token asc).
class Vocabulary {
public:
    Vocabulary();

    static Vocabulary build(const std::vector<text::TokenSequence>& corpus, std::size_t min_count);
    // tokens[0] and tokens[1] must be the PAD and UNK tokens. Counts default to 0.
    static Vocabulary from_tokens(std::vector<std::string> tokens, std::vector<std::uint64_t> counts = {});

    [[nodiscard]] std::size_t size() const { return tokens_.size(); }
    [[nodiscard]] std::optional<std::int32_t> find(std::string_view token) const;
    // UNK for unknown tokens.
    [[nodiscard]] std::int32_t index_of(std::string_view token) const;
    [[nodiscard]] const std::string& token(std::size_t index) const { return tokens_.at(index); }
    [[nodiscard]] std::uint64_t count(std::size_t index) const { return counts_.at(index); }
    [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }
    [[nodiscard]] const std::vector<std::uint64_t>& counts() const { return counts_; }

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::int32_t> index_;
};

// V x d row-major table tied to a vocabulary. Row 0 (PAD) is zero.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(Vocabulary vocab, std::size_t dim);
    EmbeddingMatrix(Vocabulary vocab, std::size_t dim, std::vector<float> values);

    [[nodiscard]] const Vocabulary& vocab() const { return vocab_; }
    [[nodiscard]] std::size_t rows() const { return vocab_.size(); }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    [[nodiscard]] std::span<float> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
    [[nodiscard]] const std::vector<float>& values() const { return values_; }
    [[nodiscard]] std::vector<float>& values() { return values_; }

    bool operator==(const EmbeddingMatrix&) const = default;

private:
    Vocabulary vocab_;
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

struct CbowConfig {
    int window = 5;
    int dim = 300;
    int negative = 5;
    int epochs = 5;
    double initial_lr = 0.025;
    double min_lr = 1e-4;
    std::size_t min_count = 5;
    double subsample_threshold = 1e-3;
    bool dynamic_window = true;  // radius drawn in 1..window per center
    std::uint64_t seed = 1;

    void validate() const;
};

struct CbowResult {
    EmbeddingMatrix embeddings;
    std::vector<double> epoch_objective;  // mean negative-sampling loss per center
};

// Tokens missing from vocab are dropped before windowing.
CbowResult train_cbow(const std::vector<text::TokenSequence>& corpus, const Vocabulary& vocab,
                      const CbowConfig& config);

// Negative-sampling loss for one center:
//   -log s(h.o_0) - sum_{j>0} log s(-h.o_j)   (row 0 positive, others negative)
// Gradients w.r.t. h and each output row are accumulated into grad_hidden and
// grad_rows (grad_rows[j] has the size of h). Returns the loss.
template <typename T>
T negative_sampling_step(std::span<const T> hidden, const std::vector<std::span<const T>>& rows,
                         std::span<T> grad_hidden, std::vector<std::span<T>>& grad_rows);

// Cosine similarity; 0 (with a logged warning) when either vector is all-zero.
double cosine(std::span<const float> u, std::span<const float> v);

struct Neighbor {
    std::string token;
    double score = 0;
};

// k most similar tokens by cosine, excluding the query, PAD and UNK. Ties break
// lexicographically. k is clamped to the number of eligible tokens.
std::vector<Neighbor> nearest(std::string_view word, std::size_t k, const EmbeddingMatrix& matrix);

// "V d" header, then "token v1 ... vd" per row. Floats are written in shortest
// round-trip form so load_text(save_text(m)) is exact.
void save_text(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
// If the file's first two tokens are not <pad> and <unk>, zero rows for them
// are prepended.
EmbeddingMatrix load_text(const std::filesystem::path& path);

}  // namespace hsd::embed
