#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hsd::embed {
class Vocabulary;
}

namespace hsd::text {

using TokenSequence = std::vector<std::string>;
using ContractionTable = std::map<std::string, std::string, std::less<>>;

// Resource lists shipped with the library (resources/*.txt).
std::set<std::string, std::less<>> bundled_stopwords();
ContractionTable bundled_contractions();
constexpr int kResourceVersion = 1;

// Tokens that negate; they never appear in a stopword list.
inline constexpr std::string_view kNegators[] = {"not", "no", "never"};

struct PipelineConfig {
    bool lowercase = true;
    bool expand_contractions = true;
    bool strip_punctuation = true;
    std::set<std::string, std::less<>> stopwords = bundled_stopwords();
    ContractionTable contractions = bundled_contractions();
    int max_len = 50;

    // Throws ValidationError if a negator is listed as a stopword or max_len < 1.
    void validate() const;

    bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_from_json(const nlohmann::json& j);

// Replaces every contraction found in the table (matched case-insensitively on
// runs of letters and apostrophes; U+2019 counts as an apostrophe).
std::string expand_contractions(std::string_view text, const ContractionTable& table);

// contraction expansion -> lowercase -> punctuation to spaces (URLs and
// @mentions dropped whole, '#' removed from hashtags) -> whitespace split ->
// stopword removal. No stemming, no spelling correction.
TokenSequence preprocess(std::string_view text, const PipelineConfig& config);

std::string join(const TokenSequence& tokens);

inline constexpr std::int32_t kPadIndex = 0;
inline constexpr std::int32_t kUnkIndex = 1;

// Fixed-length index sequence: truncated at the tail, right-padded with PAD.
std::vector<std::int32_t> encode(const TokenSequence& seq, const embed::Vocabulary& vocab, int max_len);

}  // namespace hsd::text
