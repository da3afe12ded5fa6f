#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsd/textprep.hpp"

namespace hsd::lime {

using Mask = std::vector<std::uint8_t>;

// Bag-of-distinct-tokens view of a preprocessed text.
struct InterpretableInstance {
    text::TokenSequence tokens;             // full preprocessed sequence
    std::vector<std::string> features;      // distinct tokens, first-occurrence order
    std::vector<std::size_t> feature_of;    // feature index for each position in tokens

    static InterpretableInstance from_tokens(text::TokenSequence tokens);
    [[nodiscard]] std::size_t size() const { return features.size(); }
    // Tokens whose feature is on, original order, space-joined.
    [[nodiscard]] std::string render(const Mask& mask) const;
};

struct Perturbation {
    Mask mask;
    std::string text;
};

// Sample 0 keeps every feature. Each later sample removes a uniformly drawn
// number (1..F) of distinct features chosen without replacement.
std::vector<Perturbation> perturb(const InterpretableInstance& instance, std::size_t n_samples, std::uint64_t seed);

inline constexpr double kDefaultKernelWidth = 25.0;

// exp(-D^2 / width^2), D the cosine distance from mask to the all-ones vector
// (D = 1 for the all-zero mask).
double kernel_weight(const Mask& mask, double width = kDefaultKernelWidth);

struct TokenWeight {
    std::string token;
    double weight = 0;  // > 0 pushes toward Hate
};

struct Explanation {
    std::vector<TokenWeight> tokens;  // sorted by |weight| desc
    double intercept = 0;
    double score = 0;  // weighted R^2 of the local fit
    double prediction = 0;  // model output on the unperturbed text
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct LimeConfig {
    std::size_t n_samples = 1000;
    std::size_t top_k = 6;
    double kernel_width = kDefaultKernelWidth;
    double ridge_lambda = 1.0;
    std::uint64_t seed = 1;
};

// Weighted ridge (unpenalised intercept) of probabilities on masks; the top-k
// features by |coefficient| are reported. Throws if all masks are identical.
Explanation fit_local(const std::vector<Mask>& masks, std::span<const double> weights,
                      std::span<const double> probabilities, std::size_t k, const std::vector<std::string>& features,
                      double lambda = 1.0);

using Predictor = std::function<std::vector<double>(const std::vector<std::string>&)>;

Explanation explain(const Predictor& predictor, std::string_view text, const text::PipelineConfig& pipeline,
                    const LimeConfig& config);

nlohmann::json to_json(const Explanation& e);
// Standalone HTML page: each token of the text tinted by its weight (red
// toward Hate, blue toward NonHate), with a bar list of the top features.
std::string render_html(const Explanation& e, const text::TokenSequence& tokens, const std::string& title);

}  // namespace hsd::lime
