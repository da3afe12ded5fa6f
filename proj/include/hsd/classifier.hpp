#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsd/corpus.hpp"
#include "hsd/embed.hpp"
#include "hsd/network.hpp"
#include "hsd/textprep.hpp"

namespace hsd::clf {

struct ModelConfig {
    int embed_dim = 300;
    int max_len = 50;
    int hidden = 128;
    int dense1 = 64;
    nn::Activation dense1_activation = nn::Activation::Identity;
    nn::SequenceOutput sequence_output = nn::SequenceOutput::FinalState;
    bool embeddings_trainable = false;
    int batch_size = 256;
    int epochs = 10;
    double learning_rate = 1e-3;
    double threshold = 0.5;
    std::uint64_t seed = 1;
    text::PipelineConfig pipeline;  // pipeline.max_len must equal max_len

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0;
    double train_accuracy = 0;
    double validation_loss = 0;
    double validation_weighted_f1 = 0;
    bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int selected_epoch = 0;  // epoch with the minimum validation loss, 0 if untrained
    bool operator==(const TrainHistory&) const = default;
};

nlohmann::json to_json(const TrainHistory& h);
TrainHistory history_from_json(const nlohmann::json& j);

// A complete, self-describing classifier: config, vocabulary, parameters and
// the history that produced them. Serves as the checkpoint value.
class Model {
public:
    Model() = default;

    // Copies the embedding table; seeds every other weight from config.seed.
    static Model build(const ModelConfig& config, const embed::EmbeddingMatrix& embeddings);

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] const embed::Vocabulary& vocab() const { return vocab_; }
    [[nodiscard]] const nn::NetworkParams<float>& params() const { return params_; }
    [[nodiscard]] nn::NetworkParams<float>& params() { return params_; }
    [[nodiscard]] const TrainHistory& history() const { return history_; }
    void set_history(TrainHistory h) { history_ = std::move(h); }

    [[nodiscard]] nn::IndexSequence encode(std::string_view text) const;

    // Probabilities in input order. Independent of how the texts are batched.
    [[nodiscard]] std::vector<float> predict(std::span<const std::string> texts) const;
    [[nodiscard]] std::vector<corpus::Label> classify(std::span<const std::string> texts, double threshold) const;

    // Throws ValidationError when vocabulary, embedding and layer shapes disagree.
    void check() const;

    bool operator==(const Model&) const = default;

private:
    Model(ModelConfig config, embed::Vocabulary vocab, nn::NetworkParams<float> params, TrainHistory history);
    friend Model load(const std::filesystem::path& path);

    ModelConfig config_;
    embed::Vocabulary vocab_;
    nn::NetworkParams<float> params_;
    TrainHistory history_;
};

inline constexpr std::size_t kPredictChunk = 256;

// Hate iff probability >= threshold.
std::vector<corpus::Label> classify_probabilities(std::span<const float> probs, double threshold);

struct TrainResult {
    Model best;  // parameters from the selected epoch, history attached
    Model last;  // parameters after the final epoch
    TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam on BCE with seeded shuffling; validation loss and weighted F1
// after each epoch; the best-validation-loss parameters are retained.
TrainResult train(const Model& initial, const corpus::SplitBundle& splits, const EpochCallback& on_epoch = {});

inline constexpr std::uint32_t kFormatMajor = 1;
inline constexpr std::uint32_t kFormatMinor = 0;

// Archive: "HSDMODEL", u32 major, u32 minor, u64 manifest length, JSON
// manifest, then each tensor as little-endian float32, row-major, in manifest
// order. The manifest carries an FNV-1a checksum of the tensor section.
void save(const Model& model, const std::filesystem::path& path);
Model load(const std::filesystem::path& path);

}  // namespace hsd::clf
