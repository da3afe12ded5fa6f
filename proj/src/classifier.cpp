#include "hsd/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <spdlog/spdlog.h>

#include "hsd/error.hpp"
#include "hsd/eval.hpp"
#include "hsd/rng.hpp"

namespace hsd::clf {

namespace fs = std::filesystem;
using nlohmann::json;

void ModelConfig::validate() const {
    if (embed_dim < 1 || max_len < 1 || hidden < 1 || dense1 < 1 || batch_size < 1 || epochs < 1) {
        throw ValidationError("model config: all sizes must be >= 1");
    }
    if (!(learning_rate > 0)) throw ValidationError("model config: learning_rate must be > 0");
    if (!(threshold > 0 && threshold < 1)) throw ValidationError("model config: threshold must be in (0, 1)");
    if (pipeline.max_len != max_len) throw ValidationError("model config: pipeline.max_len differs from max_len");
    pipeline.validate();
}

json to_json(const ModelConfig& c) {
    return {
        {"embed_dim", c.embed_dim},
        {"max_len", c.max_len},
        {"hidden", c.hidden},
        {"dense1", c.dense1},
        {"dense1_activation", nn::to_string(c.dense1_activation)},
        {"sequence_output", nn::to_string(c.sequence_output)},
        {"embeddings_trainable", c.embeddings_trainable},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"threshold", c.threshold},
        {"seed", c.seed},
        {"pipeline", text::to_json(c.pipeline)},
    };
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    try {
        c.embed_dim = j.at("embed_dim").get<int>();
        c.max_len = j.at("max_len").get<int>();
        c.hidden = j.at("hidden").get<int>();
        c.dense1 = j.at("dense1").get<int>();
        c.dense1_activation = nn::parse_activation(j.at("dense1_activation").get<std::string>());
        c.sequence_output = nn::parse_sequence_output(j.at("sequence_output").get<std::string>());
        c.embeddings_trainable = j.at("embeddings_trainable").get<bool>();
        c.batch_size = j.at("batch_size").get<int>();
        c.epochs = j.at("epochs").get<int>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.threshold = j.at("threshold").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.pipeline = text::pipeline_from_json(j.at("pipeline"));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const TrainHistory& h) {
    json epochs = json::array();
    for (const auto& e : h.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"validation_loss", e.validation_loss},
                          {"validation_weighted_f1", e.validation_weighted_f1}});
    }
    return {{"epochs", epochs}, {"selected_epoch", h.selected_epoch}};
}

TrainHistory history_from_json(const json& j) {
    TrainHistory h;
    try {
        for (const auto& e : j.at("epochs")) {
            h.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                                e.at("train_accuracy").get<double>(), e.at("validation_loss").get<double>(),
                                e.at("validation_weighted_f1").get<double>()});
        }
        h.selected_epoch = j.at("selected_epoch").get<int>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("train history: ") + e.what());
    }
    return h;
}

Model::Model(ModelConfig config, embed::Vocabulary vocab, nn::NetworkParams<float> params, TrainHistory history)
    : config_(std::move(config)), vocab_(std::move(vocab)), params_(std::move(params)), history_(std::move(history)) {}

Model Model::build(const ModelConfig& config, const embed::EmbeddingMatrix& embeddings) {
    config.validate();
    if (embeddings.dim() != static_cast<std::size_t>(config.embed_dim)) {
        throw ValidationError("embedding dimension " + std::to_string(embeddings.dim()) + " does not match model " +
                              std::to_string(config.embed_dim));
    }
    nn::NetworkShape shape;
    shape.vocab_size = embeddings.rows();
    shape.embed_dim = embeddings.dim();
    shape.hidden = static_cast<std::size_t>(config.hidden);
    shape.dense1 = static_cast<std::size_t>(config.dense1);
    shape.max_len = static_cast<std::size_t>(config.max_len);
    shape.dense1_activation = config.dense1_activation;
    shape.output = config.sequence_output;

    auto params = nn::init_network<float>(shape, config.seed);
    std::copy(embeddings.values().begin(), embeddings.values().end(), params.embedding.values().begin());
    std::fill_n(params.embedding.values().begin(), embeddings.dim(), 0.0f);  // PAD row

    Model m(config, embeddings.vocab(), std::move(params), {});
    m.check();
    return m;
}

void Model::check() const {
    config_.validate();
    if (params_.embedding.rows() != vocab_.size()) {
        throw ValidationError("checkpoint: vocabulary has " + std::to_string(vocab_.size()) +
                              " tokens but the embedding table has " + std::to_string(params_.embedding.rows()) +
                              " rows");
    }
    if (params_.embed_dim() != static_cast<std::size_t>(config_.embed_dim) ||
        params_.hidden() != static_cast<std::size_t>(config_.hidden) ||
        params_.dense1.weights.rows() != static_cast<std::size_t>(config_.dense1) ||
        params_.dense1.activation != config_.dense1_activation || params_.output != config_.sequence_output) {
        throw ValidationError("checkpoint: parameter shapes disagree with the model config");
    }
    params_.check(static_cast<std::size_t>(config_.max_len));
}

nn::IndexSequence Model::encode(std::string_view text) const {
    return text::encode(text::preprocess(text, config_.pipeline), vocab_, config_.max_len);
}

std::vector<float> Model::predict(std::span<const std::string> texts) const {
    std::vector<float> out;
    out.reserve(texts.size());
    std::vector<nn::IndexSequence> chunk;
    for (std::size_t start = 0; start < texts.size(); start += kPredictChunk) {
        const std::size_t end = std::min(texts.size(), start + kPredictChunk);
        chunk.clear();
        for (std::size_t i = start; i < end; ++i) chunk.push_back(encode(texts[i]));
        auto probs = nn::network_forward<float>(params_, chunk);
        out.insert(out.end(), probs.begin(), probs.end());
    }
    return out;
}

std::vector<corpus::Label> classify_probabilities(std::span<const float> probs, double threshold) {
    if (!(threshold > 0 && threshold < 1)) throw ValidationError("threshold must be in (0, 1)");
    std::vector<corpus::Label> out;
    out.reserve(probs.size());
    for (float p : probs) out.push_back(static_cast<double>(p) >= threshold ? corpus::Label::Hate : corpus::Label::NonHate);
    return out;
}

std::vector<corpus::Label> Model::classify(std::span<const std::string> texts, double threshold) const {
    return classify_probabilities(predict(texts), threshold);
}

namespace {

struct EncodedSet {
    std::vector<nn::IndexSequence> inputs;
    std::vector<float> labels;
    std::vector<corpus::Label> truth;
};

EncodedSet encode_split(const Model& model, const corpus::Dataset& data) {
    EncodedSet out;
    for (const auto& ex : data) {
        if (!ex.binary_label) throw ValidationError("train: example " + ex.id + " has no binary label");
        out.inputs.push_back(model.encode(ex.text));
        out.labels.push_back(*ex.binary_label == corpus::Label::Hate ? 1.0f : 0.0f);
        out.truth.push_back(*ex.binary_label);
    }
    return out;
}

// Mean loss and probabilities over a set, evaluated in fixed-size chunks.
std::pair<double, std::vector<float>> evaluate_set(const nn::NetworkParams<float>& params, const EncodedSet& set) {
    std::vector<float> probs;
    double loss_sum = 0;
    for (std::size_t start = 0; start < set.inputs.size(); start += kPredictChunk) {
        const std::size_t end = std::min(set.inputs.size(), start + kPredictChunk);
        std::span<const nn::IndexSequence> batch(set.inputs.data() + start, end - start);
        auto p = nn::network_forward<float>(params, batch);
        loss_sum += static_cast<double>(nn::bce<float>(p, std::span<const float>(set.labels.data() + start, end - start))) *
                    static_cast<double>(end - start);
        probs.insert(probs.end(), p.begin(), p.end());
    }
    return {loss_sum / static_cast<double>(set.inputs.size()), std::move(probs)};
}

}  // namespace

TrainResult train(const Model& initial, const corpus::SplitBundle& splits, const EpochCallback& on_epoch) {
    initial.check();
    const ModelConfig& cfg = initial.config();
    if (splits.train.empty()) throw ValidationError("train: empty training split");
    if (splits.validation.empty()) throw ValidationError("train: empty validation split");

    const EncodedSet train_set = encode_split(initial, splits.train);
    const EncodedSet val_set = encode_split(initial, splits.validation);

    Model current = initial;
    nn::NetworkParams<float>& params = current.params();
    nn::NetworkParams<float> grads = params.zeros_like();

    std::vector<std::span<float>> param_spans;
    std::vector<std::span<const float>> grad_spans;
    {
        std::vector<std::span<float>> all_grads;
        grads.for_each([&](const char*, nn::Tensor<float>& t) { all_grads.push_back(t.values()); });
        std::size_t k = 0;
        params.for_each([&](const char* name, nn::Tensor<float>& t) {
            if (std::string_view(name) != "embedding" || cfg.embeddings_trainable) {
                param_spans.push_back(t.values());
                grad_spans.emplace_back(all_grads[k]);
            }
            ++k;
        });
    }

    nn::AdamState<float> adam;
    adam.config.learning_rate = cfg.learning_rate;

    Rng rng(cfg.seed ^ 0x5DEECE66DULL);
    std::vector<std::size_t> order(train_set.inputs.size());
    std::vector<nn::IndexSequence> batch;
    std::vector<float> batch_labels;

    TrainResult result;
    double best_loss = std::numeric_limits<double>::infinity();
    nn::NetworkParams<float> best_params = params;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(train_set.inputs[order[i]]);
                batch_labels.push_back(train_set.labels[order[i]]);
            }
            const float loss = nn::network_loss_gradient<float>(params, batch, batch_labels, grads, cfg.embeddings_trainable);
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss in epoch " + std::to_string(epoch) + " at example offset " +
                                   std::to_string(start));
            }
            loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
            nn::adam_step<float>(param_spans, grad_spans, adam);
        }

        // Training accuracy over the full split with end-of-epoch parameters.
        auto train_probs = evaluate_set(params, train_set).second;
        auto train_pred = classify_probabilities(train_probs, cfg.threshold);
        for (std::size_t i = 0; i < train_pred.size(); ++i) correct += train_pred[i] == train_set.truth[i];

        auto [val_loss, val_probs] = evaluate_set(params, val_set);
        if (!std::isfinite(val_loss)) throw NumericError("train: non-finite validation loss in epoch " + std::to_string(epoch));
        auto val_cm = eval::confusion(classify_probabilities(val_probs, cfg.threshold), val_set.truth);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        rec.validation_loss = val_loss;
        rec.validation_weighted_f1 = eval::prf(val_cm).weighted.f1;
        result.history.epochs.push_back(rec);
        spdlog::info("epoch {}/{}: train loss {:.4f} acc {:.4f}, validation loss {:.4f} weighted F1 {:.4f}", epoch,
                     cfg.epochs, rec.train_loss, rec.train_accuracy, rec.validation_loss, rec.validation_weighted_f1);
        if (on_epoch) on_epoch(rec);

        if (val_loss < best_loss) {
            best_loss = val_loss;
            best_params = params;
            result.history.selected_epoch = epoch;
        }
    }

    current.set_history(result.history);
    result.last = current;
    result.best = current;
    result.best.params() = std::move(best_params);
    return result;
}

namespace {

constexpr char kMagic[8] = {'H', 'S', 'D', 'M', 'O', 'D', 'E', 'L'};

std::uint64_t fnv1a(std::span<const char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename U>
void put_le(std::string& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

}  // namespace

void save(const Model& model, const fs::path& path) {
    std::string data;
    json tensors = json::array();
    model.params().for_each([&](const char* name, const nn::Tensor<float>& t) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", data.size()}});
        for (float x : t.values()) put_le(data, std::bit_cast<std::uint32_t>(x));
    });

    json manifest;
    manifest["format_version"] = std::to_string(kFormatMajor) + "." + std::to_string(kFormatMinor);
    manifest["model_config"] = to_json(model.config());
    manifest["vocabulary"] = model.vocab().tokens();
    manifest["vocabulary_counts"] = model.vocab().counts();
    manifest["history"] = to_json(model.history());
    manifest["tensors"] = tensors;
    manifest["dtype"] = "float32-le";
    manifest["data_bytes"] = data.size();
    manifest["data_fnv1a"] = fnv1a(data);
    const std::string manifest_text = manifest.dump();

    std::string header(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(header, kFormatMajor);
    put_le<std::uint32_t>(header, kFormatMinor);
    put_le<std::uint64_t>(header, manifest_text.size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out << header << manifest_text << data;
    if (!out) throw IoError("write failed: " + path.string());
}

Model load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::string where = "checkpoint " + path.string() + ": ";
    constexpr std::size_t kHeader = sizeof kMagic + 4 + 4 + 8;
    if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw IoError(where + "corrupt file (bad header)");
    }
    const auto major = get_le<std::uint32_t>(bytes.data() + 8);
    if (major > kFormatMajor) {
        throw ValidationError(where + "format version " + std::to_string(major) + ".x is newer than supported " +
                              std::to_string(kFormatMajor) + ".x");
    }
    const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 16);
    if (manifest_len > bytes.size() - kHeader) throw IoError(where + "corrupt file (truncated manifest)");

    json manifest;
    try {
        manifest = json::parse(bytes.begin() + kHeader, bytes.begin() + static_cast<std::ptrdiff_t>(kHeader + manifest_len));
    } catch (const json::exception& e) {
        throw IoError(where + "corrupt file (manifest): " + e.what());
    }
    const std::string_view data(bytes.data() + kHeader + manifest_len, bytes.size() - kHeader - manifest_len);

    try {
        if (manifest.at("data_bytes").get<std::size_t>() != data.size()) {
            throw IoError(where + "corrupt file (tensor section is " + std::to_string(data.size()) + " bytes, expected " +
                          manifest.at("data_bytes").dump() + ")");
        }
        if (manifest.at("data_fnv1a").get<std::uint64_t>() != fnv1a(data)) {
            throw IoError(where + "corrupt file (checksum mismatch)");
        }

        ModelConfig config = model_config_from_json(manifest.at("model_config"));
        auto vocab = embed::Vocabulary::from_tokens(manifest.at("vocabulary").get<std::vector<std::string>>(),
                                                    manifest.at("vocabulary_counts").get<std::vector<std::uint64_t>>());
        TrainHistory history = history_from_json(manifest.at("history"));

        nn::NetworkParams<float> params;
        params.dense1.activation = config.dense1_activation;
        params.dense2.activation = nn::Activation::Sigmoid;
        params.output = config.sequence_output;
        const auto& tensors = manifest.at("tensors");
        std::size_t k = 0;
        params.for_each([&](const char* name, nn::Tensor<float>& t) {
            if (k >= tensors.size() || tensors[k].at("name").get<std::string>() != name) {
                throw ValidationError(where + "tensor list does not match the network layout at '" + name + "'");
            }
            auto shape = tensors[k].at("shape").get<std::vector<std::size_t>>();
            auto offset = tensors[k].at("offset").get<std::size_t>();
            std::size_t count = nn::Tensor<float>::element_count(shape);
            if (offset > data.size() || count > (data.size() - offset) / 4) {
                throw IoError(where + "corrupt file (tensor '" + std::string(name) + "' out of bounds)");
            }
            std::vector<float> values(count);
            for (std::size_t i = 0; i < count; ++i) {
                values[i] = std::bit_cast<float>(get_le<std::uint32_t>(data.data() + offset + 4 * i));
            }
            t = nn::Tensor<float>(std::move(shape), std::move(values));
            if (!t.all_finite()) throw NumericError(where + "tensor '" + std::string(name) + "' has non-finite values");
            ++k;
        });
        if (k != tensors.size()) throw ValidationError(where + "unexpected extra tensors");

        Model model(std::move(config), std::move(vocab), std::move(params), std::move(history));
        model.check();
        return model;
    } catch (const json::exception& e) {
        throw IoError(where + "corrupt file (manifest fields): " + e.what());
    }
}

}  // namespace hsd::clf
