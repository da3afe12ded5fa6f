#include "hsd/embed.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "hsd/error.hpp"
#include "hsd/rng.hpp"

namespace hsd::embed {

namespace fs = std::filesystem;

Vocabulary::Vocabulary()
    : tokens_{std::string(kPadToken), std::string(kUnkToken)},
      counts_{0, 0},
      index_{{std::string(kPadToken), text::kPadIndex}, {std::string(kUnkToken), text::kUnkIndex}} {}

Vocabulary Vocabulary::build(const std::vector<text::TokenSequence>& corpus, std::size_t min_count) {
    if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");
    std::unordered_map<std::string, std::uint64_t> freq;
    for (const auto& sentence : corpus) {
        for (const auto& tok : sentence) {
            if (tok == kPadToken || tok == kUnkToken) continue;
            ++freq[tok];
        }
    }
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (auto& [tok, n] : freq) {
        if (n >= std::max<std::size_t>(min_count, 1)) kept.emplace_back(tok, n);
    }
    if (kept.empty()) throw ValidationError("build_vocab: no token reaches min_count");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
    std::vector<std::uint64_t> counts{0, 0};
    for (auto& [tok, n] : kept) {
        tokens.push_back(std::move(tok));
        counts.push_back(n);
    }
    return from_tokens(std::move(tokens), std::move(counts));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::vector<std::uint64_t> counts) {
    if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
        throw ValidationError("vocabulary must start with <pad>, <unk>");
    }
    if (counts.empty()) counts.assign(tokens.size(), 0);
    if (counts.size() != tokens.size()) throw ValidationError("vocabulary: counts/tokens size mismatch");
    Vocabulary v;
    v.index_.clear();
    v.index_.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].empty() || tokens[i].find_first_of(" \t\r\n") != std::string::npos) {
            throw ValidationError("vocabulary: invalid token at index " + std::to_string(i));
        }
        if (!v.index_.emplace(tokens[i], static_cast<std::int32_t>(i)).second) {
            throw ValidationError("vocabulary: duplicate token '" + tokens[i] + "'");
        }
    }
    v.tokens_ = std::move(tokens);
    v.counts_ = std::move(counts);
    return v;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::int32_t Vocabulary::index_of(std::string_view token) const {
    return find(token).value_or(text::kUnkIndex);
}

EmbeddingMatrix::EmbeddingMatrix(Vocabulary vocab, std::size_t dim)
    : vocab_(std::move(vocab)), dim_(dim), values_(vocab_.size() * dim, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(Vocabulary vocab, std::size_t dim, std::vector<float> values)
    : vocab_(std::move(vocab)), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw ValidationError("embedding dimension must be >= 1");
    if (values_.size() != vocab_.size() * dim_) {
        throw ValidationError("embedding table has " + std::to_string(values_.size()) + " values, expected " +
                              std::to_string(vocab_.size() * dim_));
    }
    for (float x : values_) {
        if (!std::isfinite(x)) throw NumericError("embedding table contains a non-finite value");
    }
}

void CbowConfig::validate() const {
    if (window < 1) throw ValidationError("cbow: window must be >= 1");
    if (dim < 1) throw ValidationError("cbow: dim must be >= 1");
    if (negative < 1) throw ValidationError("cbow: negative must be >= 1");
    if (epochs < 1) throw ValidationError("cbow: epochs must be >= 1");
    if (!(min_lr > 0) || !(initial_lr >= min_lr)) throw ValidationError("cbow: need initial_lr >= min_lr > 0");
    if (subsample_threshold < 0) throw ValidationError("cbow: subsample_threshold must be >= 0");
}

namespace {

template <typename T>
T stable_sigmoid(T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

// log(sigmoid(x)) without overflow.
template <typename T>
T log_sigmoid(T x) {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    T s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Sampling table over unigram^0.75 as cumulative weights.
class NoiseDistribution {
public:
    explicit NoiseDistribution(const Vocabulary& vocab) {
        cumulative_.reserve(vocab.size());
        double total = 0;
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            if (i >= 2) total += std::pow(static_cast<double>(vocab.count(i)), 0.75);
            cumulative_.push_back(total);
        }
        if (!(total > 0)) throw ValidationError("cbow: vocabulary has no counts for negative sampling");
    }

    std::int32_t sample(Rng& rng) const {
        double u = rng.uniform_real() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        auto idx = static_cast<std::int32_t>(std::min<std::ptrdiff_t>(it - cumulative_.begin(), cumulative_.size() - 1));
        return std::max(idx, 2);
    }

private:
    std::vector<double> cumulative_;
};

}  // namespace

template <typename T>
T negative_sampling_step(std::span<const T> hidden, const std::vector<std::span<const T>>& rows,
                         std::span<T> grad_hidden, std::vector<std::span<T>>& grad_rows) {
    T loss = 0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const T label = j == 0 ? T(1) : T(0);
        const T score = dot(hidden, rows[j]);
        loss -= j == 0 ? log_sigmoid(score) : log_sigmoid(-score);
        // d loss / d score = sigmoid(score) - label
        const T g = stable_sigmoid(score) - label;
        for (std::size_t k = 0; k < hidden.size(); ++k) {
            grad_hidden[k] += g * rows[j][k];
            grad_rows[j][k] += g * hidden[k];
        }
    }
    return loss;
}

template float negative_sampling_step<float>(std::span<const float>, const std::vector<std::span<const float>>&,
                                             std::span<float>, std::vector<std::span<float>>&);
template double negative_sampling_step<double>(std::span<const double>, const std::vector<std::span<const double>>&,
                                               std::span<double>, std::vector<std::span<double>>&);

CbowResult train_cbow(const std::vector<text::TokenSequence>& corpus, const Vocabulary& vocab,
                      const CbowConfig& config) {
    config.validate();
    const auto dim = static_cast<std::size_t>(config.dim);

    std::vector<std::vector<std::int32_t>> sentences;
    std::uint64_t total_words = 0;
    std::uint64_t trainable_centers = 0;
    for (const auto& s : corpus) {
        std::vector<std::int32_t> ids;
        for (const auto& tok : s) {
            auto id = vocab.find(tok);
            if (id && *id >= 2) ids.push_back(*id);
        }
        total_words += ids.size();
        if (ids.size() >= 2) trainable_centers += ids.size();
        sentences.push_back(std::move(ids));
    }
    if (trainable_centers == 0) throw ValidationError("train_cbow: corpus has no (center, context) pair");

    Rng rng(config.seed);
    std::vector<float> input(vocab.size() * dim, 0.0f);
    std::vector<float> output(vocab.size() * dim, 0.0f);
    for (std::size_t i = 2; i < vocab.size(); ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
            input[i * dim + k] = static_cast<float>((rng.uniform_real() - 0.5) / static_cast<double>(dim));
        }
    }
    auto in_row = [&](std::size_t i) { return std::span<float>(input.data() + i * dim, dim); };
    auto out_row = [&](std::size_t i) { return std::span<float>(output.data() + i * dim, dim); };

    NoiseDistribution noise(vocab);
    const double sample_cut = config.subsample_threshold * static_cast<double>(total_words);
    const double total_schedule = static_cast<double>(total_words) * config.epochs + 1;

    std::vector<float> hidden(dim), grad_hidden(dim);
    std::vector<std::vector<float>> grad_store(static_cast<std::size_t>(config.negative) + 1, std::vector<float>(dim));
    std::vector<std::int32_t> targets;
    std::vector<std::int32_t> kept;
    std::vector<std::int32_t> context;

    CbowResult result;
    std::uint64_t processed = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0;
        std::uint64_t centers = 0;
        for (const auto& sentence : sentences) {
            processed += sentence.size();
            kept.clear();
            for (auto id : sentence) {
                if (config.subsample_threshold > 0) {
                    double cn = static_cast<double>(vocab.count(static_cast<std::size_t>(id)));
                    double keep_prob = (std::sqrt(cn / sample_cut) + 1) * sample_cut / cn;
                    if (keep_prob < rng.uniform_real()) continue;
                }
                kept.push_back(id);
            }
            if (kept.size() < 2) continue;

            double lr = config.initial_lr * (1.0 - static_cast<double>(processed) / total_schedule);
            lr = std::max(lr, config.min_lr);

            for (std::size_t pos = 0; pos < kept.size(); ++pos) {
                std::size_t radius = config.dynamic_window
                                         ? 1 + rng.uniform_index(static_cast<std::size_t>(config.window))
                                         : static_cast<std::size_t>(config.window);
                context.clear();
                std::size_t lo = pos >= radius ? pos - radius : 0;
                std::size_t hi = std::min(kept.size() - 1, pos + radius);
                for (std::size_t c = lo; c <= hi; ++c) {
                    if (c != pos) context.push_back(kept[c]);
                }
                if (context.empty()) continue;

                std::fill(hidden.begin(), hidden.end(), 0.0f);
                for (auto c : context) {
                    auto r = in_row(static_cast<std::size_t>(c));
                    for (std::size_t k = 0; k < dim; ++k) hidden[k] += r[k];
                }
                const float inv = 1.0f / static_cast<float>(context.size());
                for (auto& h : hidden) h *= inv;

                targets.clear();
                targets.push_back(kept[pos]);
                for (int n = 0; n < config.negative; ++n) {
                    auto neg = noise.sample(rng);
                    if (neg != kept[pos]) targets.push_back(neg);
                }

                std::vector<std::span<const float>> rows;
                std::vector<std::span<float>> grads;
                for (std::size_t j = 0; j < targets.size(); ++j) {
                    rows.emplace_back(out_row(static_cast<std::size_t>(targets[j])));
                    std::fill(grad_store[j].begin(), grad_store[j].end(), 0.0f);
                    grads.emplace_back(grad_store[j]);
                }
                std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0f);
                loss_sum += negative_sampling_step<float>(hidden, rows, grad_hidden, grads);
                ++centers;

                const auto step = static_cast<float>(lr);
                for (std::size_t j = 0; j < targets.size(); ++j) {
                    auto r = out_row(static_cast<std::size_t>(targets[j]));
                    for (std::size_t k = 0; k < dim; ++k) r[k] -= step * grads[j][k];
                }
                // Each context row receives the full hidden-layer error, as in
                // the reference CBOW trainer.
                for (auto c : context) {
                    auto r = in_row(static_cast<std::size_t>(c));
                    for (std::size_t k = 0; k < dim; ++k) r[k] -= step * grad_hidden[k];
                }
            }
        }
        double mean = centers ? loss_sum / static_cast<double>(centers) : 0.0;
        if (!std::isfinite(mean)) throw NumericError("train_cbow: non-finite objective in epoch " + std::to_string(epoch));
        result.epoch_objective.push_back(mean);
        spdlog::debug("cbow epoch {} objective {:.6f}", epoch + 1, mean);
    }

    result.embeddings = EmbeddingMatrix(vocab, dim, std::move(input));
    return result;
}

double cosine(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) {
        throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                              std::to_string(v.size()) + ")");
    }
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += static_cast<double>(u[i]) * v[i];
        uu += static_cast<double>(u[i]) * u[i];
        vv += static_cast<double>(v[i]) * v[i];
    }
    if (uu == 0 || vv == 0) {
        spdlog::warn("cosine: zero vector, similarity defined as 0");
        return 0.0;
    }
    return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<Neighbor> nearest(std::string_view word, std::size_t k, const EmbeddingMatrix& matrix) {
    if (k < 1) throw ValidationError("nearest: k must be >= 1");
    auto query = matrix.vocab().find(word);
    if (!query) throw ValidationError("nearest: out-of-vocabulary query '" + std::string(word) + "'");

    auto q = matrix.row(static_cast<std::size_t>(*query));
    double qq = 0;
    for (float x : q) qq += static_cast<double>(x) * x;

    std::vector<Neighbor> all;
    for (std::size_t i = 2; i < matrix.rows(); ++i) {
        if (static_cast<std::int32_t>(i) == *query) continue;
        auto r = matrix.row(i);
        double rr = 0, qr = 0;
        for (std::size_t d = 0; d < r.size(); ++d) {
            rr += static_cast<double>(r[d]) * r[d];
            qr += static_cast<double>(q[d]) * r[d];
        }
        double score = (qq == 0 || rr == 0) ? 0.0 : std::clamp(qr / (std::sqrt(qq) * std::sqrt(rr)), -1.0, 1.0);
        all.push_back({matrix.vocab().token(i), score});
    }
    k = std::min(k, all.size());
    auto by_rank = [](const Neighbor& a, const Neighbor& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.token < b.token;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), by_rank);
    all.resize(k);
    return all;
}

void save_text(const EmbeddingMatrix& matrix, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embeddings: " + path.string());
    out << matrix.rows() << ' ' << matrix.dim() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        out << matrix.vocab().token(i);
        for (float x : matrix.row(i)) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

EmbeddingMatrix load_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read embeddings: " + path.string());

    auto split_ws = [](const std::string& line) {
        std::vector<std::string_view> out;
        std::string_view s = line;
        std::size_t i = 0;
        while (i < s.size()) {
            while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
            std::size_t b = i;
            while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
            if (i > b) out.push_back(s.substr(b, i - b));
        }
        return out;
    };
    auto parse_num = [&](std::string_view s, auto& value, std::size_t lineno) {
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + std::string(s) + "'");
        }
    };

    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
    auto header = split_ws(line);
    if (header.size() != 2) throw ValidationError(path.string() + ": malformed header, expected 'V d'");
    std::size_t rows = 0, dim = 0;
    parse_num(header[0], rows, 1);
    parse_num(header[1], dim, 1);
    if (dim == 0) throw ValidationError(path.string() + ": dimension must be >= 1");

    std::vector<std::string> tokens;
    std::vector<float> values;
    tokens.reserve(rows);
    values.reserve(rows * dim);
    std::unordered_set<std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (fields.size() != dim + 1) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected token and " +
                                  std::to_string(dim) + " values, got " + std::to_string(fields.size()) + " fields");
        }
        std::string tok(fields[0]);
        if (!seen.insert(tok).second) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": duplicate token '" + tok + "'");
        }
        tokens.push_back(std::move(tok));
        for (std::size_t d = 0; d < dim; ++d) {
            float v = 0;
            parse_num(fields[d + 1], v, lineno);
            values.push_back(v);
        }
    }
    if (tokens.size() != rows) {
        throw ValidationError(path.string() + ": header declares " + std::to_string(rows) + " rows, found " +
                              std::to_string(tokens.size()));
    }

    bool reserved = tokens.size() >= 2 && tokens[0] == kPadToken && tokens[1] == kUnkToken;
    if (!reserved) {
        if (seen.contains(std::string(kPadToken)) || seen.contains(std::string(kUnkToken))) {
            throw ValidationError(path.string() + ": reserved tokens must be the first two rows");
        }
        tokens.insert(tokens.begin(), {std::string(kPadToken), std::string(kUnkToken)});
        values.insert(values.begin(), 2 * dim, 0.0f);
    }
    return EmbeddingMatrix(Vocabulary::from_tokens(std::move(tokens)), dim, std::move(values));
}

}  // namespace hsd::embed
