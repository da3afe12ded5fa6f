#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsd/corpus.hpp"

namespace hsd::clf {
class Model;
}

namespace hsd::eval {

using corpus::Label;

// Hate is the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    [[nodiscard]] std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth);

struct Prf {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct ClassMetrics {
    Prf hate;
    Prf nonhate;
    Prf weighted;  // weights are the true-class supports
};

// Zero denominators give 0 for precision/recall, and F1 = 0 when P + R = 0.
ClassMetrics prf(const ConfusionMatrix& cm);

// Pairwise concordance: P(score_pos > score_neg) + 0.5 P(tie).
// Throws ValidationError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const Label> truth);

struct MetricsReport {
    ClassMetrics metrics;
    double accuracy = 0;
    std::optional<double> auc;  // absent for single-class inputs
    std::size_t support_hate = 0;
    std::size_t support_nonhate = 0;
    ConfusionMatrix confusion;
    double threshold = 0.5;
};

// Hate iff score >= threshold.
std::vector<Label> apply_threshold(std::span<const double> scores, double threshold);

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const Label> truth, double threshold = 0.5);

// predict -> classify -> metrics on a labelled split.
MetricsReport report(const clf::Model& model, const corpus::Dataset& test);

nlohmann::json to_json(const MetricsReport& r);
// Aligned table with columns P, R, F1-hate, F1-nonhate, weighted F1, AUC,
// followed by the confusion matrix.
std::string render_table(const MetricsReport& r, const std::string& title = "model");

struct ScoredId {
    std::string id;
    double score = 0;
};

// CSV "id,score" / "id,label" readers and writer.
std::vector<ScoredId> read_predictions(const std::filesystem::path& path);
std::vector<std::pair<std::string, Label>> read_labels(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, const std::vector<ScoredId>& predictions);

// Aligns predictions to labels by id and runs evaluate_scores. Every label id
// must have exactly one prediction and vice versa; scores must lie in [0, 1].
MetricsReport score_external(const std::filesystem::path& predictions, const std::filesystem::path& labels,
                             double threshold = 0.5);

}  // namespace hsd::eval
