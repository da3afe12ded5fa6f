#include "hsd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hsd/classifier.hpp"
#include "hsd/csv.hpp"
#include "hsd/error.hpp"

namespace hsd::eval {

namespace fs = std::filesystem;
using nlohmann::json;

ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth) {
    if (predicted.size() != truth.size()) throw ValidationError("confusion: length mismatch");
    if (predicted.empty()) throw ValidationError("confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == Label::Hate, t = truth[i] == Label::Hate;
        if (p && t) ++cm.tp;
        else if (p) ++cm.fp;
        else if (t) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

Prf make_prf(std::size_t tp, std::size_t fp, std::size_t fn) {
    Prf out;
    out.precision = ratio(tp, tp + fp);
    out.recall = ratio(tp, tp + fn);
    const double s = out.precision + out.recall;
    out.f1 = s == 0 ? 0.0 : 2 * out.precision * out.recall / s;
    return out;
}

}  // namespace

ClassMetrics prf(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ValidationError("prf: empty confusion matrix");
    ClassMetrics m;
    m.hate = make_prf(cm.tp, cm.fp, cm.fn);
    m.nonhate = make_prf(cm.tn, cm.fn, cm.fp);
    const double w_hate = ratio(cm.tp + cm.fn, cm.total());
    const double w_non = ratio(cm.tn + cm.fp, cm.total());
    m.weighted.precision = w_hate * m.hate.precision + w_non * m.nonhate.precision;
    m.weighted.recall = w_hate * m.hate.recall + w_non * m.nonhate.recall;
    m.weighted.f1 = w_hate * m.hate.f1 + w_non * m.nonhate.f1;
    return m;
}

double roc_auc(std::span<const double> scores, std::span<const Label> truth) {
    if (scores.size() != truth.size()) throw ValidationError("roc_auc: length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    for (double s : scores) {
        if (std::isnan(s)) throw ValidationError("roc_auc: NaN score");
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the number of concordant pairs, ties counted once: exact integer.
    unsigned long long twice_concordant = 0, neg_below = 0, positives = 0, negatives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        unsigned long long pos_group = 0, neg_group = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (truth[order[j]] == Label::Hate ? pos_group : neg_group) += 1;
            ++j;
        }
        twice_concordant += pos_group * (2 * neg_below + neg_group);
        neg_below += neg_group;
        positives += pos_group;
        negatives += neg_group;
        i = j;
    }
    if (positives == 0 || negatives == 0) throw ValidationError("roc_auc: both classes must be present");
    return static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

std::vector<Label> apply_threshold(std::span<const double> scores, double threshold) {
    std::vector<Label> out;
    out.reserve(scores.size());
    for (double s : scores) out.push_back(s >= threshold ? Label::Hate : Label::NonHate);
    return out;
}

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const Label> truth, double threshold) {
    if (scores.size() != truth.size()) throw ValidationError("evaluate: length mismatch");
    if (scores.empty()) throw ValidationError("evaluate: empty input");
    MetricsReport r;
    r.threshold = threshold;
    const auto predicted = apply_threshold(scores, threshold);
    r.confusion = confusion(predicted, truth);
    r.metrics = prf(r.confusion);
    r.accuracy = ratio(r.confusion.tp + r.confusion.tn, r.confusion.total());
    r.support_hate = r.confusion.tp + r.confusion.fn;
    r.support_nonhate = r.confusion.tn + r.confusion.fp;
    if (r.support_hate > 0 && r.support_nonhate > 0) {
        r.auc = roc_auc(scores, truth);
    } else {
        spdlog::warn("evaluate: single-class input, AUC omitted");
    }
    return r;
}

MetricsReport report(const clf::Model& model, const corpus::Dataset& test) {
    if (test.empty()) throw ValidationError("report: empty test split");
    std::vector<std::string> texts;
    std::vector<Label> truth;
    for (const auto& ex : test) {
        if (!ex.binary_label) throw ValidationError("report: example " + ex.id + " has no binary label");
        texts.push_back(ex.text);
        truth.push_back(*ex.binary_label);
    }
    const auto probs = model.predict(texts);
    const std::vector<double> scores(probs.begin(), probs.end());
    return evaluate_scores(scores, truth, model.config().threshold);
}

json to_json(const MetricsReport& r) {
    auto prf_json = [](const Prf& p) { return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; };
    json j;
    j["hate"] = prf_json(r.metrics.hate);
    j["nonhate"] = prf_json(r.metrics.nonhate);
    j["weighted"] = prf_json(r.metrics.weighted);
    j["accuracy"] = r.accuracy;
    j["auc"] = r.auc ? json(*r.auc) : json(nullptr);
    j["support"] = {{"hate", r.support_hate}, {"nonhate", r.support_nonhate}};
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}};
    j["threshold"] = r.threshold;
    return j;
}

std::string render_table(const MetricsReport& r, const std::string& title) {
    std::string out;
    out += fmt::format("{:<16} {:>8} {:>8} {:>9} {:>12} {:>8} {:>8}\n", "Model", "P", "R", "F1-hate", "F1-nonhate",
                       "F1", "AUC");
    const auto& m = r.metrics;
    out += fmt::format("{:<16} {:>8.4f} {:>8.4f} {:>9.4f} {:>12.4f} {:>8.4f} {:>8}\n", title, m.weighted.precision,
                       m.weighted.recall, m.hate.f1, m.nonhate.f1, m.weighted.f1,
                       r.auc ? fmt::format("{:.4f}", *r.auc) : std::string("n/a"));
    out += fmt::format("\naccuracy {:.4f}  threshold {}  support hate={} nonhate={}\n", r.accuracy, r.threshold,
                       r.support_hate, r.support_nonhate);
    out += "\nconfusion (rows = truth, cols = predicted)\n";
    out += fmt::format("{:<10} {:>10} {:>10}\n", "", "hate", "nonhate");
    out += fmt::format("{:<10} {:>10} {:>10}\n", "hate", r.confusion.tp, r.confusion.fn);
    out += fmt::format("{:<10} {:>10} {:>10}\n", "nonhate", r.confusion.fp, r.confusion.tn);
    return out;
}

std::vector<ScoredId> read_predictions(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("predictions file not found: " + path.string());
    auto table = csv::read_file(path);
    int id = table.column("id"), score = table.column("score");
    if (id < 0 || score < 0) throw ValidationError(path.string() + ": expected columns id,score");
    std::vector<ScoredId> out;
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) throw ValidationError(path.string() + ": ragged row");
        double s = 0;
        try {
            std::size_t used = 0;
            s = std::stod(row[score], &used);
            if (used != row[score].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ValidationError(path.string() + ": bad score '" + row[score] + "' for id " + row[id]);
        }
        if (!(s >= 0.0 && s <= 1.0)) {
            throw ValidationError(path.string() + ": score " + row[score] + " for id " + row[id] + " outside [0, 1]");
        }
        out.push_back({row[id], s});
    }
    return out;
}

std::vector<std::pair<std::string, Label>> read_labels(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("labels file not found: " + path.string());
    auto table = csv::read_file(path);
    int id = table.column("id"), label = table.column("label");
    if (id < 0 || label < 0) throw ValidationError(path.string() + ": expected columns id,label");
    std::vector<std::pair<std::string, Label>> out;
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) throw ValidationError(path.string() + ": ragged row");
        out.emplace_back(row[id], corpus::parse_label(row[label]));
    }
    return out;
}

void write_predictions(const fs::path& path, const std::vector<ScoredId>& predictions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write predictions: " + path.string());
    csv::write_row(out, {"id", "score"});
    for (const auto& p : predictions) csv::write_row(out, {p.id, fmt::format("{}", p.score)});
}

MetricsReport score_external(const fs::path& predictions, const fs::path& labels, double threshold) {
    const auto preds = read_predictions(predictions);
    const auto truth = read_labels(labels);

    std::unordered_map<std::string, double> by_id;
    for (const auto& p : preds) {
        if (!by_id.emplace(p.id, p.score).second) throw ValidationError("duplicate prediction id: " + p.id);
    }
    std::vector<double> scores;
    std::vector<Label> y;
    std::unordered_map<std::string, bool> seen;
    for (const auto& [id, label] : truth) {
        if (!seen.emplace(id, true).second) throw ValidationError("duplicate label id: " + id);
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("no prediction for labelled id: " + id);
        scores.push_back(it->second);
        y.push_back(label);
    }
    for (const auto& p : preds) {
        if (!seen.contains(p.id)) throw ValidationError("prediction for unknown id: " + p.id);
    }
    return evaluate_scores(scores, y, threshold);
}

}  // namespace hsd::eval
