#include "hsd/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "hsd/error.hpp"
#include "hsd/rng.hpp"

namespace hsd::lime {

InterpretableInstance InterpretableInstance::from_tokens(text::TokenSequence tokens) {
    InterpretableInstance inst;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& tok : tokens) {
        auto [it, inserted] = index.emplace(tok, inst.features.size());
        if (inserted) inst.features.push_back(tok);
        inst.feature_of.push_back(it->second);
    }
    inst.tokens = std::move(tokens);
    return inst;
}

std::string InterpretableInstance::render(const Mask& mask) const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!mask[feature_of[i]]) continue;
        if (!out.empty()) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::vector<Perturbation> perturb(const InterpretableInstance& instance, std::size_t n_samples, std::uint64_t seed) {
    const std::size_t f = instance.size();
    if (f == 0) throw ValidationError("perturb: instance has no features");
    if (n_samples < 2) throw ValidationError("perturb: need at least 2 samples");

    Rng rng(seed);
    std::vector<Perturbation> out;
    out.reserve(n_samples);
    Mask all(f, 1);
    out.push_back({all, instance.render(all)});

    std::vector<std::size_t> idx(f);
    for (std::size_t s = 1; s < n_samples; ++s) {
        const std::size_t remove = 1 + rng.uniform_index(f);
        std::iota(idx.begin(), idx.end(), 0);
        // Partial Fisher-Yates: the first `remove` slots are a uniform subset.
        for (std::size_t i = 0; i < remove; ++i) std::swap(idx[i], idx[i + rng.uniform_index(f - i)]);
        Mask m(f, 1);
        for (std::size_t i = 0; i < remove; ++i) m[idx[i]] = 0;
        out.push_back({m, instance.render(m)});
    }
    return out;
}

double kernel_weight(const Mask& mask, double width) {
    if (mask.empty()) throw ValidationError("kernel_weight: empty mask");
    const auto on = static_cast<double>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    // cos(mask, ones) = |on| / (sqrt(|on|) sqrt(F)) = sqrt(on / F)
    const double distance = on == 0 ? 1.0 : 1.0 - std::sqrt(on / static_cast<double>(mask.size()));
    return std::exp(-distance * distance / (width * width));
}

Explanation fit_local(const std::vector<Mask>& masks, std::span<const double> weights,
                      std::span<const double> probabilities, std::size_t k, const std::vector<std::string>& features,
                      double lambda) {
    const std::size_t n = masks.size();
    if (n < 2) throw ValidationError("fit_local: need at least 2 samples");
    if (k < 1) throw ValidationError("fit_local: k must be >= 1");
    if (weights.size() != n || probabilities.size() != n) throw ValidationError("fit_local: length mismatch");
    const std::size_t f = features.size();
    for (const auto& m : masks) {
        if (m.size() != f) throw ValidationError("fit_local: mask width does not match feature count");
    }
    if (std::all_of(masks.begin(), masks.end(), [&](const Mask& m) { return m == masks.front(); })) {
        throw ValidationError("fit_local: degenerate design, all masks identical");
    }

    using Eigen::MatrixXd, Eigen::VectorXd;
    MatrixXd x(n, f);
    VectorXd y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < f; ++j) x(i, j) = masks[i][j];
        y(i) = probabilities[i];
        w(i) = weights[i];
    }
    const double wsum = w.sum();
    if (!(wsum > 0)) throw ValidationError("fit_local: weights must have a positive sum");

    // Centre on the weighted means so the intercept stays unpenalised.
    const Eigen::RowVectorXd x_mean = (w.transpose() * x) / wsum;
    const double y_mean = w.dot(y) / wsum;
    const MatrixXd xc = x.rowwise() - x_mean;
    const VectorXd yc = y.array() - y_mean;
    const MatrixXd xtw = xc.transpose() * w.asDiagonal();
    MatrixXd gram = xtw * xc;
    gram.diagonal().array() += lambda;
    const VectorXd coef = gram.ldlt().solve(xtw * yc);

    Explanation e;
    e.intercept = y_mean - x_mean.dot(coef);
    const VectorXd fitted = (x * coef).array() + e.intercept;
    const double ss_res = (w.array() * (y - fitted).array().square()).sum();
    const double ss_tot = (w.array() * yc.array().square()).sum();
    e.score = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    e.n_samples = n;

    std::vector<std::size_t> order(f);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(coef(a)) > std::abs(coef(b)); });
    k = std::min(k, f);
    for (std::size_t i = 0; i < k; ++i) e.tokens.push_back({features[order[i]], coef(order[i])});
    return e;
}

Explanation explain(const Predictor& predictor, std::string_view text, const text::PipelineConfig& pipeline,
                    const LimeConfig& config) {
    auto instance = InterpretableInstance::from_tokens(text::preprocess(text, pipeline));
    if (instance.size() == 0) throw ValidationError("explain: text has no tokens after preprocessing");

    const auto samples = perturb(instance, config.n_samples, config.seed);
    std::vector<std::string> texts;
    std::vector<Mask> masks;
    std::vector<double> weights;
    texts.reserve(samples.size());
    for (const auto& s : samples) {
        texts.push_back(s.text);
        masks.push_back(s.mask);
        weights.push_back(kernel_weight(s.mask, config.kernel_width));
    }
    const auto probs = predictor(texts);
    if (probs.size() != texts.size()) throw ValidationError("explain: predictor returned the wrong number of scores");

    Explanation e = fit_local(masks, weights, probs, config.top_k, instance.features, config.ridge_lambda);
    e.prediction = probs.front();
    e.seed = config.seed;
    return e;
}

nlohmann::json to_json(const Explanation& e) {
    nlohmann::json tokens = nlohmann::json::array();
    for (const auto& t : e.tokens) tokens.push_back({{"token", t.token}, {"weight", t.weight}});
    return {{"tokens", tokens},          {"intercept", e.intercept}, {"fit_score", e.score},
            {"prediction", e.prediction}, {"n_samples", e.n_samples}, {"seed", e.seed}};
}

namespace {

std::string html_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string render_html(const Explanation& e, const text::TokenSequence& tokens, const std::string& title) {
    double max_abs = 0;
    std::unordered_map<std::string, double> weight;
    for (const auto& t : e.tokens) {
        weight[t.token] = t.weight;
        max_abs = std::max(max_abs, std::abs(t.weight));
    }
    auto color = [&](double w) {
        const double alpha = max_abs > 0 ? std::abs(w) / max_abs : 0.0;
        return w >= 0 ? fmt::format("rgba(214,39,40,{:.3f})", alpha) : fmt::format("rgba(31,119,180,{:.3f})", alpha);
    };

    std::string out = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" + html_escape(title) +
                      "</title>\n<style>body{font-family:sans-serif;margin:2em}span.tok{padding:2px 4px;margin:1px;"
                      "border-radius:3px;display:inline-block}table td{padding:2px 8px}</style></head><body>\n";
    out += "<h2>" + html_escape(title) + "</h2>\n";
    out += fmt::format("<p>P(hate) = {:.4f}; local fit R<sup>2</sup> = {:.4f}; {} samples, seed {}</p>\n", e.prediction,
                       e.score, e.n_samples, e.seed);
    out += "<p>";
    for (const auto& tok : tokens) {
        auto it = weight.find(tok);
        const double w = it == weight.end() ? 0.0 : it->second;
        out += fmt::format("<span class=\"tok\" style=\"background:{}\" title=\"{:+.4f}\">{}</span> ", color(w), w,
                           html_escape(tok));
    }
    out += "</p>\n<table>\n<tr><th>token</th><th>weight</th><th>toward</th></tr>\n";
    for (const auto& t : e.tokens) {
        out += fmt::format("<tr><td style=\"background:{}\">{}</td><td>{:+.4f}</td><td>{}</td></tr>\n", color(t.weight),
                           html_escape(t.token), t.weight, t.weight >= 0 ? "hate" : "non-hate");
    }
    out += "</table>\n</body></html>\n";
    return out;
}

}  // namespace hsd::lime
