#pragma once

#include <vector>

#include "hsd/corpus.hpp"
#include "hsd/rng.hpp"

namespace hsd::test {

// Brute-force reference metrics, written without the library's helpers.
struct OracleMetrics {
    double p_hate, r_hate, f_hate;
    double p_non, r_non, f_non;
    double p_w, r_w, f_w;
    double auc;
};

inline double safe_div(double a, double b) { return b == 0 ? 0.0 : a / b; }

inline OracleMetrics oracle_metrics(const std::vector<double>& scores, const std::vector<corpus::Label>& truth,
                                    double threshold) {
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool pos = truth[i] == corpus::Label::Hate;
        tp += pred && pos;
        fp += pred && !pos;
        fn += !pred && pos;
        tn += !pred && !pos;
    }
    OracleMetrics m{};
    m.p_hate = safe_div(tp, tp + fp);
    m.r_hate = safe_div(tp, tp + fn);
    m.f_hate = safe_div(2 * m.p_hate * m.r_hate, m.p_hate + m.r_hate);
    m.p_non = safe_div(tn, tn + fn);
    m.r_non = safe_div(tn, tn + fp);
    m.f_non = safe_div(2 * m.p_non * m.r_non, m.p_non + m.r_non);
    const double n_pos = tp + fn, n_neg = tn + fp, n = n_pos + n_neg;
    m.p_w = (n_pos * m.p_hate + n_neg * m.p_non) / n;
    m.r_w = (n_pos * m.r_hate + n_neg * m.r_non) / n;
    m.f_w = (n_pos * m.f_hate + n_neg * m.f_non) / n;

    double credit = 0, pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (truth[i] != corpus::Label::Hate) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (truth[j] != corpus::Label::NonHate) continue;
            pairs += 1;
            if (scores[i] > scores[j]) credit += 1;
            else if (scores[i] == scores[j]) credit += 0.5;
        }
    }
    m.auc = credit / pairs;
    return m;
}

// Random labelled scores with both classes present. Scores are drawn from a
// small grid half the time so ties occur.
inline void random_scored_set(Rng& rng, std::size_t max_n, std::vector<double>& scores,
                              std::vector<corpus::Label>& truth) {
    const std::size_t n = 2 + rng.uniform_index(max_n - 1);
    const bool grid = rng.uniform_index(2) == 0;
    scores.assign(n, 0);
    truth.assign(n, corpus::Label::NonHate);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = grid ? static_cast<double>(rng.uniform_index(11)) / 10.0 : rng.uniform_real();
        truth[i] = rng.uniform_index(2) ? corpus::Label::Hate : corpus::Label::NonHate;
    }
    truth[0] = corpus::Label::Hate;
    truth[1] = corpus::Label::NonHate;
}

}  // namespace hsd::test
