#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hsd/error.hpp"
#include "hsd/explain.hpp"
#include "hsd/neural.hpp"
#include "support.hpp"

using namespace hsd;

namespace {

bool has_token(const std::string& text, const std::string& word) {
    std::istringstream in(text);
    std::string t;
    while (in >> t) {
        if (t == word) return true;
    }
    return false;
}

lime::Predictor keyword_predictor(const std::string& word, double a = 4, double b = -2) {
    return [=](const std::vector<std::string>& texts) {
        std::vector<double> out;
        for (const auto& t : texts) out.push_back(nn::sigmoid(a * (has_token(t, word) ? 1.0 : 0.0) + b));
        return out;
    };
}

text::PipelineConfig no_stopwords() {
    text::PipelineConfig p;
    p.stopwords.clear();
    return p;
}

}  // namespace

TEST_CASE("interpretable instance: distinct features, rendering") {
    auto inst = lime::InterpretableInstance::from_tokens({"a", "b", "a", "c"});
    CHECK(inst.features == std::vector<std::string>{"a", "b", "c"});
    CHECK(inst.feature_of == std::vector<std::size_t>{0, 1, 0, 2});
    CHECK(inst.render({1, 1, 1}) == "a b a c");
    CHECK(inst.render({0, 1, 1}) == "b c");
    CHECK(inst.render({0, 0, 0}).empty());
}

TEST_CASE("perturb: exhaustive single feature, first sample, determinism") {
    auto one = lime::InterpretableInstance::from_tokens({"x"});
    auto p = lime::perturb(one, 2, 1);
    REQUIRE(p.size() == 2);
    CHECK(p[0].mask == lime::Mask{1});
    CHECK(p[1].mask == lime::Mask{0});

    auto inst = lime::InterpretableInstance::from_tokens({"you", "are", "scum", "and", "scum"});
    auto a = lime::perturb(inst, 200, 9), b = lime::perturb(inst, 200, 9);
    CHECK(a[0].text == "you are scum and scum");
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].mask == b[i].mask);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(std::count(a[i].mask.begin(), a[i].mask.end(), 1) < 4);
    CHECK_THROWS_AS(lime::perturb(lime::InterpretableInstance::from_tokens({}), 10, 1), ValidationError);
}

TEST_CASE("kernel weight") {
    CHECK(lime::kernel_weight({1, 1, 1}) == 1.0);
    CHECK(lime::kernel_weight({0, 0, 0}, 25) == doctest::Approx(std::exp(-1.0 / 625)).epsilon(1e-15));
    lime::Mask m(8, 1);
    double prev = lime::kernel_weight(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = 0;
        const double w = lime::kernel_weight(m);
        CHECK(w <= prev);
        prev = w;
    }
}

TEST_CASE("fit_local: constant, linear, clamped k and degenerate design") {
    std::vector<std::string> feats{"a", "b", "c"};
    std::vector<lime::Mask> masks{{1, 1, 1}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
    std::vector<double> w(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) w[i] = lime::kernel_weight(masks[i]);

    std::vector<double> flat(masks.size(), 0.37);
    auto e = lime::fit_local(masks, w, flat, 3, feats);
    for (const auto& t : e.tokens) CHECK(std::abs(t.weight) < 1e-8);

    std::vector<double> lin;
    for (const auto& m : masks) lin.push_back(0.2 + 0.6 * m[1]);
    auto l = lime::fit_local(masks, w, lin, 10, feats, 0.01);
    REQUIRE(l.tokens.size() == 3);
    CHECK(l.tokens[0].token == "b");
    CHECK(l.tokens[0].weight > 0);

    std::vector<lime::Mask> same(4, lime::Mask{1, 0, 1});
    std::vector<double> w4(4, 1.0), p4{0.1, 0.2, 0.3, 0.4};
    CHECK_THROWS_AS(lime::fit_local(same, w4, p4, 2, feats), ValidationError);
}

TEST_CASE("explain: keyword predictor, constant predictor, replay") {
    auto cfg = lime::LimeConfig{};
    auto e = lime::explain(keyword_predictor("scum"), "you are such scum honestly mate", no_stopwords(), cfg);
    REQUIRE_FALSE(e.tokens.empty());
    CHECK(e.tokens[0].token == "scum");
    CHECK(e.tokens[0].weight > 0);
    CHECK(e.tokens.size() <= cfg.top_k);
    CHECK(e.prediction == doctest::Approx(nn::sigmoid(2.0)));

    auto again = lime::explain(keyword_predictor("scum"), "you are such scum honestly mate", no_stopwords(), cfg);
    CHECK(lime::to_json(again) == lime::to_json(e));

    lime::Predictor constant = [](const std::vector<std::string>& t) { return std::vector<double>(t.size(), 0.42); };
    auto c = lime::explain(constant, "you are such scum honestly mate", no_stopwords(), cfg);
    for (const auto& t : c.tokens) CHECK(std::abs(t.weight) < 1e-6);

    CHECK_THROWS_AS(lime::explain(constant, "!!! ...", no_stopwords(), cfg), ValidationError);
}

TEST_CASE("explain: sign fidelity on monotone predictors, tokens from the instance") {
    Rng rng(31);
    const std::vector<std::string> words{"alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf"};
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t target = rng.uniform_index(words.size());
        std::vector<double> coef(words.size());
        for (auto& x : coef) x = 4 * rng.uniform_real() - 2;
        coef[target] = 1 + 3 * rng.uniform_real();
        const double bias = 2 * rng.uniform_real() - 1;
        lime::Predictor pred = [&](const std::vector<std::string>& texts) {
            std::vector<double> out;
            for (const auto& t : texts) {
                double z = bias;
                for (std::size_t j = 0; j < words.size(); ++j) z += coef[j] * (has_token(t, words[j]) ? 1 : 0);
                out.push_back(nn::sigmoid(z));
            }
            return out;
        };
        std::string text;
        for (const auto& w : words) text += w + " ";
        lime::LimeConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(trial);
        cfg.top_k = words.size();
        auto e = lime::explain(pred, text, no_stopwords(), cfg);
        for (const auto& t : e.tokens) {
            CHECK(std::find(words.begin(), words.end(), t.token) != words.end());
            if (t.token == words[target]) CHECK(t.weight >= 0);
        }
    }
}

TEST_CASE("html rendering") {
    auto e = lime::explain(keyword_predictor("scum"), "you are scum", no_stopwords(), {});
    auto html = lime::render_html(e, {"you", "are", "scum"}, "demo <b>");
    CHECK(html.find("<html") != std::string::npos);
    CHECK(html.find("scum") != std::string::npos);
    CHECK(html.find("demo <b>") == std::string::npos);
}
