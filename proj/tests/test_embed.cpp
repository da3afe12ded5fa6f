#include <doctest.h>

#include <cmath>

#include "hsd/embed.hpp"
#include "hsd/error.hpp"
#include "hsd/neural.hpp"
#include "support.hpp"

using namespace hsd;
using text::TokenSequence;

TEST_CASE("vocabulary: min_count, ordering and tie-break") {
    std::vector<TokenSequence> corpus{{"b", "a", "x"}, {"a", "b", "c", "c", "c"}};
    auto v = embed::Vocabulary::build(corpus, 2);
    CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<unk>", "c", "a", "b"});
    CHECK_FALSE(v.find("x").has_value());
    CHECK(v.index_of("x") == text::kUnkIndex);
    CHECK(v.count(2) == 3);

    auto all = embed::Vocabulary::build(corpus, 1);
    CHECK(all.size() == 6);
    CHECK(all.index_of("x") == 5);

    CHECK_THROWS_AS(embed::Vocabulary::build({}, 1), ValidationError);
    CHECK_THROWS_AS(embed::Vocabulary::build(corpus, 10), ValidationError);
    CHECK_THROWS_AS(embed::Vocabulary::from_tokens({"a", "b"}), ValidationError);
    CHECK_THROWS_AS(embed::Vocabulary::from_tokens({"<pad>", "<unk>", "a", "a"}), ValidationError);
}

TEST_CASE("cosine") {
    std::vector<float> a{1, 0, 0}, b{0, 2, 0}, c{3, 0, 0}, z{0, 0, 0}, d{1, 1};
    CHECK(embed::cosine(a, b) == doctest::Approx(0.0));
    CHECK(embed::cosine(a, c) == doctest::Approx(1.0));
    CHECK(embed::cosine(a, z) == 0.0);
    CHECK_THROWS_AS(embed::cosine(a, d), ValidationError);
}

TEST_CASE("nearest: exclusions, ties and clamping") {
    auto vocab = embed::Vocabulary::from_tokens({"<pad>", "<unk>", "q", "b", "a", "far"});
    embed::EmbeddingMatrix m(vocab, 2, {0, 0, 1, 1, 1, 0, 2, 0, 2, 0, -1, 0});
    auto n = embed::nearest("q", 10, m);
    REQUIRE(n.size() == 3);
    CHECK(n[0].token == "a");  // tie with "b" broken lexicographically
    CHECK(n[1].token == "b");
    CHECK(n[2].token == "far");
    CHECK(n[0].score == doctest::Approx(1.0));
    CHECK(embed::nearest("q", 1, m).size() == 1);
    CHECK_THROWS_AS(embed::nearest("nope", 3, m), ValidationError);
}

TEST_CASE("text vectors round trip exactly") {
    test::TempDir dir("vec");
    auto vocab = embed::Vocabulary::from_tokens({"<pad>", "<unk>", "hello", "w\xC3\xB6rld"});
    embed::EmbeddingMatrix m(vocab, 3, {0, 0, 0, 0.1f, -0.2f, 0.3f, 1e-8f, 123456.7f, -0.f, 1.f / 3, 2.f / 7, -5.5f});
    embed::save_text(m, dir / "v.txt");
    auto back = embed::load_text(dir / "v.txt");
    CHECK(back == m);

    test::write_file(dir / "nopad.txt", "2 2\nx 1 2\ny 3 4\n");
    auto np = embed::load_text(dir / "nopad.txt");
    CHECK(np.rows() == 4);
    CHECK(np.vocab().token(2) == "x");
    CHECK(np.row(0)[0] == 0.f);

    test::write_file(dir / "bad1.txt", "2 2\nx 1 2 3\ny 3 4\n");
    CHECK_THROWS_AS(embed::load_text(dir / "bad1.txt"), ValidationError);
    test::write_file(dir / "bad2.txt", "3 2\nx 1 2\ny 3 4\n");
    CHECK_THROWS_AS(embed::load_text(dir / "bad2.txt"), ValidationError);
    test::write_file(dir / "bad3.txt", "two 2\n");
    CHECK_THROWS_AS(embed::load_text(dir / "bad3.txt"), ValidationError);
    CHECK_THROWS_AS(embed::load_text(dir / "missing.txt"), IoError);
}

TEST_CASE("negative sampling gradient matches finite differences") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 6, k = 4;
        std::vector<double> params(d * (k + 1));
        for (auto& p : params) p = rng.uniform_real() - 0.5;
        auto loss = [&](std::span<const double> x) {
            std::vector<std::span<const double>> rows;
            for (std::size_t j = 0; j < k; ++j) rows.push_back(x.subspan(d * (j + 1), d));
            std::vector<double> gh(d), gr(d * k);
            std::vector<std::span<double>> grows;
            for (std::size_t j = 0; j < k; ++j) grows.push_back(std::span<double>(gr).subspan(d * j, d));
            return embed::negative_sampling_step<double>(x.subspan(0, d), rows, gh, grows);
        };
        std::vector<std::span<const double>> rows;
        for (std::size_t j = 0; j < k; ++j) rows.push_back(std::span<const double>(params).subspan(d * (j + 1), d));
        std::vector<double> analytic(params.size(), 0.0);
        std::vector<std::span<double>> grows;
        for (std::size_t j = 0; j < k; ++j) grows.push_back(std::span<double>(analytic).subspan(d * (j + 1), d));
        embed::negative_sampling_step<double>(std::span<const double>(params).subspan(0, d), rows,
                                              std::span<double>(analytic).subspan(0, d), grows);
        auto numeric = nn::finite_diff_grad(loss, params);
        CHECK(nn::max_relative_error(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("cbow: determinism, validation and degenerate corpora") {
    auto corpus = test::two_topic_corpus(200, 4);
    auto vocab = embed::Vocabulary::build(corpus, 1);
    embed::CbowConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 2;
    cfg.min_count = 1;
    auto a = embed::train_cbow(corpus, vocab, cfg);
    auto b = embed::train_cbow(corpus, vocab, cfg);
    CHECK(a.embeddings == b.embeddings);
    CHECK(a.epoch_objective == b.epoch_objective);
    CHECK(a.epoch_objective.size() == 2);
    for (auto x : a.embeddings.row(0)) CHECK(x == 0.f);
    cfg.seed = 2;
    CHECK_FALSE(embed::train_cbow(corpus, vocab, cfg).embeddings == a.embeddings);

    std::vector<TokenSequence> one{{"lonely"}};
    CHECK_THROWS_AS(embed::train_cbow(one, embed::Vocabulary::build(one, 1), cfg), ValidationError);

    embed::CbowConfig bad;
    bad.window = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}
