#include <doctest.h>

#include <cmath>

#include "hsd/error.hpp"
#include "hsd/neural.hpp"
#include "hsd/rng.hpp"

using namespace hsd;
using namespace hsd::nn;

namespace {

void randomize(Tensor<double>& t, Rng& rng, double scale) {
    for (auto& x : t.storage()) x = (2 * rng.uniform_real() - 1) * scale;
}

LstmParams<double> random_lstm(std::size_t d, std::size_t h, Rng& rng, double scale = 0.5) {
    LstmParams<double> p(d, h);
    randomize(p.w_input, rng, scale);
    randomize(p.w_recurrent, rng, scale);
    randomize(p.bias, rng, scale);
    return p;
}

std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = (2 * rng.uniform_real() - 1) * scale;
    return v;
}

Mat<double> row(const std::vector<double>& v) {
    return Eigen::Map<const Mat<double>>(v.data(), 1, Eigen::Index(v.size()));
}

}  // namespace

TEST_CASE("sigmoid") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(100.0) > 1 - 1e-12);
    CHECK(sigmoid(100.0) <= 1.0);
    CHECK(std::isfinite(sigmoid(-1000.0)));
    CHECK(sigmoid(-3.7) + sigmoid(3.7) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("bce") {
    std::vector<double> p{0.5}, y{1};
    CHECK(bce<double>(p, y) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    std::vector<double> p1{1.0, 0.0}, y1{1.0, 0.0};
    CHECK(bce<double>(p1, y1) <= -std::log(1 - 1e-7) + 1e-15);
    std::vector<double> p2{0.5, 0.5}, y2{1, 0};
    CHECK(bce<double>(p2, y2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    std::vector<double> p3{0.0}, y3{1.0};
    CHECK(std::isfinite(bce<double>(p3, y3)));
}

TEST_CASE("activations") {
    CHECK(parse_activation("relu") == Activation::Relu);
    CHECK(parse_activation(to_string(Activation::Sigmoid)) == Activation::Sigmoid);
    CHECK(parse_activation("none") == Activation::Identity);
    CHECK_THROWS_AS(parse_activation("tanhh"), ValidationError);
    Mat<double> z(1, 3);
    z << -1, 0, 2;
    Mat<double> r = activate(z, Activation::Relu);
    CHECK(r(0, 0) == 0);
    CHECK(r(0, 2) == 2);
}

TEST_CASE("lstm cell: analytic cases") {
    LstmParams<double> p(3, 2);
    std::vector<double> x{0, 0, 0}, h{0, 0}, c0{0.8, -2.0};
    auto [h1, c1] = lstm_cell_step<double>(x, h, c0, p);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(c1[j] == doctest::Approx(0.5 * c0[j]).epsilon(1e-15));
        CHECK(h1[j] == doctest::Approx(0.5 * std::tanh(0.5 * c0[j])).epsilon(1e-15));
    }
    std::vector<double> zc{0, 0};
    auto [h2, c2] = lstm_cell_step<double>(x, h, zc, p);
    CHECK(h2 == std::vector<double>{0, 0});
    CHECK(c2 == std::vector<double>{0, 0});
}

TEST_CASE("lstm cell: |c'| <= |c| + 1 and finite outputs") {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        auto p = random_lstm(4, 3, rng, 3.0);
        auto x = random_vec(4, rng, 1e3);
        auto h = random_vec(3, rng);
        auto c = random_vec(3, rng, 5.0);
        auto [h1, c1] = lstm_cell_step<double>(x, h, c, p);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::abs(c1[j]) <= std::abs(c[j]) + 1 + 1e-12);
            CHECK(std::isfinite(h1[j]));
        }
    }
}

TEST_CASE("lstm cell: gradients match finite differences") {
    Rng rng(21);
    const std::size_t d = 4, h = 3, g = 4 * h;
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_lstm(d, h, rng);
        auto x = random_vec(d, rng), hp = random_vec(h, rng), cp = random_vec(h, rng);
        auto a = random_vec(h, rng), b = random_vec(h, rng);

        // Packed as [W | U | bias | x | h_prev | c_prev].
        std::vector<double> packed;
        for (auto* t : {&p.w_input, &p.w_recurrent, &p.bias}) packed.insert(packed.end(), t->storage().begin(), t->storage().end());
        for (auto* v : {&x, &hp, &cp}) packed.insert(packed.end(), v->begin(), v->end());

        auto loss = [&](std::span<const double> w) {
            LstmParams<double> q(d, h);
            std::size_t o = 0;
            for (auto* t : {&q.w_input, &q.w_recurrent, &q.bias}) {
                std::copy_n(w.begin() + long(o), t->size(), t->storage().begin());
                o += t->size();
            }
            auto [h1, c1] = lstm_cell_step<double>(w.subspan(o, d), w.subspan(o + d, h), w.subspan(o + d + h, h), q);
            double s = 0;
            for (std::size_t j = 0; j < h; ++j) s += a[j] * h1[j] + b[j] * c1[j];
            return s;
        };

        Mat<double> xm = row(x), hm = row(hp), cm = row(cp);
        Mat<double> xproj = xm * p.w_input.matrix().transpose();
        LstmStepCache<double> cache;
        lstm_step_forward(xproj, hm, cm, p, cache);
        LstmParams<double> grads(d, h);
        Mat<double> dh = row(a), dc = row(b), dgates;
        lstm_step_backward(cache, cm, xm, hm, dh, dc, grads, dgates);
        REQUIRE(dgates.cols() == Eigen::Index(g));
        Mat<double> dx = dgates * p.w_input.matrix();
        Mat<double> dhp = dgates * p.w_recurrent.matrix();

        std::vector<double> analytic;
        for (auto* t : {&grads.w_input, &grads.w_recurrent, &grads.bias}) analytic.insert(analytic.end(), t->storage().begin(), t->storage().end());
        for (const Mat<double>* m : {&dx, &dhp, &dc}) analytic.insert(analytic.end(), m->data(), m->data() + m->size());

        auto numeric = finite_diff_grad(loss, packed);
        CHECK(max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("bilstm forward: degenerate and symmetric cases") {
    Rng rng(8);
    const std::size_t d = 3, h = 4;
    auto p = random_lstm(d, h, rng);
    Mat<double> one(1, d);
    one << 0.3, -0.2, 0.9;
    auto out = bilstm_forward(one, p, p);
    REQUIRE(out.size() == 2 * h);
    for (std::size_t j = 0; j < h; ++j) CHECK(out[j] == out[h + j]);

    Mat<double> seq(5, d);
    for (Eigen::Index i = 0; i < seq.size(); ++i) seq.data()[i] = 2 * rng.uniform_real() - 1;
    Mat<double> rev = seq.colwise().reverse();
    auto a = bilstm_forward(seq, p, p);
    auto b = bilstm_forward(rev, p, p);
    for (std::size_t j = 0; j < h; ++j) {
        CHECK(a[j] == doctest::Approx(b[h + j]).epsilon(1e-14));
        CHECK(a[h + j] == doctest::Approx(b[j]).epsilon(1e-14));
    }
    CHECK(bilstm_forward(seq, p, p, SequenceOutput::Flatten).size() == 2 * h * 5);

    LstmParams<double> zero(d, h);
    Mat<double> zin = Mat<double>::Zero(4, d);
    for (double v : bilstm_forward(zin, zero, zero)) CHECK(v == 0.0);
}

TEST_CASE("finite_diff_grad") {
    auto sq = [](std::span<const double> w) { return w[0] * w[0]; };
    CHECK(finite_diff_grad(sq, {3.0})[0] == doctest::Approx(6.0).epsilon(1e-9));
    auto k = [](std::span<const double>) { return 4.2; };
    for (double g : finite_diff_grad(k, {1.0, -2.0, 3.0})) CHECK(g == 0.0);
    std::vector<double> a{1.0, 0.0}, n{1.0, 1e-9};
    CHECK(max_relative_error(a, n) == doctest::Approx(1e-3));
}

TEST_CASE("adam: first step, convergence and zero gradients") {
    AdamState<double> st;
    st.config.learning_rate = 0.1;
    std::vector<double> w{1.0};
    std::vector<double> g{2.0};
    adam_step<double>({std::span<double>(w)}, {std::span<const double>(g)}, st);
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-7));

    // Independent scalar recurrence of the same rule.
    double ref = 0.9, m = 0.1 * 2.0, v = 0.001 * 4.0;
    for (int t = 2; t <= 200; ++t) {
        g[0] = 2 * w[0];
        adam_step<double>({std::span<double>(w)}, {std::span<const double>(g)}, st);
        const double gr = 2 * ref;
        m = 0.9 * m + 0.1 * gr;
        v = 0.999 * v + 0.001 * gr * gr;
        ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(std::abs(w[0]) < 1e-2);
    CHECK(w[0] == doctest::Approx(ref).epsilon(1e-9));

    AdamState<double> z;
    std::vector<double> p{1.5, -2.5}, zg{0, 0};
    for (int i = 0; i < 50; ++i) adam_step<double>({std::span<double>(p)}, {std::span<const double>(zg)}, z);
    CHECK(p == std::vector<double>{1.5, -2.5});
}

TEST_CASE("adam: non-finite gradient leaves parameters untouched; replay is bitwise") {
    AdamState<float> st;
    std::vector<float> w{1.f, 2.f}, g{0.5f, NAN};
    CHECK_THROWS_AS(adam_step<float>({std::span<float>(w)}, {std::span<const float>(g)}, st), NumericError);
    CHECK(w == std::vector<float>{1.f, 2.f});

    std::vector<float> a{0.3f, -0.7f}, b = a, ga{0.11f, -0.9f};
    AdamState<float> sa, sb;
    for (int i = 0; i < 20; ++i) {
        adam_step<float>({std::span<float>(a)}, {std::span<const float>(ga)}, sa);
        adam_step<float>({std::span<float>(b)}, {std::span<const float>(ga)}, sb);
    }
    CHECK(a == b);
}
