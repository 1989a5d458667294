#include "clickbait/error.hpp"
#include "clickbait/models/mlp.hpp"
#include "clickbait/random.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

using namespace clickbait;
using namespace clickbait::models;

namespace {

Matrix random_batch(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix X(rows, cols);
    for (auto& x : X.data) x = rng.normal();
    return X;
}

std::vector<int> random_labels(Rng& rng, std::size_t n) {
    std::vector<int> y(n);
    for (auto& v : y) v = rng.uniform() < 0.5;
    y[0] = 0;
    y[1] = 1;
    return y;
}

std::size_t expected_total(std::size_t in) {
    return 50 * (in + 1) + 4 * 50 + 300 * 51 + 4 * 300 + 2 * 301;
}

MlpArchitecture linear_arch() {
    MlpArchitecture a;
    a.dropout1 = 0.0;
    a.dropout2 = 0.0;
    a.batchNorm = false;
    a.activation = Activation::Identity;
    return a;
}

} // namespace

TEST_CASE("parameter counts") {
    const auto m = build_mlp(383);
    CHECK(m.trainableCount() == 35802);
    CHECK(m.nonTrainableCount() == 700);
    CHECK(m.totalCount() == 36502);
    const auto layers = m.layers();
    REQUIRE(layers.size() == 5);
    CHECK(layers[0].parameters == 19200);
    CHECK(layers[1].parameters == 200);
    CHECK(layers[2].parameters == 15300);
    CHECK(layers[3].parameters == 1200);
    CHECK(layers[4].parameters == 602);
    CHECK(build_mlp(1).layers()[0].parameters == 100);
    for (std::size_t in : {1u, 7u, 373u, 1000u}) CHECK(build_mlp(in).totalCount() == expected_total(in));
    CHECK_THROWS_AS(build_mlp(0), ValidationError);
}

TEST_CASE("initialisation") {
    const auto m = build_mlp(20, 3);
    const auto k = m.slot("dense_1.kernel");
    const double limit = std::sqrt(6.0 / (20 + 50));
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(std::abs(m.params[k.offset + i]) <= limit);
    const auto bias = m.slot("dense_2.bias");
    for (std::size_t i = 0; i < bias.size(); ++i) CHECK(m.params[bias.offset + i] == 0.0);
    const auto gamma = m.slot("batch_norm_1.gamma");
    for (std::size_t i = 0; i < gamma.size(); ++i) CHECK(m.params[gamma.offset + i] == 1.0);
}

TEST_CASE("forward pass") {
    Rng rng(4);
    auto m = build_mlp(6, 2);
    const auto X = random_batch(rng, 9, 6);

    const auto P = mlp_predict(m, X);
    for (std::size_t r = 0; r < P.rows; ++r) CHECK(std::abs(P(r, 0) + P(r, 1) - 1.0) < 1e-9);
    CHECK(predict_mlp(m, X.row(2)) == doctest::Approx(P(2, 1)).epsilon(1e-12));

    auto a = m, b = m;
    const auto ta = mlp_forward(a, X, ForwardMode::Train, 77);
    const auto tb = mlp_forward(b, X, ForwardMode::Train, 77);
    CHECK(std::memcmp(ta.data.data(), tb.data.data(), ta.data.size() * sizeof(double)) == 0);
    CHECK(a.moving == b.moving);
    CHECK(a.moving != m.moving);

    CHECK_THROWS_AS(mlp_forward(a, random_batch(rng, 1, 6), ForwardMode::Train), ValidationError);
    CHECK_THROWS_AS(mlp_predict(m, random_batch(rng, 2, 5)), ValidationError);
}

TEST_CASE("degenerate configuration reduces to affine maps and softmax") {
    Rng rng(6);
    const auto m = build_mlp(3, 9, linear_arch());
    const auto X = random_batch(rng, 4, 3);
    const auto P = mlp_predict(m, X);

    auto dense = [&](const std::string& layer, const std::vector<double>& in) {
        const auto k = m.slot(layer + ".kernel");
        const auto b = m.slot(layer + ".bias");
        std::vector<double> out(k.cols);
        for (std::size_t j = 0; j < k.cols; ++j) {
            double s = m.params[b.offset + j];
            for (std::size_t i = 0; i < k.rows; ++i) s += in[i] * m.params[k.offset + i * k.cols + j];
            out[j] = s;
        }
        return out;
    };
    for (std::size_t r = 0; r < X.rows; ++r) {
        std::vector<double> x(X.row(r).begin(), X.row(r).end());
        const auto z = dense("dense_3", dense("dense_2", dense("dense_1", x)));
        const double p1 = 1.0 / (1.0 + std::exp(z[0] - z[1]));
        CHECK(P(r, 1) == doctest::Approx(p1).epsilon(1e-12));
    }
}

TEST_CASE("gradient check") {
    Rng rng(10);
    const auto X = random_batch(rng, 8, 5);
    const auto y = random_labels(rng, 8);

    SUBCASE("backprop agrees with finite differences") {
        MlpArchitecture arch;
        arch.hidden1 = 6;
        arch.hidden2 = 7;
        const auto m = build_mlp(5, 1, arch);
        const auto r = gradient_check(m, X, y, 1e-4);
        CHECK(r.checked == m.trainableCount()); // fewer parameters than samples
        CHECK(r.maxRelativeError < 1e-4);
        CHECK(r.passed);
    }
    SUBCASE("full-size network") {
        const auto m = build_mlp(5, 2);
        const auto r = gradient_check(m, X, y, 1e-4);
        CHECK(r.checked == 200);
        CHECK(r.maxRelativeError < 1e-4);
    }
    SUBCASE("doubled gradient is caught") {
        const auto m = build_mlp(5, 1);
        GradientCheckOptions opts;
        opts.gradientScale = 2.0;
        const auto r = gradient_check(m, X, y, 1e-4, opts);
        CHECK(r.maxRelativeError == doctest::Approx(1.0).epsilon(0.01));
        CHECK_FALSE(r.passed);
    }
    SUBCASE("linear network agrees to the roundoff floor") {
        // Differencing a loss near 0.7 at h = 1e-5 cannot resolve better than
        // a few ulps / 2h, about 1e-11 absolute; parameters whose gradient is
        // itself ~1e-6 therefore cap the relative figure near 1e-6.
        const auto m = build_mlp(5, 1, linear_arch());
        const auto r = gradient_check(m, X, y, 1e-7);
        const double ulps = 8.0 * std::numeric_limits<double>::epsilon() / 2e-5;
        CHECK(r.maxAbsoluteError < ulps);
        CHECK(r.maxRelativeError < 1e-5);
    }
}

TEST_CASE("loss gradient leaves the model untouched and honours l2") {
    Rng rng(12);
    const auto X = random_batch(rng, 6, 4);
    const auto y = random_labels(rng, 6);
    const auto m = build_mlp(4, 5);
    const auto before = m.moving;
    const auto plain = mlp_loss_and_gradient(m, X, y, false);
    const auto reg = mlp_loss_and_gradient(m, X, y, false, 0, 0.1);
    CHECK(m.moving == before);
    CHECK(reg.loss > plain.loss);
    const auto k = m.slot("dense_2.kernel");
    CHECK(reg.gradient[k.offset] == doctest::Approx(plain.gradient[k.offset] + 0.1 * m.params[k.offset]));
    const auto b = m.slot("dense_2.bias");
    CHECK(reg.gradient[b.offset] == plain.gradient[b.offset]);
}

TEST_CASE("training") {
    SUBCASE("xor") {
        Matrix X(4, 2);
        X.data = {0, 0, 0, 1, 1, 0, 1, 1};
        const std::vector<int> y = {0, 1, 1, 0};
        MlpTrainConfig cfg;
        cfg.epochs = 500;
        cfg.batchSize = 4;
        cfg.adam.learningRate = 0.01;
        cfg.arch.dropout1 = 0.0;
        cfg.arch.dropout2 = 0.0;
        const auto m = train_mlp(X, y, cfg);
        for (std::size_t r = 0; r < 4; ++r) CHECK((predict_mlp(m, X.row(r)) >= 0.5) == (y[r] == 1));
        CHECK(m.lossHistory.size() == 500);
    }
    SUBCASE("first epoch descends and seeds reproduce") {
        Rng rng(13);
        const auto X = random_batch(rng, 200, 5);
        std::vector<int> y(200);
        for (std::size_t r = 0; r < X.rows; ++r) y[r] = X(r, 0) - X(r, 3) > 0;
        MlpTrainConfig cfg;
        cfg.epochs = 3;
        cfg.batchSize = 32;
        const auto init = build_mlp(5, cfg.seed, cfg.arch);
        const double initial = mlp_loss_and_gradient(init, X, y, false).loss;
        const auto a = train_mlp(X, y, cfg);
        const auto b = train_mlp(X, y, cfg);
        CHECK(a.lossHistory.front() < initial);
        CHECK(a.params == b.params);
        CHECK(a.moving == b.moving);
        CHECK(a.adam.step == b.adam.step);
        CHECK(a.adam.step == 3 * 7); // 200 rows in batches of 32 with the stray row merged
        cfg.seed = 2;
        CHECK(train_mlp(X, y, cfg).params != a.params);
    }
    SUBCASE("non-finite input is reported") {
        Matrix X(4, 1);
        X.data = {0, 1, NAN, 3};
        MlpTrainConfig cfg;
        cfg.epochs = 1;
        CHECK_THROWS_AS(train_mlp(X, std::vector<int>{0, 1, 0, 1}, cfg), Error);
    }
}

TEST_CASE("json round trip preserves predictions exactly") {
    Rng rng(14);
    const auto X = random_batch(rng, 40, 3);
    std::vector<int> y(40);
    for (std::size_t r = 0; r < X.rows; ++r) y[r] = X(r, 1) > 0;
    MlpTrainConfig cfg;
    cfg.epochs = 2;
    cfg.batchSize = 8;
    const auto m = train_mlp(X, y, cfg);
    const auto back = MlpModel::from_json(nlohmann::json::parse(m.to_json().dump()));
    CHECK(back.params == m.params);
    CHECK(back.moving == m.moving);
    CHECK(back.lossHistory == m.lossHistory);
    CHECK(back.adam.step == m.adam.step);
    for (std::size_t r = 0; r < X.rows; ++r) CHECK(predict_mlp(back, X.row(r)) == predict_mlp(m, X.row(r)));
    auto bad = m.to_json();
    bad["tensors"][0]["values"].erase(0);
    CHECK_THROWS(MlpModel::from_json(bad));
}
