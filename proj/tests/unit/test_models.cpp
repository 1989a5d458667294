#include "clickbait/error.hpp"
#include "clickbait/models/adam.hpp"
#include "clickbait/models/common.hpp"
#include "clickbait/models/forest.hpp"
#include "clickbait/models/logistic.hpp"
#include "clickbait/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace clickbait;
using namespace clickbait::models;

namespace {

Matrix column(const std::vector<double>& xs) {
    Matrix X(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) X(i, 0) = xs[i];
    return X;
}

// Imbalanced, overlapping 1-d set: the decision boundary moves with w1.
struct Toy {
    Matrix X;
    std::vector<int> y;
    Toy() {
        const std::vector<double> neg = {-3, -2.5, -2, -1.5, -1, -0.5, 0, 0.2, 0.4, 0.6, 0.8, 1.0};
        const std::vector<double> pos = {0.3, 0.7, 1.5, 2.5};
        std::vector<double> xs = neg;
        xs.insert(xs.end(), pos.begin(), pos.end());
        X = column(xs);
        y.assign(neg.size(), 0);
        y.insert(y.end(), pos.size(), 1);
    }
};

double recall_pos(const Matrix& X, const std::vector<int>& y, double w, double b) {
    int tp = 0, p = 0;
    for (std::size_t i = 0; i < X.rows; ++i) {
        if (y[i] != 1) continue;
        ++p;
        tp += sigmoid(w * X(i, 0) + b) >= 0.5;
    }
    return static_cast<double>(tp) / p;
}

struct GridBest {
    double loss, w, b;
};

// Brute-force minimiser of the weighted loss over a fine (w, b) grid.
GridBest grid_search(const Matrix& X, const std::vector<int>& y, const ClassWeights& cw, double l2) {
    GridBest best{INFINITY, 0, 0};
    for (double w = -8; w <= 8; w += 0.01) {
        for (double b = -8; b <= 8; b += 0.01) {
            const double l = logistic_loss(X, y, std::vector<double>{w}, b, cw, l2);
            if (l < best.loss) best = {l, w, b};
        }
    }
    return best;
}

struct GiniSplit {
    int feature = -1;
    double threshold = 0;
    double gain = -1;
};

// Every feature, every midpoint between consecutive distinct values; ties go
// to the lowest feature and then the lowest threshold.
GiniSplit enumerate_best_split(const Matrix& X, const std::vector<int>& y) {
    auto g = [](double pos, double n) { return n == 0 ? 0.0 : 1.0 - (pos / n) * (pos / n) - (1 - pos / n) * (1 - pos / n); };
    const double n = static_cast<double>(X.rows);
    const double pos = std::accumulate(y.begin(), y.end(), 0.0);
    const double parent = g(pos, n);
    GiniSplit best;
    for (std::size_t f = 0; f < X.cols; ++f) {
        std::vector<double> vals;
        for (std::size_t r = 0; r < X.rows; ++r) vals.push_back(X(r, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double t = 0.5 * (vals[k] + vals[k + 1]);
            double nl = 0, pl = 0;
            for (std::size_t r = 0; r < X.rows; ++r) {
                if (X(r, f) <= t) {
                    ++nl;
                    pl += y[r];
                }
            }
            const double gain = parent - (nl / n) * g(pl, nl) - ((n - nl) / n) * g(pos - pl, n - nl);
            if (gain > best.gain + 1e-12) best = {static_cast<int>(f), t, gain};
        }
    }
    return best;
}

} // namespace

TEST_CASE("balanced class weights") {
    const auto even = balanced_class_weights(std::vector<int>{0, 1, 0, 1});
    CHECK(even.negative == 1.0);
    CHECK(even.positive == 1.0);

    std::vector<int> corpus(16474, 0);
    corpus.insert(corpus.end(), 5523, 1);
    const auto cw = balanced_class_weights(corpus);
    CHECK(cw.negative == doctest::Approx(0.6676).epsilon(1e-3));
    CHECK(cw.positive == doctest::Approx(1.9914).epsilon(1e-3));

    const auto three_one = balanced_class_weights(std::vector<int>{0, 0, 0, 1});
    CHECK(three_one.negative == doctest::Approx(4.0 / 6.0));
    CHECK(three_one.positive == doctest::Approx(2.0));
    CHECK_THROWS_AS(balanced_class_weights(std::vector<int>{1, 1}), ValidationError);
}

TEST_CASE("logistic prediction examples") {
    LogisticModel m;
    m.weights = {0.0};
    CHECK(predict_logistic(m, std::vector<double>{3.0}) == 0.5);
    m.weights = {1.0};
    CHECK(predict_logistic(m, std::vector<double>{0.0}) == 0.5);
    m.weights = {2.0};
    m.bias = -1.0;
    CHECK(predict_logistic(m, std::vector<double>{1.0}) == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK_THROWS_AS(predict_logistic(m, std::vector<double>{1.0, 2.0}), ValidationError);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) <= 1.0);
}

TEST_CASE("logistic training") {
    SUBCASE("zero initial weights give 0.5 everywhere") {
        LogisticConfig cfg;
        cfg.maxEpochs = 0;
        const auto m = train_logistic(column({-1, 1, 2}), std::vector<int>{0, 1, 1}, cfg);
        for (double x : {-5.0, 0.0, 7.0}) CHECK(predict_logistic(m, std::vector<double>{x}) == 0.5);
    }
    SUBCASE("separable 1-d data is fit exactly") {
        const auto X = column({-3, -2, -1, 1, 2, 3, 4});
        const std::vector<int> y = {0, 0, 0, 1, 1, 1, 1};
        const auto m = train_logistic(X, y);
        for (std::size_t i = 0; i < X.rows; ++i) {
            CHECK((predict_logistic(m, X.row(i)) >= 0.5) == (y[i] == 1));
        }
    }
    SUBCASE("deterministic") {
        const Toy t;
        const auto a = train_logistic(t.X, t.y);
        const auto b = train_logistic(t.X, t.y);
        CHECK(a.weights == b.weights);
        CHECK(a.bias == b.bias);
        CHECK(a.to_json().dump() == b.to_json().dump());
        const auto back = LogisticModel::from_json(a.to_json());
        CHECK(back.weights == a.weights);
        CHECK(back.bias == a.bias);
    }
}

TEST_CASE("doubling the positive weight raises recall, matching the grid oracle") {
    const Toy t;
    const double l2 = 1e-4;
    double previous = -1.0;
    for (double w1 : {1.0, 2.0}) {
        LogisticConfig cfg;
        cfg.classWeights = ClassWeights{1.0, w1};
        cfg.l2Lambda = l2;
        const auto m = train_logistic(t.X, t.y, cfg);
        const auto oracle = grid_search(t.X, t.y, *cfg.classWeights, l2);
        CHECK(m.finalLoss <= oracle.loss + 1e-9);
        const double r = recall_pos(t.X, t.y, m.weights[0], m.bias);
        CHECK(r == recall_pos(t.X, t.y, oracle.w, oracle.b));
        CHECK(r > previous);
        previous = r;
    }
}

TEST_CASE("logistic loss at the solution beats random weights") {
    Rng rng(12);
    Matrix X(120, 6);
    std::vector<int> y(120);
    for (std::size_t r = 0; r < X.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < X.cols; ++c) s += (X(r, c) = rng.normal()) * (c % 2 ? 1.0 : -0.5);
        y[r] = s + 0.8 * rng.normal() > 0.3 ? 1 : 0;
    }
    const auto m = train_logistic(X, y);
    const double at_solution = logistic_loss(X, y, m.weights, m.bias, m.classWeights, 1e-4);
    CHECK(at_solution == doctest::Approx(m.finalLoss));
    for (int k = 0; k < 100; ++k) {
        std::vector<double> w(6);
        for (auto& x : w) x = rng.normal() * 2.0;
        CHECK(at_solution <= logistic_loss(X, y, w, rng.normal(), m.classWeights, 1e-4) + 1e-12);
    }
    // Threshold decisions survive any strictly increasing rescaling.
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double p = predict_logistic(m, X.row(r));
        CHECK((p >= 0.5) == (std::pow(p, 3) >= std::pow(0.5, 3)));
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("adam examples") {
    AdamConfig cfg;
    std::vector<double> theta{0.0, 1.5};
    AdamState state(2);
    adam_step(theta, std::vector<double>{0.0, 0.0}, state, cfg);
    CHECK(theta == std::vector<double>{0.0, 1.5});

    std::vector<double> scalar{0.0};
    AdamState s1(1);
    adam_step(scalar, std::vector<double>{1.0}, s1, cfg);
    CHECK(scalar[0] == doctest::Approx(-0.001).epsilon(1e-6));
    const double after_one = scalar[0];
    adam_step(scalar, std::vector<double>{1.0}, s1, cfg);
    CHECK(scalar[0] < after_one);
    CHECK(s1.step == 2);
}

TEST_CASE("forest: pure data predicts that class") {
    Rng rng(1);
    Matrix X(30, 3);
    for (auto& x : X.data) x = rng.normal();
    const std::vector<int> ones(30, 1);
    ForestConfig cfg;
    cfg.treeCount = 5;
    const auto m = train_forest(X, ones, cfg);
    for (std::size_t r = 0; r < X.rows; ++r) CHECK(predict_forest(m, X.row(r)) == 1.0);
    for (const auto& t : m.trees) {
        CHECK(t.nodes.size() == 1);
        CHECK(t.nodes[0].positiveRate == 1.0);
    }
}

TEST_CASE("forest: one stump separates threshold data") {
    const auto X = column({0, 1, 2, 3, 4, 10, 11, 12, 13, 14});
    const std::vector<int> y = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    ForestConfig cfg;
    cfg.treeCount = 1;
    cfg.maxDepth = 1;
    const auto m = train_forest(X, y, cfg);
    REQUIRE(m.trees.size() == 1);
    const auto& root = m.trees[0].nodes[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold > 4);
    CHECK(root.threshold < 10);
    for (std::size_t r = 0; r < X.rows; ++r) CHECK((predict_forest(m, X.row(r)) >= 0.5) == (y[r] == 1));
}

TEST_CASE("forest: root split matches the Gini enumeration oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        Matrix X(25, 3);
        std::vector<int> y(25);
        for (std::size_t r = 0; r < X.rows; ++r) {
            for (std::size_t c = 0; c < 3; ++c) X(r, c) = static_cast<double>(rng.index(6));
            y[r] = rng.uniform() < 0.2 + 0.1 * X(r, trial % 3) ? 1 : 0;
        }
        if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;
        std::vector<std::size_t> all(X.rows);
        std::iota(all.begin(), all.end(), 0);
        ForestConfig cfg;
        cfg.maxDepth = 1;
        cfg.maxFeaturesPerSplit = 3;
        const auto tree = grow_tree(X, y, all, cfg, 99);
        const auto want = enumerate_best_split(X, y);
        REQUIRE(tree.nodes.size() == 3);
        CHECK(tree.nodes[0].feature == want.feature);
        CHECK(tree.nodes[0].threshold == want.threshold);
        CHECK(tree.nodes[0].impurityDecrease == doctest::Approx(want.gain).epsilon(1e-12));
    }
    CHECK(gini(0, 4) == 0.0);
    CHECK(gini(2, 4) == 0.5);
}

TEST_CASE("forest: predictions average the leaves") {
    ForestModel m;
    m.featureCount = 1;
    m.config.treeCount = 2;
    for (double p : {0.2, 0.6}) {
        DecisionTree t;
        TreeNode leaf;
        leaf.positiveRate = p;
        leaf.samples = 5;
        t.nodes.push_back(leaf);
        m.trees.push_back(t);
    }
    CHECK(predict_forest(m, std::vector<double>{0.0}) == doctest::Approx(0.4));
    CHECK_THROWS_AS(predict_forest(m, std::vector<double>{0.0, 1.0}), ValidationError);
    for (auto& t : m.trees) t.nodes[0].positiveRate = 1.0;
    CHECK(predict_forest(m, std::vector<double>{0.0}) == 1.0);
}

TEST_CASE("forest: determinism, depth limit and serialisation") {
    Rng rng(3);
    Matrix X(150, 25);
    std::vector<int> y(150);
    for (std::size_t r = 0; r < X.rows; ++r) {
        for (auto& x : X.row(r)) x = rng.normal();
        y[r] = X(r, 0) + X(r, 1) * X(r, 2) + 0.3 * rng.normal() > 0 ? 1 : 0;
    }
    ForestConfig cfg;
    cfg.treeCount = 30;
    cfg.threads = 1;
    const auto a = train_forest(X, y, cfg);
    cfg.threads = 4;
    const auto b = train_forest(X, y, cfg);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.trees.size() == 30);
    for (const auto& t : a.trees) {
        CHECK(t.depth() <= cfg.maxDepth);
        for (const auto& n : t.nodes) {
            CHECK(n.positiveRate >= 0.0);
            CHECK(n.positiveRate <= 1.0);
        }
    }
    const auto back = ForestModel::from_json(a.to_json());
    CHECK(back.to_json().dump() == a.to_json().dump());
    for (std::size_t r = 0; r < X.rows; ++r) CHECK(predict_forest(back, X.row(r)) == predict_forest(a, X.row(r)));

    auto broken = a.to_json();
    broken["trees"].erase(0);
    CHECK_THROWS(ForestModel::from_json(broken));
}

TEST_CASE("forest importances") {
    Rng rng(8);
    SUBCASE("one decisive feature takes it all") {
        Matrix X(80, 4);
        std::vector<int> y(80);
        for (std::size_t r = 0; r < X.rows; ++r) {
            for (auto& x : X.row(r)) x = rng.normal();
            y[r] = X(r, 2) > 0 ? 1 : 0;
        }
        ForestConfig cfg;
        cfg.treeCount = 1;
        cfg.maxDepth = 1;
        cfg.maxFeaturesPerSplit = 4;
        const auto imp = forest_importances(train_forest(X, y, cfg));
        CHECK(imp[2] == doctest::Approx(1.0));
        CHECK(imp[0] == 0.0);
    }
    SUBCASE("duplicate features share the credit") {
        Matrix X(120, 4);
        std::vector<int> y(120);
        for (std::size_t r = 0; r < X.rows; ++r) {
            for (auto& x : X.row(r)) x = rng.normal();
            X(r, 3) = X(r, 0);
            y[r] = X(r, 0) + 0.3 * rng.normal() > 0 ? 1 : 0;
        }
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            ForestConfig cfg;
            cfg.treeCount = 40;
            cfg.maxFeaturesPerSplit = 2;
            cfg.seed = seed;
            const auto imp = forest_importances(train_forest(X, y, cfg));
            CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(imp[0] > 0.1);
            CHECK(imp[3] > 0.1);
        }
    }
}
