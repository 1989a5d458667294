#include "clickbait/models/forest.hpp"

#include "clickbait/error.hpp"
#include "clickbait/models/common.hpp"
#include "clickbait/random.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace clickbait::models {

using nlohmann::json;

double gini(std::size_t positives, std::size_t total) {
    if (total == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(positives) / static_cast<double>(total);
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

double DecisionTree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].positiveRate;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack = {{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (!nodes[i].leaf()) {
            stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
            stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
        }
    }
    return best;
}

namespace {

struct Builder {
    const Matrix& X;
    std::span<const int> y;
    const ForestConfig& cfg;
    Rng rng;
    double root_samples = 0.0;
    DecisionTree tree;
    std::vector<std::size_t> features;
    std::vector<std::pair<double, int>> column;

    Builder(const Matrix& x, std::span<const int> labels, const ForestConfig& c, std::uint64_t seed)
        : X(x), y(labels), cfg(c), rng(seed), features(x.cols) {
        for (std::size_t f = 0; f < features.size(); ++f) {
            features[f] = f;
        }
    }

    // Partial Fisher-Yates over the feature pool, sorted so ties go to the
    // lowest feature index.
    std::vector<std::size_t> sample_features() {
        const std::size_t k = std::min(cfg.maxFeaturesPerSplit, features.size());
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(features[i], features[i + rng.index(features.size() - i)]);
        }
        std::vector<std::size_t> chosen(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    }

    int build(std::vector<std::size_t>& idx, std::size_t depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        std::size_t pos = 0;
        for (std::size_t i : idx) {
            pos += y[i] == 1;
        }
        const std::size_t n = idx.size();
        {
            auto& node = tree.nodes.back();
            node.samples = n;
            node.positiveRate = n ? static_cast<double>(pos) / static_cast<double>(n) : 0.0;
        }
        if (depth >= cfg.maxDepth || n < 2 || pos == 0 || pos == n) {
            return id;
        }

        const double parent = gini(pos, n);
        double best_gain = -1.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t f : sample_features()) {
            column.clear();
            for (std::size_t i : idx) {
                column.emplace_back(X(i, f), y[i]);
            }
            std::sort(column.begin(), column.end());
            std::size_t left_pos = 0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left_pos += column[k].second == 1;
                const double lo = column[k].first;
                const double hi = column[k + 1].first;
                if (!(lo < hi)) {
                    continue;
                }
                const std::size_t nl = k + 1;
                const std::size_t nr = n - nl;
                const double child = (static_cast<double>(nl) * gini(left_pos, nl) +
                                      static_cast<double>(nr) * gini(pos - left_pos, nr)) /
                                     static_cast<double>(n);
                const double gain = parent - child;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    double mid = lo + (hi - lo) / 2.0;
                    best_threshold = mid < hi ? mid : lo;
                }
            }
        }
        if (best_feature < 0) {
            return id;
        }

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t i : idx) {
            (X(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();
        {
            auto& node = tree.nodes[static_cast<std::size_t>(id)];
            node.feature = best_feature;
            node.threshold = best_threshold;
            node.impurityDecrease = static_cast<double>(n) / root_samples * best_gain;
        }
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = l;
        tree.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

} // namespace

DecisionTree grow_tree(const Matrix& X, std::span<const int> y, std::span<const std::size_t> samples,
                       const ForestConfig& cfg, std::uint64_t seed) {
    Builder b(X, y, cfg, seed);
    b.root_samples = static_cast<double>(samples.size());
    std::vector<std::size_t> idx(samples.begin(), samples.end());
    b.build(idx, 0);
    return std::move(b.tree);
}

ForestModel train_forest(const Matrix& X, std::span<const int> y, const ForestConfig& cfg) {
    check_labels(y, X.rows);
    if (X.rows < 2) {
        throw ValidationError("X", "need at least 2 rows to train a forest");
    }
    if (cfg.treeCount == 0 || cfg.maxFeaturesPerSplit == 0) {
        throw ValidationError("config", "treeCount and maxFeaturesPerSplit must be positive");
    }
    ForestModel m;
    m.config = cfg;
    m.featureCount = X.cols;
    m.trees.resize(cfg.treeCount);

    auto grow = [&](std::size_t t) {
        const std::uint64_t seed = cfg.seed + t;
        Rng rng(seed);
        std::vector<std::size_t> boot(X.rows);
        for (auto& i : boot) {
            i = rng.index(X.rows);
        }
        // Split sampling continues from the bootstrap stream.
        m.trees[t] = grow_tree(X, y, boot, cfg, rng.next());
    };

    std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, cfg.treeCount);
    if (workers <= 1) {
        for (std::size_t t = 0; t < cfg.treeCount; ++t) {
            grow(t);
        }
        return m;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < cfg.treeCount; t = next++) {
                grow(t);
            }
        });
    }
    pool.clear();
    return m;
}

double predict_forest(const ForestModel& m, std::span<const double> x) {
    if (x.size() != m.featureCount) {
        throw ValidationError("x", "expected " + std::to_string(m.featureCount) + " features, got " +
                                       std::to_string(x.size()));
    }
    if (m.trees.empty()) {
        throw ValidationError("model", "forest has no trees");
    }
    double sum = 0.0;
    for (const auto& t : m.trees) {
        sum += t.predict(x);
    }
    return sum / static_cast<double>(m.trees.size());
}

std::vector<double> forest_importances(const ForestModel& m) {
    std::vector<double> imp(m.featureCount, 0.0);
    for (const auto& t : m.trees) {
        for (const auto& n : t.nodes) {
            if (!n.leaf()) {
                imp[static_cast<std::size_t>(n.feature)] += n.impurityDecrease;
            }
        }
    }
    double total = 0.0;
    for (double v : imp) {
        total += v;
    }
    if (total > 0.0) {
        for (auto& v : imp) {
            v /= total;
        }
    }
    return imp;
}

json ForestModel::to_json() const {
    json trees_json = json::array();
    for (const auto& t : trees) {
        json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
             rate = json::array(), samples = json::array(), decrease = json::array();
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            rate.push_back(n.positiveRate);
            samples.push_back(n.samples);
            decrease.push_back(n.impurityDecrease);
        }
        trees_json.push_back({{"feature", feature},       {"threshold", threshold}, {"left", left},
                              {"right", right},           {"positiveRate", rate},   {"samples", samples},
                              {"impurityDecrease", decrease}});
    }
    return json{{"treeCount", config.treeCount},
                {"maxDepth", config.maxDepth},
                {"maxFeaturesPerSplit", config.maxFeaturesPerSplit},
                {"seed", config.seed},
                {"featureCount", featureCount},
                {"trees", trees_json}};
}

ForestModel ForestModel::from_json(const json& j) {
    ForestModel m;
    m.config.treeCount = j.at("treeCount").get<std::size_t>();
    m.config.maxDepth = j.at("maxDepth").get<std::size_t>();
    m.config.maxFeaturesPerSplit = j.at("maxFeaturesPerSplit").get<std::size_t>();
    m.config.seed = j.at("seed").get<std::uint64_t>();
    m.featureCount = j.at("featureCount").get<std::size_t>();
    for (const auto& tj : j.at("trees")) {
        const auto feature = tj.at("feature").get<std::vector<int>>();
        const auto threshold = tj.at("threshold").get<std::vector<double>>();
        const auto left = tj.at("left").get<std::vector<int>>();
        const auto right = tj.at("right").get<std::vector<int>>();
        const auto rate = tj.at("positiveRate").get<std::vector<double>>();
        const auto samples = tj.at("samples").get<std::vector<std::size_t>>();
        const auto decrease = tj.at("impurityDecrease").get<std::vector<double>>();
        const std::size_t n = feature.size();
        if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || rate.size() != n ||
            samples.size() != n || decrease.size() != n) {
            throw SchemaError("malformed tree arrays");
        }
        DecisionTree t;
        t.nodes.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& node = t.nodes[i];
            node.feature = feature[i];
            node.threshold = threshold[i];
            node.left = left[i];
            node.right = right[i];
            node.positiveRate = rate[i];
            node.samples = samples[i];
            node.impurityDecrease = decrease[i];
            if (!node.leaf()) {
                const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
                if (node.feature >= static_cast<int>(m.featureCount) || !in_range(node.left) ||
                    !in_range(node.right)) {
                    throw SchemaError("tree node references out of range");
                }
            }
        }
        m.trees.push_back(std::move(t));
    }
    if (m.trees.size() != m.config.treeCount) {
        throw SchemaError("tree count mismatch");
    }
    return m;
}

} // namespace clickbait::models
