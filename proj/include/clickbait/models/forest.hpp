#pragma once

// CART random forest: bootstrap samples, Gini splits over a random feature
// subset per node, leaves holding class frequencies.

#include "clickbait/matrix.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace clickbait::models {

struct ForestConfig {
    std::size_t treeCount = 200;
    std::size_t maxDepth = 7;
    std::size_t maxFeaturesPerSplit = 19;
    std::uint64_t seed = 1;
    /// 0 = hardware concurrency. The result does not depend on it.
    std::size_t threads = 0;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;  // x[feature] <= threshold
    int right = -1;
    double positiveRate = 0.0; // class-1 frequency of the training samples reaching the node
    std::size_t samples = 0;
    /// Sample-weighted Gini decrease of this split, as a fraction of the root sample count.
    double impurityDecrease = 0.0;

    bool leaf() const noexcept { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double predict(std::span<const double> x) const;
    std::size_t depth() const;
};

struct ForestModel {
    ForestConfig config;
    std::size_t featureCount = 0;
    std::vector<DecisionTree> trees;

    nlohmann::json to_json() const;
    static ForestModel from_json(const nlohmann::json& j);
};

double gini(std::size_t positives, std::size_t total);

/// Grows one tree on the given (possibly repeated) sample indices.
DecisionTree grow_tree(const Matrix& X, std::span<const int> y, std::span<const std::size_t> samples,
                       const ForestConfig& cfg, std::uint64_t seed);

ForestModel train_forest(const Matrix& X, std::span<const int> y, const ForestConfig& cfg = {});

/// Mean of the trees' leaf class-1 frequencies.
double predict_forest(const ForestModel& m, std::span<const double> x);

/// Mean decrease in impurity per feature, averaged over trees and normalised
/// to sum 1 (all zeros when no tree split).
std::vector<double> forest_importances(const ForestModel& m);

} // namespace clickbait::models
