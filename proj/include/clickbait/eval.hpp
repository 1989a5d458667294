#pragma once

// Classification metrics, ROC curves and rank AUC over scored predictions.

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clickbait::eval {

struct Scored {
    double probability = 0.0;
    int label = 0;
    std::optional<double> truthMean;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0; // +inf for the (0,0) start point
};

struct EvalReport {
    std::size_t count = 0;
    double threshold = 0.5;
    double accuracy = 0.0;
    double mseHardLabel = 0.0;
    std::optional<double> mseTruthMean;
    std::optional<double> auc;
    double precisionPos = 0.0;
    double recallPos = 0.0;
    double f1Pos = 0.0;
    double precisionWeighted = 0.0;
    double recallWeighted = 0.0;
    double f1Weighted = 0.0;
    Confusion confusion;
    /// Set when a precision or recall denominator was zero and 0 was reported.
    bool zeroDivisionPrecision = false;
    bool zeroDivisionRecall = false;
    std::vector<RocPoint> rocPoints;

    nlohmann::json to_json() const;
};

/// Thresholded metrics; auc and rocPoints stay empty.
EvalReport binary_metrics(std::span<const Scored> scored, double threshold = 0.5);

enum class MseTarget { HardLabel, TruthMean };

double mse(std::span<const Scored> scored, MseTarget target);

/// Points from (0,0) through each distinct probability in descending order;
/// the last point is (1,1).
std::vector<RocPoint> roc_curve(std::span<const Scored> scored);

/// Mann-Whitney statistic, ties counted one half.
double auc(std::span<const Scored> scored);

/// Area under the piecewise-linear curve.
double trapezoid_area(std::span<const RocPoint> points);

/// binary_metrics plus both MSEs, AUC and ROC (the last two only when both
/// classes occur).
EvalReport evaluate(std::span<const Scored> scored, double threshold = 0.5);

/// Header row then one row per named report, columns in the order
/// dataset, accuracy, mse, auc, precision, recall, f1 (weighted variants),
/// followed by the positive-class and truth-mean extras.
void write_reports_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, EvalReport>>& reports);

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> points);

} // namespace clickbait::eval
