#pragma once

#include "clickbait/matrix.hpp"
#include "clickbait/models/common.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clickbait::models {

struct LogisticConfig {
    /// Fixed step size; <= 0 derives 1/L from a power-iteration estimate of
    /// the gradient's Lipschitz constant.
    double learningRate = 0.0;
    std::size_t maxEpochs = 5000;
    double l2Lambda = 1e-4;
    double gradientTolerance = 1e-6;
    std::uint64_t seed = 1;
    /// Balanced weights when unset.
    std::optional<ClassWeights> classWeights;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    ClassWeights classWeights;
    std::string schemaVersion;
    std::size_t epochs = 0;
    double finalLoss = 0.0;

    nlohmann::json to_json() const;
    static LogisticModel from_json(const nlohmann::json& j);
};

double sigmoid(double z);

/// Mean class-weighted cross-entropy plus (l2/2)|w|^2.
double logistic_loss(const Matrix& X, std::span<const int> y, std::span<const double> weights, double bias,
                     const ClassWeights& cw, double l2Lambda);

LogisticModel train_logistic(const Matrix& X, std::span<const int> y, const LogisticConfig& cfg = {});

double predict_logistic(const LogisticModel& m, std::span<const double> x);

} // namespace clickbait::models
