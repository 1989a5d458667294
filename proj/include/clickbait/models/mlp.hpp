#pragma once

// Feed-forward classifier: dense(in->50) -> dropout -> batch-norm ->
// dense(50->300) -> dropout -> batch-norm -> dense(300->2) -> softmax.

#include "clickbait/matrix.hpp"
#include "clickbait/models/adam.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace clickbait::models {

enum class Activation { Relu, Identity };

struct MlpArchitecture {
    std::size_t hidden1 = 50;
    std::size_t hidden2 = 300;
    double dropout1 = 0.2;
    double dropout2 = 0.3;
    /// false bypasses both batch-norm layers (parameters stay allocated).
    bool batchNorm = true;
    /// Applied after each hidden dense layer.
    Activation activation = Activation::Relu;
    double bnMomentum = 0.99;
    double bnEpsilon = 1e-5;
};

/// Named slice of the flat trainable vector.
struct TensorSlot {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const noexcept { return rows * cols; }
};

struct LayerSummary {
    std::string name;
    std::size_t parameters = 0;
};

struct MlpModel {
    std::size_t inputDim = 0;
    MlpArchitecture arch;
    std::vector<double> params; // trainable, laid out per slots()
    std::vector<double> moving; // mean1, var1, mean2, var2
    AdamState adam;
    std::string schemaVersion;
    /// Mean training loss per completed epoch.
    std::vector<double> lossHistory;

    std::vector<TensorSlot> slots() const;
    TensorSlot slot(const std::string& name) const;

    std::size_t trainableCount() const noexcept { return params.size(); }
    std::size_t nonTrainableCount() const noexcept { return moving.size(); }
    std::size_t totalCount() const noexcept { return params.size() + moving.size(); }
    /// dense_1, batch_norm_1, dense_2, batch_norm_2, dense_3 with counts that
    /// include the moving statistics.
    std::vector<LayerSummary> layers() const;

    nlohmann::json to_json() const;
    static MlpModel from_json(const nlohmann::json& j);
};

MlpModel build_mlp(std::size_t inputDim, std::uint64_t seed = 1, const MlpArchitecture& arch = {});

enum class ForwardMode { Train, Infer };

/// Class-probability rows. Train mode applies dropout drawn from `seed`, uses
/// batch statistics and updates the moving statistics.
Matrix mlp_forward(MlpModel& m, const Matrix& batch, ForwardMode mode, std::uint64_t seed = 0);

/// Inference-mode forward pass; leaves the model untouched.
Matrix mlp_predict(const MlpModel& m, const Matrix& batch);

/// Probability of class 1 for one row.
double predict_mlp(const MlpModel& m, std::span<const double> x);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient; // aligned with params
};

/// Mean cross-entropy (+ l2/2 over dense weights) and its gradient in train
/// mode on a fixed batch. `dropout` false disables dropout; moving statistics
/// are not touched.
LossAndGradient mlp_loss_and_gradient(const MlpModel& m, const Matrix& batch, std::span<const int> labels,
                                      bool dropout, std::uint64_t seed = 0, double l2Lambda = 0.0);

struct MlpTrainConfig {
    std::size_t epochs = 50;
    std::size_t batchSize = 64;
    double l2Lambda = 0.0;
    std::uint64_t seed = 1;
    AdamConfig adam;
    MlpArchitecture arch;
};

MlpModel train_mlp(const Matrix& X, std::span<const int> y, const MlpTrainConfig& cfg = {});

struct GradientCheckOptions {
    std::size_t samples = 200;
    double step = 1e-5;
    std::uint64_t seed = 1;
    /// Multiplies the analytic gradient; anything but 1 simulates a backprop bug.
    double gradientScale = 1.0;
};

struct GradientCheckResult {
    double maxRelativeError = 0.0;
    /// Worst |analytic - numeric|; near-zero gradients make the relative
    /// figure dominated by the roundoff floor of the differenced loss.
    double maxAbsoluteError = 0.0;
    std::size_t checked = 0;
    bool passed = false;
};

/// Central differences against backprop over randomly chosen parameters,
/// dropout off and batch-norm on batch statistics. Relative error is
/// |analytic - numeric| / max(|numeric|, 1e-6).
GradientCheckResult gradient_check(const MlpModel& m, const Matrix& batch, std::span<const int> labels,
                                   double tolerance, const GradientCheckOptions& opts = {});

} // namespace clickbait::models
