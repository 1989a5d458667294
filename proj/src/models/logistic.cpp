#include "clickbait/models/logistic.hpp"

#include "clickbait/error.hpp"
#include "clickbait/random.hpp"

#include <algorithm>
#include <cmath>

namespace clickbait::models {

using nlohmann::json;

ClassWeights balanced_class_weights(std::span<const int> labels) {
    std::size_t n1 = 0;
    for (int y : labels) {
        n1 += y == 1;
    }
    const std::size_t n = labels.size();
    const std::size_t n0 = n - n1;
    if (n0 == 0 || n1 == 0) {
        throw ValidationError("labels", "balanced class weights need both classes present");
    }
    const double total = static_cast<double>(n);
    return {total / (2.0 * static_cast<double>(n0)), total / (2.0 * static_cast<double>(n1))};
}

void check_labels(std::span<const int> labels, std::size_t rows) {
    if (labels.size() != rows) {
        throw ValidationError("labels", "label count does not match row count");
    }
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw ValidationError("labels", "labels must be 0 or 1");
        }
    }
}

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow
double softplus(double z) {
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

// Largest eigenvalue of [X 1]^T [X 1] / n by power iteration.
double gram_spectral_norm(const Matrix& X, std::uint64_t seed) {
    const std::size_t d = X.cols + 1;
    Rng rng(seed);
    std::vector<double> v(d);
    for (auto& x : v) {
        x = rng.uniform(0.5, 1.5);
    }
    std::vector<double> w(d);
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        double norm = std::sqrt(dot(v, v));
        for (auto& x : v) {
            x /= norm;
        }
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t r = 0; r < X.rows; ++r) {
            auto row = X.row(r);
            const double proj = dot(row, std::span<const double>(v).first(X.cols)) + v[X.cols];
            for (std::size_t c = 0; c < X.cols; ++c) {
                w[c] += proj * row[c];
            }
            w[X.cols] += proj;
        }
        for (auto& x : w) {
            x /= static_cast<double>(X.rows);
        }
        const double next = dot(v, w);
        v.swap(w);
        if (it > 5 && std::abs(next - lambda) <= 1e-6 * std::abs(next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda;
}

} // namespace

double logistic_loss(const Matrix& X, std::span<const int> y, std::span<const double> weights, double bias,
                     const ClassWeights& cw, double l2Lambda) {
    double loss = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double z = dot(X.row(r), weights) + bias;
        // -log(sigmoid(z)) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
        loss += cw[y[r]] * (y[r] == 1 ? softplus(-z) : softplus(z));
    }
    loss /= static_cast<double>(X.rows);
    return loss + 0.5 * l2Lambda * dot(weights, weights);
}

LogisticModel train_logistic(const Matrix& X, std::span<const int> y, const LogisticConfig& cfg) {
    check_labels(y, X.rows);
    if (X.rows == 0) {
        throw ValidationError("X", "empty training matrix");
    }
    LogisticModel m;
    m.classWeights = cfg.classWeights ? *cfg.classWeights : balanced_class_weights(y);
    m.weights.assign(X.cols, 0.0);

    double step = cfg.learningRate;
    if (step <= 0.0) {
        const double wmax = std::max(m.classWeights.negative, m.classWeights.positive);
        const double lipschitz = 0.25 * wmax * gram_spectral_norm(X, cfg.seed) * 1.05 + cfg.l2Lambda;
        step = 1.0 / lipschitz;
    }

    const double n = static_cast<double>(X.rows);
    std::vector<double> grad(X.cols);
    for (std::size_t epoch = 0; epoch < cfg.maxEpochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        double loss = 0.0;
        for (std::size_t r = 0; r < X.rows; ++r) {
            auto row = X.row(r);
            const double z = dot(row, m.weights) + m.bias;
            const double w = m.classWeights[y[r]];
            loss += w * (y[r] == 1 ? softplus(-z) : softplus(z));
            const double residual = w * (sigmoid(z) - y[r]);
            for (std::size_t c = 0; c < X.cols; ++c) {
                grad[c] += residual * row[c];
            }
            grad_b += residual;
        }
        loss = loss / n + 0.5 * cfg.l2Lambda * dot(m.weights, m.weights);
        if (!std::isfinite(loss)) {
            throw TrainingError("logistic regression loss became non-finite at iteration " +
                                std::to_string(epoch));
        }
        double gmax = std::abs(grad_b / n);
        for (std::size_t c = 0; c < X.cols; ++c) {
            grad[c] = grad[c] / n + cfg.l2Lambda * m.weights[c];
            gmax = std::max(gmax, std::abs(grad[c]));
        }
        m.finalLoss = loss;
        m.epochs = epoch;
        if (gmax < cfg.gradientTolerance) {
            break;
        }
        for (std::size_t c = 0; c < X.cols; ++c) {
            m.weights[c] -= step * grad[c];
        }
        m.bias -= step * grad_b / n;
        m.epochs = epoch + 1;
    }
    m.finalLoss = logistic_loss(X, y, m.weights, m.bias, m.classWeights, cfg.l2Lambda);
    return m;
}

double predict_logistic(const LogisticModel& m, std::span<const double> x) {
    if (x.size() != m.weights.size()) {
        throw ValidationError("x", "expected " + std::to_string(m.weights.size()) + " features, got " +
                                       std::to_string(x.size()));
    }
    return sigmoid(dot(x, m.weights) + m.bias);
}

json LogisticModel::to_json() const {
    return json{{"weights", weights},
                {"bias", bias},
                {"classWeights", {classWeights.negative, classWeights.positive}},
                {"schemaVersion", schemaVersion},
                {"epochs", epochs},
                {"finalLoss", finalLoss}};
}

LogisticModel LogisticModel::from_json(const json& j) {
    LogisticModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    const auto cw = j.at("classWeights").get<std::vector<double>>();
    if (cw.size() != 2) {
        throw SchemaError("classWeights must have two entries");
    }
    m.classWeights = {cw[0], cw[1]};
    m.schemaVersion = j.at("schemaVersion").get<std::string>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.finalLoss = j.at("finalLoss").get<double>();
    return m;
}

} // namespace clickbait::models
