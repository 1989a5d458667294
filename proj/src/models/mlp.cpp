#include "clickbait/models/mlp.hpp"

#include "clickbait/error.hpp"
#include "clickbait/models/common.hpp"
#include "clickbait/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clickbait::models {

using nlohmann::json;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const RowVec>;
using VecMap = Eigen::Map<RowVec>;

constexpr std::size_t kClasses = 2;

// Views of the flat trainable vector.
struct Weights {
    ConstMatMap w1, w2, w3;
    ConstVecMap b1, g1, be1, b2, g2, be2, b3;
};

Weights view(const MlpModel& m) {
    const double* p = m.params.data();
    const std::size_t in = m.inputDim, h1 = m.arch.hidden1, h2 = m.arch.hidden2;
    auto take = [&](std::size_t n) {
        const double* at = p;
        p += n;
        return at;
    };
    const double* w1 = take(in * h1);
    const double* b1 = take(h1);
    const double* g1 = take(h1);
    const double* be1 = take(h1);
    const double* w2 = take(h1 * h2);
    const double* b2 = take(h2);
    const double* g2 = take(h2);
    const double* be2 = take(h2);
    const double* w3 = take(h2 * kClasses);
    const double* b3 = take(kClasses);
    return {ConstMatMap(w1, Eigen::Index(in), Eigen::Index(h1)),
            ConstMatMap(w2, Eigen::Index(h1), Eigen::Index(h2)),
            ConstMatMap(w3, Eigen::Index(h2), Eigen::Index(kClasses)),
            ConstVecMap(b1, Eigen::Index(h1)),
            ConstVecMap(g1, Eigen::Index(h1)),
            ConstVecMap(be1, Eigen::Index(h1)),
            ConstVecMap(b2, Eigen::Index(h2)),
            ConstVecMap(g2, Eigen::Index(h2)),
            ConstVecMap(be2, Eigen::Index(h2)),
            ConstVecMap(b3, Eigen::Index(kClasses))};
}

struct Hidden {
    RowMat z;      // dense output
    RowMat mask;   // scaled keep mask, empty without dropout
    RowMat d;      // after activation and dropout
    RowMat xhat;   // normalised
    RowVec invStd;
    RowVec batchMean;
    RowVec batchVar;
    RowMat y;      // layer output
};

struct Cache {
    Hidden l1, l2;
    RowMat logits;
    RowMat probs;
};

struct BnStats {
    ConstVecMap mean;
    ConstVecMap var;
};

RowMat activate(const RowMat& z, Activation a) {
    return a == Activation::Relu ? RowMat(z.cwiseMax(0.0)) : z;
}

// Dense -> activation -> dropout -> batch-norm.
void hidden_forward(Hidden& h, const RowMat& input, const ConstMatMap& w, const ConstVecMap& b,
                    const ConstVecMap& gamma, const ConstVecMap& beta, double rate, bool train, Rng* rng,
                    const BnStats& stats, const MlpArchitecture& arch) {
    h.z = (input * w).rowwise() + b;
    h.d = activate(h.z, arch.activation);
    if (train && rng != nullptr && rate > 0.0) {
        const double keep = 1.0 / (1.0 - rate);
        h.mask.resize(h.d.rows(), h.d.cols());
        for (Eigen::Index i = 0; i < h.mask.size(); ++i) {
            h.mask.data()[i] = rng->uniform() >= rate ? keep : 0.0;
        }
        h.d = h.d.cwiseProduct(h.mask);
    } else {
        h.mask.resize(0, 0);
    }
    if (!arch.batchNorm) {
        h.y = h.d;
        return;
    }
    if (train) {
        h.batchMean = h.d.colwise().mean();
        const RowMat centered = h.d.rowwise() - h.batchMean;
        h.batchVar = centered.array().square().colwise().mean();
        h.invStd = (h.batchVar.array() + arch.bnEpsilon).rsqrt();
        h.xhat = centered.array().rowwise() * h.invStd.array();
    } else {
        h.invStd = (stats.var.array() + arch.bnEpsilon).rsqrt();
        h.xhat = (h.d.rowwise() - RowVec(stats.mean)).array().rowwise() * h.invStd.array();
    }
    h.y = (h.xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
}

void softmax_rows(const RowMat& logits, RowMat& probs) {
    probs.resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double top = logits.row(r).maxCoeff();
        const RowVec e = (logits.row(r).array() - top).exp();
        probs.row(r) = e / e.sum();
    }
}

void forward(const MlpModel& m, const Matrix& batch, bool train, Rng* rng, Cache& c) {
    if (batch.cols != m.inputDim) {
        throw ValidationError("batch", "expected " + std::to_string(m.inputDim) + " columns, got " +
                                           std::to_string(batch.cols));
    }
    if (train && batch.rows < 2) {
        throw ValidationError("batch", "train mode needs at least 2 rows for batch statistics");
    }
    const Weights w = view(m);
    const Eigen::Index h1 = Eigen::Index(m.arch.hidden1), h2 = Eigen::Index(m.arch.hidden2);
    const BnStats s1{ConstVecMap(m.moving.data(), h1), ConstVecMap(m.moving.data() + h1, h1)};
    const BnStats s2{ConstVecMap(m.moving.data() + 2 * h1, h2), ConstVecMap(m.moving.data() + 2 * h1 + h2, h2)};
    const RowMat x = ConstMatMap(batch.data.data(), Eigen::Index(batch.rows), Eigen::Index(batch.cols));
    hidden_forward(c.l1, x, w.w1, w.b1, w.g1, w.be1, m.arch.dropout1, train, rng, s1, m.arch);
    hidden_forward(c.l2, c.l1.y, w.w2, w.b2, w.g2, w.be2, m.arch.dropout2, train, rng, s2, m.arch);
    c.logits = (c.l2.y * w.w3).rowwise() + w.b3;
    softmax_rows(c.logits, c.probs);
}

Matrix to_matrix(const RowMat& p) {
    Matrix out(static_cast<std::size_t>(p.rows()), static_cast<std::size_t>(p.cols()));
    std::copy(p.data(), p.data() + p.size(), out.data.begin());
    return out;
}

// Returns dL/d(input) and writes parameter gradients for one hidden block.
RowMat hidden_backward(const Hidden& h, const RowMat& input, const RowMat& dy, const ConstMatMap& w,
                       const ConstVecMap& gamma, const MlpArchitecture& arch, MatMap dw, VecMap db,
                       VecMap dgamma, VecMap dbeta) {
    RowMat dd;
    if (arch.batchNorm) {
        const double n = static_cast<double>(dy.rows());
        dgamma = dy.cwiseProduct(h.xhat).colwise().sum();
        dbeta = dy.colwise().sum();
        const RowMat dxhat = dy.array().rowwise() * gamma.array();
        const RowVec sum_dxhat = dxhat.colwise().sum();
        const RowVec sum_dxhat_xhat = dxhat.cwiseProduct(h.xhat).colwise().sum();
        const RowMat inner = (n * dxhat).rowwise() - sum_dxhat -
                             RowMat(h.xhat.array().rowwise() * sum_dxhat_xhat.array());
        dd = (inner.array().rowwise() * (h.invStd.array() / n)).matrix();
    } else {
        dgamma.setZero();
        dbeta.setZero();
        dd = dy;
    }
    RowMat dz = h.mask.size() ? RowMat(dd.cwiseProduct(h.mask)) : dd;
    if (arch.activation == Activation::Relu) {
        dz = dz.cwiseProduct(RowMat((h.z.array() > 0.0).cast<double>()));
    }
    dw = input.transpose() * dz;
    db = dz.colwise().sum();
    return dz * w.transpose();
}

} // namespace

std::vector<TensorSlot> MlpModel::slots() const {
    const std::size_t h1 = arch.hidden1, h2 = arch.hidden2;
    std::vector<TensorSlot> s = {
        {"dense_1.kernel", inputDim, h1, 0}, {"dense_1.bias", 1, h1, 0},
        {"batch_norm_1.gamma", 1, h1, 0},    {"batch_norm_1.beta", 1, h1, 0},
        {"dense_2.kernel", h1, h2, 0},       {"dense_2.bias", 1, h2, 0},
        {"batch_norm_2.gamma", 1, h2, 0},    {"batch_norm_2.beta", 1, h2, 0},
        {"dense_3.kernel", h2, kClasses, 0}, {"dense_3.bias", 1, kClasses, 0},
    };
    std::size_t offset = 0;
    for (auto& t : s) {
        t.offset = offset;
        offset += t.size();
    }
    return s;
}

TensorSlot MlpModel::slot(const std::string& name) const {
    for (const auto& t : slots()) {
        if (t.name == name) {
            return t;
        }
    }
    throw ValidationError("slot", "unknown tensor " + name);
}

std::vector<LayerSummary> MlpModel::layers() const {
    const std::size_t h1 = arch.hidden1, h2 = arch.hidden2;
    return {{"dense_1", (inputDim + 1) * h1},
            {"batch_norm_1", 4 * h1},
            {"dense_2", (h1 + 1) * h2},
            {"batch_norm_2", 4 * h2},
            {"dense_3", (h2 + 1) * kClasses}};
}

MlpModel build_mlp(std::size_t inputDim, std::uint64_t seed, const MlpArchitecture& arch) {
    if (inputDim == 0) {
        throw ValidationError("inputDim", "must be at least 1");
    }
    if (arch.hidden1 == 0 || arch.hidden2 == 0) {
        throw ValidationError("arch", "hidden widths must be positive");
    }
    if (arch.dropout1 < 0.0 || arch.dropout1 >= 1.0 || arch.dropout2 < 0.0 || arch.dropout2 >= 1.0) {
        throw ValidationError("arch", "dropout rates must lie in [0, 1)");
    }
    MlpModel m;
    m.inputDim = inputDim;
    m.arch = arch;
    const auto slots = m.slots();
    m.params.assign(slots.back().offset + slots.back().size(), 0.0);
    Rng rng(seed);
    for (const auto& t : slots) {
        if (t.name.ends_with(".kernel")) {
            const double limit = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
            for (std::size_t i = 0; i < t.size(); ++i) {
                m.params[t.offset + i] = rng.uniform(-limit, limit);
            }
        } else if (t.name.ends_with(".gamma")) {
            std::fill_n(m.params.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), 1.0);
        }
    }
    const std::size_t h1 = arch.hidden1, h2 = arch.hidden2;
    m.moving.assign(2 * (h1 + h2), 0.0);
    std::fill_n(m.moving.begin() + static_cast<std::ptrdiff_t>(h1), h1, 1.0);
    std::fill_n(m.moving.begin() + static_cast<std::ptrdiff_t>(2 * h1 + h2), h2, 1.0);
    m.adam = AdamState(m.params.size());
    return m;
}

Matrix mlp_forward(MlpModel& m, const Matrix& batch, ForwardMode mode, std::uint64_t seed) {
    Cache c;
    if (mode == ForwardMode::Infer) {
        forward(m, batch, false, nullptr, c);
        return to_matrix(c.probs);
    }
    Rng rng(seed);
    forward(m, batch, true, &rng, c);
    if (m.arch.batchNorm) {
        const double mom = m.arch.bnMomentum;
        const Eigen::Index h1 = Eigen::Index(m.arch.hidden1), h2 = Eigen::Index(m.arch.hidden2);
        auto blend = [&](double* dst, const RowVec& batchStat) {
            VecMap v(dst, batchStat.size());
            v = mom * v + (1.0 - mom) * batchStat;
        };
        blend(m.moving.data(), c.l1.batchMean);
        blend(m.moving.data() + h1, c.l1.batchVar);
        blend(m.moving.data() + 2 * h1, c.l2.batchMean);
        blend(m.moving.data() + 2 * h1 + h2, c.l2.batchVar);
    }
    return to_matrix(c.probs);
}

Matrix mlp_predict(const MlpModel& m, const Matrix& batch) {
    Cache c;
    forward(m, batch, false, nullptr, c);
    return to_matrix(c.probs);
}

double predict_mlp(const MlpModel& m, std::span<const double> x) {
    if (x.size() != m.inputDim) {
        throw ValidationError("x", "expected " + std::to_string(m.inputDim) + " features, got " +
                                       std::to_string(x.size()));
    }
    Matrix one(1, x.size());
    std::copy(x.begin(), x.end(), one.data.begin());
    return mlp_predict(m, one)(0, 1);
}

LossAndGradient mlp_loss_and_gradient(const MlpModel& m, const Matrix& batch, std::span<const int> labels,
                                      bool dropout, std::uint64_t seed, double l2Lambda) {
    check_labels(labels, batch.rows);
    Cache c;
    Rng rng(seed);
    forward(m, batch, true, dropout ? &rng : nullptr, c);

    const Eigen::Index n = Eigen::Index(batch.rows);
    LossAndGradient out;
    RowMat dlogits = c.probs;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index y = labels[static_cast<std::size_t>(r)];
        const double top = c.logits.row(r).maxCoeff();
        const double lse = top + std::log((c.logits.row(r).array() - top).exp().sum());
        out.loss -= c.logits(r, y) - lse;
        dlogits(r, y) -= 1.0;
    }
    out.loss /= static_cast<double>(n);
    dlogits /= static_cast<double>(n);

    const Weights w = view(m);
    if (l2Lambda > 0.0) {
        out.loss += 0.5 * l2Lambda *
                    (w.w1.squaredNorm() + w.w2.squaredNorm() + w.w3.squaredNorm());
    }

    out.gradient.assign(m.params.size(), 0.0);
    const auto slots = m.slots();
    auto mat = [&](std::size_t k) {
        return MatMap(out.gradient.data() + slots[k].offset, Eigen::Index(slots[k].rows),
                      Eigen::Index(slots[k].cols));
    };
    auto vec = [&](std::size_t k) {
        return VecMap(out.gradient.data() + slots[k].offset, Eigen::Index(slots[k].size()));
    };

    MatMap dw3 = mat(8);
    dw3 = c.l2.y.transpose() * dlogits;
    vec(9) = dlogits.colwise().sum();
    const RowMat dy2 = dlogits * w.w3.transpose();
    const RowMat dy1 = hidden_backward(c.l2, c.l1.y, dy2, w.w2, w.g2, m.arch, mat(4), vec(5), vec(6), vec(7));
    const RowMat x = ConstMatMap(batch.data.data(), n, Eigen::Index(batch.cols));
    hidden_backward(c.l1, x, dy1, w.w1, w.g1, m.arch, mat(0), vec(1), vec(2), vec(3));

    if (l2Lambda > 0.0) {
        for (std::size_t k : {0u, 4u, 8u}) {
            for (std::size_t i = 0; i < slots[k].size(); ++i) {
                out.gradient[slots[k].offset + i] += l2Lambda * m.params[slots[k].offset + i];
            }
        }
    }
    return out;
}

MlpModel train_mlp(const Matrix& X, std::span<const int> y, const MlpTrainConfig& cfg) {
    check_labels(y, X.rows);
    if (X.rows < 2) {
        throw ValidationError("X", "need at least 2 rows to train");
    }
    if (cfg.batchSize == 0) {
        throw ValidationError("batchSize", "must be at least 1");
    }
    if (!(cfg.adam.learningRate > 0.0)) {
        throw ValidationError("learningRate", "must be positive");
    }
    MlpModel m = build_mlp(X.cols, cfg.seed, cfg.arch);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(X.rows);

    // Batch boundaries; a trailing single row joins the previous batch.
    std::vector<std::size_t> bounds;
    for (std::size_t start = 0; start < X.rows; start += cfg.batchSize) {
        bounds.push_back(start);
    }
    bounds.push_back(X.rows);
    if (bounds.size() > 2 && bounds[bounds.size() - 1] - bounds[bounds.size() - 2] == 1) {
        bounds.erase(bounds.end() - 2);
    }

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
            std::span<const std::size_t> idx(order.data() + bounds[b], bounds[b + 1] - bounds[b]);
            const Matrix batch = X.select_rows(idx);
            std::vector<int> labels(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                labels[k] = y[idx[k]];
            }
            const std::uint64_t dropout_seed = rng.next();
            auto lg = mlp_loss_and_gradient(m, batch, labels, true, dropout_seed, cfg.l2Lambda);
            if (!std::isfinite(lg.loss)) {
                throw TrainingError("MLP loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b));
            }
            // Same dropout draw, now updating the moving statistics.
            mlp_forward(m, batch, ForwardMode::Train, dropout_seed);
            adam_step(m.params, lg.gradient, m.adam, cfg.adam);
            epoch_loss += lg.loss * static_cast<double>(idx.size());
        }
        m.lossHistory.push_back(epoch_loss / static_cast<double>(X.rows));
    }
    return m;
}

GradientCheckResult gradient_check(const MlpModel& m, const Matrix& batch, std::span<const int> labels,
                                   double tolerance, const GradientCheckOptions& opts) {
    if (batch.rows < 2) {
        throw ValidationError("batch", "gradient check needs at least 2 rows");
    }
    const auto analytic = mlp_loss_and_gradient(m, batch, labels, false);
    MlpModel probe = m;
    Rng rng(opts.seed);
    const std::size_t count = std::min(opts.samples, m.params.size());
    std::vector<std::size_t> chosen(m.params.size());
    std::iota(chosen.begin(), chosen.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(chosen[i], chosen[i + rng.index(chosen.size() - i)]);
    }

    GradientCheckResult r;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = chosen[k];
        const double saved = probe.params[i];
        probe.params[i] = saved + opts.step;
        const double up = mlp_loss_and_gradient(probe, batch, labels, false).loss;
        probe.params[i] = saved - opts.step;
        const double down = mlp_loss_and_gradient(probe, batch, labels, false).loss;
        probe.params[i] = saved;
        const double numeric = (up - down) / (2.0 * opts.step);
        const double a = analytic.gradient[i] * opts.gradientScale;
        const double err = std::abs(a - numeric) / std::max(std::abs(numeric), 1e-6);
        r.maxRelativeError = std::max(r.maxRelativeError, err);
        r.maxAbsoluteError = std::max(r.maxAbsoluteError, std::abs(a - numeric));
        ++r.checked;
    }
    r.passed = r.maxRelativeError < tolerance;
    return r;
}

json MlpModel::to_json() const {
    json tensors = json::array();
    for (const auto& t : slots()) {
        tensors.push_back({{"name", t.name},
                           {"shape", {t.rows, t.cols}},
                           {"values", std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(t.offset),
                                                          params.begin() +
                                                              static_cast<std::ptrdiff_t>(t.offset + t.size()))}});
    }
    const auto h1 = static_cast<std::ptrdiff_t>(arch.hidden1), h2 = static_cast<std::ptrdiff_t>(arch.hidden2);
    auto part = [&](std::ptrdiff_t from, std::ptrdiff_t n) {
        return std::vector<double>(moving.begin() + from, moving.begin() + from + n);
    };
    json stats = {
        {"batch_norm_1.moving_mean", part(0, h1)},
        {"batch_norm_1.moving_variance", part(h1, h1)},
        {"batch_norm_2.moving_mean", part(2 * h1, h2)},
        {"batch_norm_2.moving_variance", part(2 * h1 + h2, h2)},
    };
    return json{{"inputDim", inputDim},
                {"architecture",
                 {{"hidden1", arch.hidden1},
                  {"hidden2", arch.hidden2},
                  {"dropout1", arch.dropout1},
                  {"dropout2", arch.dropout2},
                  {"batchNorm", arch.batchNorm},
                  {"activation", arch.activation == Activation::Relu ? "relu" : "identity"},
                  {"bnMomentum", arch.bnMomentum},
                  {"bnEpsilon", arch.bnEpsilon}}},
                {"tensors", tensors},
                {"movingStatistics", stats},
                {"adamStep", adam.step},
                {"schemaVersion", schemaVersion},
                {"lossHistory", lossHistory}};
}

MlpModel MlpModel::from_json(const json& j) {
    MlpModel m;
    m.inputDim = j.at("inputDim").get<std::size_t>();
    const auto& a = j.at("architecture");
    m.arch.hidden1 = a.at("hidden1").get<std::size_t>();
    m.arch.hidden2 = a.at("hidden2").get<std::size_t>();
    m.arch.dropout1 = a.at("dropout1").get<double>();
    m.arch.dropout2 = a.at("dropout2").get<double>();
    m.arch.batchNorm = a.at("batchNorm").get<bool>();
    const auto act = a.at("activation").get<std::string>();
    if (act != "relu" && act != "identity") {
        throw SchemaError("unknown activation " + act);
    }
    m.arch.activation = act == "relu" ? Activation::Relu : Activation::Identity;
    m.arch.bnMomentum = a.at("bnMomentum").get<double>();
    m.arch.bnEpsilon = a.at("bnEpsilon").get<double>();

    const auto slots = m.slots();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != slots.size()) {
        throw SchemaError("expected " + std::to_string(slots.size()) + " tensors");
    }
    m.params.assign(slots.back().offset + slots.back().size(), 0.0);
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const auto& t = tensors[k];
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        const auto values = t.at("values").get<std::vector<double>>();
        if (t.at("name").get<std::string>() != slots[k].name || shape.size() != 2 ||
            shape[0] != slots[k].rows || shape[1] != slots[k].cols || values.size() != slots[k].size()) {
            throw SchemaError("tensor " + slots[k].name + " has the wrong name or shape");
        }
        std::copy(values.begin(), values.end(), m.params.begin() + static_cast<std::ptrdiff_t>(slots[k].offset));
    }
    const auto& s = j.at("movingStatistics");
    for (const char* key : {"batch_norm_1.moving_mean", "batch_norm_1.moving_variance",
                            "batch_norm_2.moving_mean", "batch_norm_2.moving_variance"}) {
        const auto v = s.at(key).get<std::vector<double>>();
        const std::size_t want = std::string_view(key).starts_with("batch_norm_1") ? m.arch.hidden1 : m.arch.hidden2;
        if (v.size() != want) {
            throw SchemaError(std::string(key) + " has the wrong length");
        }
        m.moving.insert(m.moving.end(), v.begin(), v.end());
    }
    m.adam = AdamState(m.params.size());
    m.adam.step = j.value("adamStep", std::size_t{0});
    m.schemaVersion = j.value("schemaVersion", std::string{});
    m.lossHistory = j.value("lossHistory", std::vector<double>{});
    return m;
}

} // namespace clickbait::models
