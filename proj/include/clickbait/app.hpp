#pragma once

// Model persistence, request scoring and the resident HTTP service.

#include "clickbait/embed.hpp"
#include "clickbait/error.hpp"
#include "clickbait/eval.hpp"
#include "clickbait/features.hpp"
#include "clickbait/models/forest.hpp"
#include "clickbait/models/logistic.hpp"
#include "clickbait/models/mlp.hpp"
#include "clickbait/nlp.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace clickbait::app {

inline constexpr int kFormatVersion = 1;

enum class ModelType { Logistic, Forest, Mlp };

/// "lr", "rf", "mlp".
std::string_view model_type_name(ModelType t);
ModelType parse_model_type(std::string_view name);

/// A classifier together with everything needed to score raw feature vectors.
struct TrainedModel {
    std::variant<models::LogisticModel, models::ForestModel, models::MlpModel> model;
    features::Preprocessor preprocessor;
    features::FeatureSchema schema;
    /// Split parameters, row counts and resource paths recorded at training time.
    nlohmann::json training = nlohmann::json::object();

    ModelType type() const;
    /// Probability of class 1 for an assembled (unpreprocessed) feature vector.
    double predict(std::span<const double> rawFeatures) const;

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json& j);
};

void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

/// Preprocessing mode each model family trains on.
features::PreprocessMode preprocess_mode_for(ModelType t);

struct TrainOptions {
    ModelType type = ModelType::Logistic;
    std::uint64_t seed = 1;
    double trainFraction = 0.67;
    models::LogisticConfig logistic;
    models::ForestConfig forest;
    models::MlpTrainConfig mlp;
};

struct RowSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded split of dataset rows, identical to the corpus split.
RowSplit split_rows(std::size_t n, double trainFraction, std::uint64_t seed);

/// Fits the preprocessor and model on the training part of the seeded split.
TrainedModel train_model(const features::Dataset& ds, const TrainOptions& opts);

std::vector<double> predict_rows(const TrainedModel& m, const Matrix& X);

/// Reports for the "train" and "test" parts of the split recorded in the model.
std::vector<std::pair<std::string, eval::EvalReport>> evaluate_model(const TrainedModel& m,
                                                                     const features::Dataset& ds);

// --- scoring ----------------------------------------------------------------

struct ScoreRequest {
    std::string postText;
    std::string targetTitle;
    std::string targetDescription;
    std::vector<std::string> targetParagraphs;
    std::string targetKeywords;
    std::vector<std::string> targetCaptions;
    /// Overrides the caption count feature; defaults to |targetCaptions|.
    std::optional<long long> numImages;
    /// Overrides the paragraph count feature; defaults to |targetParagraphs|.
    std::optional<long long> numParagraphs;
    /// Media attached to the post itself; defaults to 0.
    std::optional<long long> postMediaCount;
};

struct FieldError {
    std::string field;
    std::string message;
};

/// Raised for request bodies that fail validation; carries every problem found.
class RequestError : public ValidationError {
public:
    explicit RequestError(std::vector<FieldError> errors);
    const std::vector<FieldError>& errors() const noexcept { return errors_; }

private:
    std::vector<FieldError> errors_;
};

ScoreRequest parse_score_request(const nlohmann::json& body);
nlohmann::json to_json(const ScoreRequest& r);

struct ScoreResponse {
    double probability = 0.0;
    std::string label; // "clickbait" or "no-clickbait"
    std::string modelType;
    double latencyMs = 0.0;
    std::optional<std::map<std::string, double>> featureEcho;

    nlohmann::json to_json() const;
};

/// The instance a request describes, as the feature pipeline sees it.
corpus::Instance request_instance(const ScoreRequest& r);

/// Scores requests against resident, read-only resources. Safe to share
/// across threads.
class Scorer {
public:
    Scorer(const TrainedModel& model, const embed::EmbeddingTable& table, const nlp::Lexicons& lexicons);

    ScoreResponse score(const ScoreRequest& req, bool echoFeatures = false) const;

    /// Raw feature vector for a request, with the count overrides applied.
    std::vector<double> features(const ScoreRequest& req) const;

    const TrainedModel& model() const noexcept { return model_; }
    std::size_t embeddingDim() const noexcept { return table_.dimension(); }
    nlohmann::json schema_json() const;

private:
    const TrainedModel& model_;
    const embed::EmbeddingTable& table_;
    const nlp::Lexicons& lexicons_;
    nlp::TagSet tagset_;
};

ScoreResponse score_one(const ScoreRequest& req, const Scorer& scorer, bool echoFeatures = false);

// --- resources and service ---------------------------------------------------

/// Flag value, else the environment variable, else the fallback.
std::optional<std::filesystem::path> resolve_path(const std::optional<std::filesystem::path>& flag,
                                                  const char* envVar,
                                                  const std::optional<std::filesystem::path>& fallback = {});

inline constexpr const char* kEnvDataDir = "CLICKBAIT_DATA_DIR";
inline constexpr const char* kEnvEmbeddings = "CLICKBAIT_EMBEDDINGS";
inline constexpr const char* kEnvModel = "CLICKBAIT_MODEL";

/// Lexicon directory compiled into the build.
std::filesystem::path default_data_dir();

/// HTTP front end: POST /score, GET /health, GET /schema.
class ScoreServer {
public:
    explicit ScoreServer(const Scorer& scorer);
    ~ScoreServer();
    ScoreServer(const ScoreServer&) = delete;
    ScoreServer& operator=(const ScoreServer&) = delete;

    /// Binds the socket; port 0 picks a free one. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); blocks the caller.
    void listen();
    /// Serves on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace clickbait::app
