#include "clickbait/app.hpp"

#include "clickbait/corpus.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace clickbait::app {

using nlohmann::json;

std::string_view model_type_name(ModelType t) {
    switch (t) {
    case ModelType::Logistic: return "lr";
    case ModelType::Forest: return "rf";
    case ModelType::Mlp: return "mlp";
    }
    return "lr";
}

ModelType parse_model_type(std::string_view name) {
    if (name == "lr" || name == "logistic") return ModelType::Logistic;
    if (name == "rf" || name == "forest") return ModelType::Forest;
    if (name == "mlp") return ModelType::Mlp;
    throw ValidationError("model", "unknown model type '" + std::string(name) + "' (expected lr, rf or mlp)");
}

features::PreprocessMode preprocess_mode_for(ModelType t) {
    switch (t) {
    case ModelType::Logistic: return features::PreprocessMode::PruneAndStandardize;
    case ModelType::Forest: return features::PreprocessMode::Identity;
    case ModelType::Mlp: return features::PreprocessMode::Standardize;
    }
    return features::PreprocessMode::Identity;
}

// --- TrainedModel -------------------------------------------------------------

ModelType TrainedModel::type() const {
    return static_cast<ModelType>(model.index());
}

double TrainedModel::predict(std::span<const double> rawFeatures) const {
    if (rawFeatures.size() != schema.size()) {
        throw ValidationError("features", "expected " + std::to_string(schema.size()) + " values, got " +
                                              std::to_string(rawFeatures.size()));
    }
    const auto x = features::apply_preprocessor(preprocessor, rawFeatures, schema.version());
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, models::LogisticModel>) {
                return models::predict_logistic(m, x);
            } else if constexpr (std::is_same_v<T, models::ForestModel>) {
                return models::predict_forest(m, x);
            } else {
                return models::predict_mlp(m, x);
            }
        },
        model);
}

json TrainedModel::to_json() const {
    json params = std::visit([](const auto& m) { return m.to_json(); }, model);
    return json{{"formatVersion", kFormatVersion},
                {"modelType", model_type_name(type())},
                {"featureSchema", schema.to_json()},
                {"preprocessor", preprocessor.to_json()},
                {"parameters", std::move(params)},
                {"training", training}};
}

TrainedModel TrainedModel::from_json(const json& j) {
    if (!j.is_object() || !j.contains("formatVersion")) {
        throw SchemaError("not a model file: formatVersion missing");
    }
    const auto& fv = j.at("formatVersion");
    if (!fv.is_number_integer() || fv.get<int>() != kFormatVersion) {
        throw SchemaError("unsupported model formatVersion " + fv.dump() + " (this build reads " +
                          std::to_string(kFormatVersion) + ")");
    }
    TrainedModel m;
    try {
        const auto type = parse_model_type(j.at("modelType").get<std::string>());
        m.schema = features::FeatureSchema::from_json(j.at("featureSchema"));
        m.preprocessor = features::Preprocessor::from_json(j.at("preprocessor"));
        const auto& p = j.at("parameters");
        std::size_t width = 0;
        switch (type) {
        case ModelType::Logistic: {
            auto lm = models::LogisticModel::from_json(p);
            width = lm.weights.size();
            m.model = std::move(lm);
            break;
        }
        case ModelType::Forest: {
            auto fm = models::ForestModel::from_json(p);
            width = fm.featureCount;
            m.model = std::move(fm);
            break;
        }
        case ModelType::Mlp: {
            auto mm = models::MlpModel::from_json(p);
            width = mm.inputDim;
            m.model = std::move(mm);
            break;
        }
        }
        m.training = j.value("training", json::object());
        if (m.preprocessor.inputDim != m.schema.size() || m.preprocessor.outputDim() != width) {
            throw SchemaError("model parameters do not match the preprocessor and feature schema");
        }
        if (m.preprocessor.schemaVersion != m.schema.version()) {
            throw SchemaError("preprocessor was fitted against a different feature schema");
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed model file: ") + e.what());
    } catch (const ValidationError& e) {
        throw SchemaError(std::string("malformed model file: ") + e.what());
    }
    return m;
}

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << m.to_json().dump() << '\n';
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read model file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw SchemaError("model file " + path.string() + " is truncated or not JSON: " + e.what());
    }
    return TrainedModel::from_json(j);
}

// --- training and evaluation ---------------------------------------------------

RowSplit split_rows(std::size_t n, double trainFraction, std::uint64_t seed) {
    if (n == 0) {
        throw ValidationError("features", "dataset is empty");
    }
    const std::size_t cut = corpus::train_size(n, trainFraction);
    const auto order = corpus::split_order(n, seed);
    RowSplit s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    return s;
}

namespace {

std::vector<int> labels_at(const features::Dataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<int> y;
    y.reserve(rows.size());
    for (std::size_t r : rows) {
        y.push_back(ds.labels[r]);
    }
    return y;
}

} // namespace

TrainedModel train_model(const features::Dataset& ds, const TrainOptions& opts) {
    const auto split = split_rows(ds.size(), opts.trainFraction, opts.seed);
    const Matrix X = ds.X.select_rows(split.train);
    const auto y = labels_at(ds, split.train);
    const std::string version = ds.schema.version();

    TrainedModel m;
    m.schema = ds.schema;
    m.preprocessor = features::fit_preprocessor(X, preprocess_mode_for(opts.type), version);
    const Matrix P = m.preprocessor.apply(X);
    switch (opts.type) {
    case ModelType::Logistic: {
        auto cfg = opts.logistic;
        cfg.seed = opts.seed;
        auto lm = models::train_logistic(P, y, cfg);
        lm.schemaVersion = version;
        m.model = std::move(lm);
        break;
    }
    case ModelType::Forest: {
        auto cfg = opts.forest;
        cfg.seed = opts.seed;
        m.model = models::train_forest(P, y, cfg);
        break;
    }
    case ModelType::Mlp: {
        auto cfg = opts.mlp;
        cfg.seed = opts.seed;
        auto mm = models::train_mlp(P, y, cfg);
        mm.schemaVersion = version;
        m.model = std::move(mm);
        break;
    }
    }
    m.training = {{"seed", opts.seed},
                  {"trainFraction", opts.trainFraction},
                  {"datasetRows", ds.size()},
                  {"trainRows", split.train.size()},
                  {"testRows", split.test.size()}};
    return m;
}

std::vector<double> predict_rows(const TrainedModel& m, const Matrix& X) {
    std::vector<double> out(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) {
        out[r] = m.predict(X.row(r));
    }
    return out;
}

std::vector<std::pair<std::string, eval::EvalReport>> evaluate_model(const TrainedModel& m,
                                                                     const features::Dataset& ds) {
    const auto seed = m.training.value("seed", std::uint64_t{1});
    const auto fraction = m.training.value("trainFraction", 0.67);
    const auto rows = m.training.value("datasetRows", ds.size());
    if (rows != ds.size()) {
        throw ValidationError("features", "dataset has " + std::to_string(ds.size()) +
                                              " rows but the model was trained on a split of " +
                                              std::to_string(rows));
    }
    const auto split = split_rows(ds.size(), fraction, seed);
    std::vector<std::pair<std::string, eval::EvalReport>> out;
    for (const auto& [name, idx] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
        if (idx->empty()) {
            continue;
        }
        std::vector<eval::Scored> scored;
        scored.reserve(idx->size());
        for (std::size_t r : *idx) {
            scored.push_back({m.predict(ds.X.row(r)), ds.labels[r], ds.truthMeans[r]});
        }
        out.emplace_back(name, eval::evaluate(scored));
    }
    return out;
}

// --- requests -------------------------------------------------------------------

RequestError::RequestError(std::vector<FieldError> errors)
    : ValidationError(errors.empty() ? "" : errors.front().field,
                      errors.empty() ? "invalid request" : errors.front().message),
      errors_(std::move(errors)) {}

namespace {

constexpr long long kMaxCount = 100000;

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

} // namespace

ScoreRequest parse_score_request(const json& body) {
    if (!body.is_object()) {
        throw RequestError(std::vector<FieldError>{{"body", "must be a JSON object"}});
    }
    ScoreRequest r;
    std::vector<FieldError> errors;

    auto text = [&](const char* key, std::string& dst, bool required) {
        auto it = body.find(key);
        if (it == body.end() || it->is_null()) {
            if (required) {
                errors.push_back({key, "is required"});
            }
            return;
        }
        if (!it->is_string()) {
            errors.push_back({key, "must be a string"});
            return;
        }
        dst = it->get<std::string>();
    };
    auto list = [&](const char* key, std::vector<std::string>& dst) {
        auto it = body.find(key);
        if (it == body.end() || it->is_null()) {
            return;
        }
        if (!it->is_array()) {
            errors.push_back({key, "must be an array of strings"});
            return;
        }
        for (const auto& e : *it) {
            if (!e.is_string()) {
                errors.push_back({key, "must be an array of strings"});
                return;
            }
            dst.push_back(e.get<std::string>());
        }
    };
    auto count = [&](const char* key, std::optional<long long>& dst) {
        auto it = body.find(key);
        if (it == body.end() || it->is_null()) {
            return;
        }
        if (!it->is_number_integer() || it->get<long long>() < 0 || it->get<long long>() > kMaxCount) {
            errors.push_back({key, "must be an integer between 0 and " + std::to_string(kMaxCount)});
            return;
        }
        dst = it->get<long long>();
    };

    text("postText", r.postText, true);
    if (errors.empty() && blank(r.postText)) {
        errors.push_back({"postText", "must not be empty"});
    }
    text("targetTitle", r.targetTitle, false);
    text("targetDescription", r.targetDescription, false);
    text("targetKeywords", r.targetKeywords, false);
    list("targetParagraphs", r.targetParagraphs);
    list("targetCaptions", r.targetCaptions);
    count("numImages", r.numImages);
    count("numParagraphs", r.numParagraphs);
    count("postMediaCount", r.postMediaCount);
    if (!errors.empty()) {
        throw RequestError(std::move(errors));
    }
    return r;
}

json to_json(const ScoreRequest& r) {
    json j = {{"postText", r.postText},
              {"targetTitle", r.targetTitle},
              {"targetDescription", r.targetDescription},
              {"targetParagraphs", r.targetParagraphs},
              {"targetKeywords", r.targetKeywords},
              {"targetCaptions", r.targetCaptions}};
    if (r.numImages) j["numImages"] = *r.numImages;
    if (r.numParagraphs) j["numParagraphs"] = *r.numParagraphs;
    if (r.postMediaCount) j["postMediaCount"] = *r.postMediaCount;
    return j;
}

json ScoreResponse::to_json() const {
    json j = {{"probability", probability}, {"label", label}, {"modelType", modelType}, {"latencyMs", latencyMs}};
    if (featureEcho) {
        j["featureEcho"] = *featureEcho;
    }
    return j;
}

corpus::Instance request_instance(const ScoreRequest& r) {
    corpus::Instance inst;
    inst.id = "request";
    inst.postText = {r.postText};
    inst.targetTitle = r.targetTitle;
    inst.targetDescription = r.targetDescription;
    inst.targetKeywords = r.targetKeywords;
    inst.targetParagraphs = r.targetParagraphs;
    inst.targetCaptions = r.targetCaptions;
    inst.postMedia.assign(static_cast<std::size_t>(r.postMediaCount.value_or(0)), std::string{});
    return inst;
}

Scorer::Scorer(const TrainedModel& model, const embed::EmbeddingTable& table, const nlp::Lexicons& lexicons)
    : model_(model), table_(table), lexicons_(lexicons), tagset_(model.schema.tags) {
    if (table.dimension() != model.schema.embeddingDim) {
        throw SchemaError("embedding dimension " + std::to_string(table.dimension()) +
                          " does not match the model's " + std::to_string(model.schema.embeddingDim));
    }
}

std::vector<double> Scorer::features(const ScoreRequest& req) const {
    if (blank(req.postText)) {
        throw RequestError(std::vector<FieldError>{{"postText", "must not be empty"}});
    }
    const features::Resources res{table_, lexicons_, tagset_};
    auto x = features::assemble(request_instance(req), res, model_.schema);
    if (req.numImages) {
        x[model_.schema.index_of("num_captions")] = static_cast<double>(*req.numImages);
    }
    if (req.numParagraphs) {
        x[model_.schema.index_of("num_paragraphs")] = static_cast<double>(*req.numParagraphs);
    }
    return x;
}

ScoreResponse Scorer::score(const ScoreRequest& req, bool echoFeatures) const {
    const auto start = std::chrono::steady_clock::now();
    const auto x = features(req);
    ScoreResponse r;
    r.probability = model_.predict(x);
    r.label = r.probability >= 0.5 ? "clickbait" : "no-clickbait";
    r.modelType = std::string(model_type_name(model_.type()));
    if (echoFeatures) {
        std::map<std::string, double> echo;
        for (std::size_t i = 0; i < x.size(); ++i) {
            echo.emplace(model_.schema.names[i], x[i]);
        }
        r.featureEcho = std::move(echo);
    }
    r.latencyMs = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

json Scorer::schema_json() const {
    const auto& p = model_.preprocessor;
    json kept = json::array();
    for (std::size_t i : p.keptIndices) {
        kept.push_back(model_.schema.names[i]);
    }
    return json{{"formatVersion", kFormatVersion},
                {"modelType", model_type_name(model_.type())},
                {"schemaVersion", model_.schema.version()},
                {"embeddingDim", table_.dimension()},
                {"featureSchema", model_.schema.to_json()},
                {"preprocessor", {{"mode", features::mode_name(p.mode)}, {"keptFeatures", kept}}},
                {"training", model_.training},
                {"requestFields",
                 {"postText", "targetTitle", "targetDescription", "targetParagraphs", "targetKeywords",
                  "targetCaptions", "numImages", "numParagraphs", "postMediaCount"}}};
}

ScoreResponse score_one(const ScoreRequest& req, const Scorer& scorer, bool echoFeatures) {
    return scorer.score(req, echoFeatures);
}

// --- resources ------------------------------------------------------------------

std::optional<std::filesystem::path> resolve_path(const std::optional<std::filesystem::path>& flag,
                                                  const char* envVar,
                                                  const std::optional<std::filesystem::path>& fallback) {
    if (flag && !flag->empty()) {
        return flag;
    }
    if (const char* v = std::getenv(envVar); v != nullptr && *v != '\0') {
        return std::filesystem::path(v);
    }
    return fallback;
}

std::filesystem::path default_data_dir() {
#ifdef CLICKBAIT_DEFAULT_DATA_DIR
    return CLICKBAIT_DEFAULT_DATA_DIR;
#else
    return "data";
#endif
}

// --- HTTP -----------------------------------------------------------------------

struct ScoreServer::Impl {
    const Scorer& scorer;
    httplib::Server server;
    std::thread worker;
    int port = -1;

    explicit Impl(const Scorer& s) : scorer(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

} // namespace

ScoreServer::ScoreServer(const Scorer& scorer) : impl_(std::make_unique<Impl>(scorer)) {
    auto& svr = impl_->server;
    const Scorer& sc = scorer;

    svr.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
    });
    svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    svr.Get("/health", [&sc](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200,
                  {{"status", "ok"},
                   {"modelType", model_type_name(sc.model().type())},
                   {"embeddingDim", sc.embeddingDim()}});
    });
    svr.Get("/schema", [&sc](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, sc.schema_json());
    });
    svr.Post("/score", [&sc](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            send_json(res, 400, {{"error", "request body is not valid JSON"}});
            return;
        }
        const std::string echo = req.has_param("echo") ? req.get_param_value("echo") : "";
        try {
            const auto request = parse_score_request(body);
            send_json(res, 200, sc.score(request, echo == "1" || echo == "true").to_json());
        } catch (const RequestError& e) {
            json fields = json::array();
            for (const auto& f : e.errors()) {
                fields.push_back({{"field", f.field}, {"message", f.message}});
            }
            send_json(res, 422, {{"error", "validation failed"}, {"fields", fields}});
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}});
        }
    });
    svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            send_json(res, res.status, {{"error", httplib::status_message(res.status)}});
        }
    });
}

ScoreServer::~ScoreServer() {
    stop();
}

int ScoreServer::bind(const std::string& host, int port) {
    auto& svr = impl_->server;
    if (port == 0) {
        impl_->port = svr.bind_to_any_port(host);
    } else {
        impl_->port = svr.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) {
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    return impl_->port;
}

void ScoreServer::listen() {
    if (!impl_->server.listen_after_bind()) {
        throw IoError("HTTP server stopped with an error");
    }
}

void ScoreServer::start() {
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ScoreServer::stop() {
    impl_->server.stop();
    if (impl_->worker.joinable()) {
        impl_->worker.join();
    }
}

} // namespace clickbait::app
