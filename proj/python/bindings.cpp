#include "clickbait/app.hpp"
#include "clickbait/corpus.hpp"
#include "clickbait/embed.hpp"
#include "clickbait/eval.hpp"
#include "clickbait/features.hpp"
#include "clickbait/models/common.hpp"
#include "clickbait/models/mlp.hpp"
#include "clickbait/nlp.hpp"
#include "clickbait/transport.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <memory>
#include <optional>

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace clickbait;
using nlohmann::json;

namespace {

py::object to_python(const json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

json from_python(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

// Lexicons bundled with an installed package; set once at import.
std::optional<fs::path> g_packageDataDir;

nlp::Lexicons lexicons_from(const std::optional<fs::path>& dataDir) {
    return nlp::Lexicons::load(
        *app::resolve_path(dataDir, app::kEnvDataDir, g_packageDataDir.value_or(app::default_data_dir())));
}

std::vector<eval::Scored> scored(const std::vector<double>& probabilities, const std::vector<int>& labels) {
    if (probabilities.size() != labels.size()) throw ValidationError("labels", "length differs from probabilities");
    std::vector<eval::Scored> s(labels.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = {probabilities[i], labels[i], std::nullopt};
    return s;
}

nlp::TokenSeq tokens_of(const std::string& text) {
    return nlp::tokenize(nlp::normalize_text(text));
}

// Resident scoring resources. The Scorer holds references, so everything it
// points at lives here and never moves.
class ScoringSession {
public:
    ScoringSession(const fs::path& model, const fs::path& embeddings, const std::optional<fs::path>& dataDir)
        : model_(app::load_model(model)),
          table_(embed::load_embeddings(embeddings, model_.schema.embeddingDim)),
          lexicons_(lexicons_from(dataDir)),
          scorer_(model_, table_, lexicons_) {}

    py::object score(const py::dict& request, bool echo) const {
        const auto req = app::parse_score_request(from_python(request));
        app::ScoreResponse r;
        {
            py::gil_scoped_release unlocked;
            r = app::score_one(req, scorer_, echo);
        }
        return to_python(r.to_json());
    }

    std::vector<double> features(const py::dict& request) const {
        return scorer_.features(app::parse_score_request(from_python(request)));
    }

    py::object schema() const { return to_python(scorer_.schema_json()); }

    int serve(const std::string& host, int port) {
        if (server_) throw Error("already serving");
        server_ = std::make_unique<app::ScoreServer>(scorer_);
        const int bound = server_->bind(host, port);
        server_->start();
        return bound;
    }

    void stop() {
        if (server_) {
            py::gil_scoped_release unlocked;
            server_->stop();
            server_.reset();
        }
    }

    ~ScoringSession() {
        if (server_) server_->stop();
    }

private:
    app::TrainedModel model_;
    embed::EmbeddingTable table_;
    nlp::Lexicons lexicons_;
    app::Scorer scorer_;
    std::unique_ptr<app::ScoreServer> server_;
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Clickbait scoring engine";

    auto base = py::register_exception<Error>(m, "ClickbaitError");
    py::register_exception<ValidationError>(m, "ValidationError", base);
    py::register_exception<SchemaError>(m, "SchemaError", base);
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<IoError>(m, "IoError", base);

    m.def(
        "_set_package_data_dir", [](const fs::path& dir) { g_packageDataDir = dir; }, py::arg("dir"));

    m.attr("FEATURE_COUNT") = features::make_schema(50).size();

    // --- pipeline stages, mirroring the command-line tool --------------------

    m.def(
        "ingest",
        [](const std::vector<fs::path>& instances, const std::vector<fs::path>& truth, const fs::path& out,
           bool lenient) {
            if (instances.size() != truth.size()) throw ValidationError("truth", "one truth file per instances file");
            const auto mode = lenient ? corpus::ParseMode::Lenient : corpus::ParseMode::Strict;
            std::vector<corpus::Instance> is;
            std::vector<corpus::TruthRecord> ts;
            std::size_t skipped = 0;
            for (std::size_t k = 0; k < instances.size(); ++k) {
                auto a = corpus::parse_instances(instances[k], mode);
                auto b = corpus::parse_truth(truth[k], mode);
                skipped += a.skippedLines + b.skippedLines;
                std::move(a.records.begin(), a.records.end(), std::back_inserter(is));
                std::move(b.records.begin(), b.records.end(), std::back_inserter(ts));
            }
            const auto merged = corpus::merge_corpus(std::move(is), std::move(ts));
            corpus::write_corpus_csv(out, merged.rows);
            std::size_t positives = 0;
            for (const auto& r : merged.rows) positives += r.label == 1;
            py::dict d;
            d["merged"] = merged.rows.size();
            d["clickbait"] = positives;
            d["no_clickbait"] = merged.rows.size() - positives;
            d["unmatched_instances"] = merged.unmatchedInstances;
            d["unmatched_truths"] = merged.unmatchedTruths;
            d["skipped_lines"] = skipped;
            return d;
        },
        py::arg("instances"), py::arg("truth"), py::arg("out"), py::arg("lenient") = false,
        "Join instances and truth JSONL files into a corpus CSV.");

    m.def(
        "eda",
        [](const fs::path& corpusCsv, const std::string& group) {
            const auto table = corpus::eda_group_table(corpus::read_corpus_csv(corpusCsv), corpus::parse_grouper(group));
            py::list rows;
            for (const auto& r : table.rows) {
                py::dict d;
                d["group"] = r.groupKey;
                d["clickbait"] = r.clickbaitCount;
                d["no_clickbait"] = r.nonClickbaitCount;
                d["pct_clickbait"] = r.clickbaitPct;
                rows.append(d);
            }
            return rows;
        },
        py::arg("corpus"), py::arg("group"), "Clickbait share per images, weekday, keywords or captions group.");

    m.def(
        "featurize",
        [](const fs::path& corpusCsv, const fs::path& embeddings, const fs::path& out, std::size_t dim,
           std::size_t threads, const std::optional<fs::path>& dataDir) {
            const auto rows = corpus::read_corpus_csv(corpusCsv);
            const auto table = embed::load_embeddings(embeddings, dim);
            const auto lexicons = lexicons_from(dataDir);
            const auto& tagset = nlp::TagSet::penn36();
            features::Dataset ds;
            {
                py::gil_scoped_release unlocked;
                ds = features::featurize(rows, {table, lexicons, tagset}, features::make_schema(dim, tagset), {},
                                         threads);
            }
            features::write_dataset_csv(out, ds);
            auto schema = ds.schema.to_json();
            schema["resources"] = {{"embeddings", fs::absolute(embeddings).string()}};
            std::ofstream(features::schema_path_for(out)) << schema.dump(2) << '\n';
            py::dict d;
            d["rows"] = ds.size();
            d["features"] = ds.schema.size();
            d["schema_version"] = ds.schema.version();
            return d;
        },
        py::arg("corpus"), py::arg("embeddings"), py::arg("out"), py::arg("dim") = 50, py::arg("threads") = 0,
        py::arg("data_dir") = py::none(), "Compute the feature CSV (and its schema sidecar) for a corpus CSV.");

    py::class_<app::TrainedModel>(m, "Model")
        .def_property_readonly("model_type",
                               [](const app::TrainedModel& t) { return std::string(app::model_type_name(t.type())); })
        .def_property_readonly("feature_names", [](const app::TrainedModel& t) { return t.schema.names; })
        .def_property_readonly("training", [](const app::TrainedModel& t) { return to_python(t.training); })
        .def(
            "predict",
            [](const app::TrainedModel& t, const std::vector<double>& x) {
                if (x.size() != t.schema.size())
                    throw ValidationError("features", "expected " + std::to_string(t.schema.size()) + " values");
                return t.predict(x);
            },
            py::arg("features"), "Probability of clickbait for one raw feature vector.")
        .def("save", [](const app::TrainedModel& t, const fs::path& p) { app::save_model(t, p); }, py::arg("path"));

    m.def("load_model", &app::load_model, py::arg("path"));

    m.def(
        "train",
        [](const fs::path& featuresCsv, const std::string& model, std::uint64_t seed, double trainFraction,
           std::size_t epochs, std::size_t batchSize, double learningRate, std::size_t trees) {
            const auto ds = features::read_dataset(featuresCsv, features::schema_path_for(featuresCsv));
            app::TrainOptions o;
            o.type = app::parse_model_type(model);
            o.seed = seed;
            o.trainFraction = trainFraction;
            o.mlp.epochs = epochs;
            o.mlp.batchSize = batchSize;
            o.mlp.adam.learningRate = learningRate;
            o.forest.treeCount = trees;
            py::gil_scoped_release unlocked;
            auto trained = app::train_model(ds, o);
            trained.training["features"] = fs::absolute(featuresCsv).string();
            return trained;
        },
        py::arg("features"), py::arg("model") = "lr", py::arg("seed") = 1, py::arg("train_fraction") = 0.67,
        py::arg("epochs") = 50, py::arg("batch_size") = 64, py::arg("learning_rate") = 1e-3, py::arg("trees") = 200,
        "Train lr, rf or mlp on the seeded training split of a feature CSV.");

    m.def(
        "evaluate",
        [](const app::TrainedModel& model, const fs::path& featuresCsv) {
            const auto ds = features::read_dataset(featuresCsv, features::schema_path_for(featuresCsv));
            py::dict out;
            for (const auto& [name, report] : app::evaluate_model(model, ds)) out[name.c_str()] = to_python(report.to_json());
            return out;
        },
        py::arg("model"), py::arg("features"), "Train and test reports for the split recorded in the model.");

    py::class_<ScoringSession>(m, "Scorer")
        .def(py::init<const fs::path&, const fs::path&, const std::optional<fs::path>&>(), py::arg("model"),
             py::arg("embeddings"), py::arg("data_dir") = py::none())
        .def("score", &ScoringSession::score, py::arg("request"), py::arg("echo") = false,
             "Score a request dict with the /score body fields.")
        .def("features", &ScoringSession::features, py::arg("request"))
        .def("schema", &ScoringSession::schema)
        .def("serve", &ScoringSession::serve, py::arg("host") = "127.0.0.1", py::arg("port") = 0,
             "Start the HTTP service in the background; returns the bound port.")
        .def("stop", &ScoringSession::stop);

    // --- primitives ----------------------------------------------------------

    m.def("tokenize", [](const std::string& text) { return tokens_of(text).tokens; }, py::arg("text"));

    py::class_<embed::EmbeddingTable>(m, "Embeddings")
        .def_static("load", &embed::load_embeddings, py::arg("path"), py::arg("dim") = 50)
        .def_property_readonly("dimension", &embed::EmbeddingTable::dimension)
        .def("__len__", &embed::EmbeddingTable::size)
        .def("__contains__", &embed::EmbeddingTable::contains)
        .def(
            "wmd",
            [](const embed::EmbeddingTable& t, const std::string& a, const std::string& b) {
                return embed::wmd(embed::nbow(tokens_of(a), t), embed::nbow(tokens_of(b), t), t);
            },
            py::arg("a"), py::arg("b"), "Word Mover's Distance between two texts; None if either has no known words.")
        .def(
            "sentence_vector",
            [](const embed::EmbeddingTable& t, const std::string& text) {
                return embed::sentence_vector(tokens_of(text), t);
            },
            py::arg("text"));

    m.def(
        "transport_cost",
        [](const std::vector<double>& supply, const std::vector<double>& demand,
           const std::vector<std::vector<double>>& cost) {
            transport::CostMatrix c(supply.size(), demand.size());
            if (cost.size() != supply.size()) throw ValidationError("cost", "one row per supply entry");
            for (std::size_t i = 0; i < cost.size(); ++i) {
                if (cost[i].size() != demand.size()) throw ValidationError("cost", "one column per demand entry");
                for (std::size_t j = 0; j < demand.size(); ++j) c(i, j) = cost[i][j];
            }
            return transport::solve(supply, demand, c).cost;
        },
        py::arg("supply"), py::arg("demand"), py::arg("cost"), "Optimal cost of a balanced transportation problem.");

    m.def(
        "balanced_class_weights",
        [](const std::vector<int>& labels) {
            const auto w = models::balanced_class_weights(labels);
            return std::make_pair(w.negative, w.positive);
        },
        py::arg("labels"));

    m.def(
        "mlp_parameter_counts",
        [](std::size_t inputDim) {
            const auto net = models::build_mlp(inputDim);
            py::dict d;
            d["total"] = net.totalCount();
            d["trainable"] = net.trainableCount();
            d["non_trainable"] = net.nonTrainableCount();
            py::list layers;
            for (const auto& l : net.layers()) layers.append(l.parameters);
            d["layers"] = layers;
            return d;
        },
        py::arg("input_dim"));

    m.def(
        "auc",
        [](const std::vector<double>& p, const std::vector<int>& y) { return eval::auc(scored(p, y)); },
        py::arg("probabilities"), py::arg("labels"));

    m.def(
        "evaluate_scores",
        [](const std::vector<double>& p, const std::vector<int>& y, double threshold) {
            return to_python(eval::evaluate(scored(p, y), threshold).to_json());
        },
        py::arg("probabilities"), py::arg("labels"), py::arg("threshold") = 0.5);
}
