// Command-line front end: ingest, eda, featurize, train, evaluate, predict, serve.

#include "clickbait/app.hpp"
#include "clickbait/corpus.hpp"
#include "clickbait/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clickbait;

namespace {

using OptPath = std::optional<fs::path>;

fs::path require_path(const OptPath& flag, const char* env, const OptPath& fallback, const std::string& what) {
    auto p = app::resolve_path(flag, env, fallback);
    if (!p) {
        throw ValidationError(what, std::string("not given; pass the flag or set ") + env);
    }
    return *p;
}

nlp::Lexicons load_lexicons(const OptPath& dataDir) {
    const auto dir = require_path(dataDir, app::kEnvDataDir, app::default_data_dir(), "--data-dir");
    return nlp::Lexicons::load(dir);
}

OptPath recorded_embeddings(const app::TrainedModel& m) {
    const auto& r = m.training.value("resources", json::object());
    if (r.contains("embeddings") && r["embeddings"].is_string()) {
        return fs::path(r["embeddings"].get<std::string>());
    }
    return std::nullopt;
}

embed::EmbeddingTable load_table(const fs::path& path, std::size_t dim) {
    const auto t0 = std::chrono::steady_clock::now();
    auto table = embed::load_embeddings(path, dim);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "loaded " << table.size() << " vectors from " << path.string() << " in " << secs << " s\n";
    return table;
}

std::string read_all(std::istream& in) {
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- subcommands -------------------------------------------------------------

struct IngestArgs {
    std::vector<fs::path> instances;
    std::vector<fs::path> truth;
    fs::path out;
    bool lenient = false;
};

int run_ingest(const IngestArgs& a) {
    if (a.instances.size() != a.truth.size()) {
        throw ValidationError("--truth", "give one truth file per instances file");
    }
    const auto mode = a.lenient ? corpus::ParseMode::Lenient : corpus::ParseMode::Strict;
    std::vector<corpus::Instance> instances;
    std::vector<corpus::TruthRecord> truths;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        auto inst = corpus::parse_instances(a.instances[i], mode);
        auto tr = corpus::parse_truth(a.truth[i], mode);
        skipped += inst.skippedLines + tr.skippedLines;
        std::move(inst.records.begin(), inst.records.end(), std::back_inserter(instances));
        std::move(tr.records.begin(), tr.records.end(), std::back_inserter(truths));
    }
    auto merged = corpus::merge_corpus(std::move(instances), std::move(truths));
    corpus::write_corpus_csv(a.out, merged.rows);
    std::size_t positives = 0;
    for (const auto& r : merged.rows) {
        positives += r.label == 1;
    }
    const json summary = {{"merged", merged.rows.size()},
                          {"clickbait", positives},
                          {"noClickbait", merged.rows.size() - positives},
                          {"validTexts", corpus::filter_valid(merged.rows).size()},
                          {"unmatchedInstances", merged.unmatchedInstances},
                          {"unmatchedTruths", merged.unmatchedTruths},
                          {"skippedLines", skipped}};
    std::cout << summary.dump(2) << '\n';
    return 0;
}

struct EdaArgs {
    fs::path corpus;
    std::string group;
    OptPath out;
};

int run_eda(const EdaArgs& a) {
    const auto rows = corpus::read_corpus_csv(a.corpus);
    const auto table = corpus::eda_group_table(rows, corpus::parse_grouper(a.group));
    if (a.out) {
        corpus::write_eda_csv(*a.out, table);
    }
    std::cout << corpus::grouper_name(table.grouper) << ",clickbait,no-clickbait,%-clickbait\n";
    for (const auto& r : table.rows) {
        std::cout << r.groupKey << ',' << r.clickbaitCount << ',' << r.nonClickbaitCount << ','
                  << corpus::format_percent(r.clickbaitPct) << '\n';
    }
    if (table.unknownCount) {
        std::cerr << table.unknownCount << " rows had an unparseable timestamp\n";
    }
    if (table.excludedCount) {
        std::cerr << table.excludedCount << " rows fell outside the 0..10 window\n";
    }
    return 0;
}

struct FeaturizeArgs {
    fs::path corpus;
    OptPath embeddings;
    fs::path out;
    OptPath dataDir;
    std::size_t sample = 0;
    std::uint64_t seed = 1;
    bool validOnly = false;
    bool noPrefilter = false;
    std::size_t threads = 0;
    std::size_t dim = 50;
};

int run_featurize(const FeaturizeArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    auto rows = corpus::read_corpus_csv(a.corpus);
    const std::size_t all = rows.size();
    const auto valid = corpus::filter_valid(rows).size();
    std::cerr << all << " rows, " << valid << " with non-empty post and title\n";
    if (a.validOnly) {
        rows = corpus::filter_valid(rows);
    }
    if (a.sample > 0 && a.sample < rows.size()) {
        auto order = corpus::split_order(rows.size(), a.seed);
        order.resize(a.sample);
        std::sort(order.begin(), order.end());
        std::vector<corpus::LabeledInstance> picked;
        picked.reserve(order.size());
        for (std::size_t i : order) {
            picked.push_back(std::move(rows[i]));
        }
        rows = std::move(picked);
        std::cerr << "sampled " << rows.size() << " rows (seed " << a.seed << ")\n";
    }

    const auto embPath = require_path(a.embeddings, app::kEnvEmbeddings, std::nullopt, "--embeddings");
    const auto table = load_table(embPath, a.dim);
    const auto lexicons = load_lexicons(a.dataDir);
    const auto& tagset = nlp::TagSet::penn36();
    const features::Resources res{table, lexicons, tagset, !a.noPrefilter};

    std::size_t step = std::max<std::size_t>(1, rows.size() / 20);
    auto progress = [&](std::size_t done, std::size_t total) {
        if (done % step == 0 || done == total) {
            std::cerr << "featurized " << done << '/' << total << '\n';
        }
    };
    const auto ds = features::featurize(rows, res, features::make_schema(a.dim, tagset), progress, a.threads);
    features::write_dataset_csv(a.out, ds);

    // Remember where the vectors came from so later commands can find them.
    const auto sidecar = features::schema_path_for(a.out);
    json schema = ds.schema.to_json();
    schema["resources"] = {{"embeddings", fs::absolute(embPath).string()}};
    std::ofstream(sidecar) << schema.dump(2) << '\n';

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << json{{"rows", ds.size()},
                      {"features", ds.schema.size()},
                      {"schemaVersion", ds.schema.version()},
                      {"out", a.out.string()},
                      {"schema", sidecar.string()},
                      {"seconds", secs}}
                     .dump(2)
              << '\n';
    return 0;
}

struct TrainArgs {
    fs::path features;
    std::string model = "lr";
    fs::path out;
    std::uint64_t seed = 1;
    double trainFraction = 0.67;
    std::size_t epochs = 50;
    std::size_t batchSize = 64;
    double learningRate = 0.001;
    std::size_t threads = 0;
};

int run_train(const TrainArgs& a) {
    const auto schemaPath = features::schema_path_for(a.features);
    const auto ds = features::read_dataset(a.features, schemaPath);
    app::TrainOptions opts;
    opts.type = app::parse_model_type(a.model);
    opts.seed = a.seed;
    opts.trainFraction = a.trainFraction;
    opts.forest.threads = a.threads;
    opts.mlp.epochs = a.epochs;
    opts.mlp.batchSize = a.batchSize;
    opts.mlp.adam.learningRate = a.learningRate;

    const auto t0 = std::chrono::steady_clock::now();
    auto model = app::train_model(ds, opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ifstream in(schemaPath);
    const json sidecar = json::parse(in, nullptr, false);
    if (sidecar.is_object() && sidecar.contains("resources")) {
        model.training["resources"] = sidecar["resources"];
    }
    model.training["features"] = fs::absolute(a.features).string();
    model.training["seconds"] = secs;
    app::save_model(model, a.out);
    std::cout << json{{"modelType", app::model_type_name(opts.type)},
                      {"trainRows", model.training["trainRows"]},
                      {"testRows", model.training["testRows"]},
                      {"inputFeatures", model.preprocessor.outputDim()},
                      {"seconds", secs},
                      {"out", a.out.string()}}
                     .dump(2)
              << '\n';
    return 0;
}

struct EvaluateArgs {
    fs::path model;
    fs::path features;
    fs::path out;
};

int run_evaluate(const EvaluateArgs& a) {
    const auto model = app::load_model(a.model);
    const auto ds = features::read_dataset(a.features, features::schema_path_for(a.features));
    if (ds.schema.version() != model.schema.version()) {
        throw SchemaError("feature file schema " + ds.schema.version() + " does not match the model's " +
                          model.schema.version());
    }
    const auto reports = app::evaluate_model(model, ds);

    json out = {{"modelType", app::model_type_name(model.type())}, {"reports", json::object()}};
    for (const auto& [name, r] : reports) {
        out["reports"][name] = r.to_json();
    }
    if (const auto* forest = std::get_if<models::ForestModel>(&model.model)) {
        const auto imp = models::forest_importances(*forest);
        std::vector<std::size_t> order(imp.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return imp[x] > imp[y]; });
        json list = json::array();
        for (std::size_t i : order) {
            list.push_back({{"feature", model.schema.names[model.preprocessor.keptIndices[i]]},
                            {"importance", imp[i]}});
        }
        out["importances"] = list;
    }
    std::ofstream(a.out) << out.dump(2) << '\n';

    fs::path stem = a.out;
    stem.replace_extension();
    eval::write_reports_csv(stem.string() + ".csv", reports);
    for (const auto& [name, r] : reports) {
        if (!r.rocPoints.empty()) {
            eval::write_roc_csv(stem.string() + ".roc_" + name + ".csv", r.rocPoints);
        }
    }
    for (const auto& [name, r] : reports) {
        std::cout << name << ": accuracy " << r.accuracy << ", auc " << (r.auc ? *r.auc : 0.0)
                  << ", f1 (weighted) " << r.f1Weighted << '\n';
    }
    return 0;
}

struct PredictArgs {
    OptPath model;
    OptPath embeddings;
    OptPath dataDir;
    OptPath json;
    bool stdinInput = false;
    bool echo = false;
};

int run_predict(const PredictArgs& a) {
    std::string body;
    if (a.json) {
        std::ifstream in(*a.json);
        if (!in) {
            throw IoError("cannot read " + a.json->string());
        }
        body = read_all(in);
    } else {
        body = read_all(std::cin);
    }
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) {
        throw ValidationError("request", "not valid JSON");
    }
    const auto request = app::parse_score_request(j);

    const auto model = app::load_model(require_path(a.model, app::kEnvModel, std::nullopt, "--model"));
    const auto table = load_table(require_path(a.embeddings, app::kEnvEmbeddings, recorded_embeddings(model),
                                               "--embeddings"),
                                  model.schema.embeddingDim);
    const auto lexicons = load_lexicons(a.dataDir);
    const app::Scorer scorer(model, table, lexicons);
    std::cout << app::score_one(request, scorer, a.echo).to_json().dump(2) << '\n';
    return 0;
}

struct ServeArgs {
    OptPath model;
    OptPath embeddings;
    OptPath dataDir;
    std::string host = "127.0.0.1";
    int port = 8080;
};

app::ScoreServer* g_server = nullptr;

void on_signal(int) {
    if (g_server != nullptr) {
        g_server->stop();
    }
}

int run_serve(const ServeArgs& a) {
    const auto model = app::load_model(require_path(a.model, app::kEnvModel, std::nullopt, "--model"));
    const auto table = load_table(require_path(a.embeddings, app::kEnvEmbeddings, recorded_embeddings(model),
                                               "--embeddings"),
                                  model.schema.embeddingDim);
    const auto lexicons = load_lexicons(a.dataDir);
    const app::Scorer scorer(model, table, lexicons);
    app::ScoreServer server(scorer);
    const int port = server.bind(a.host, a.port);
    std::cerr << "serving " << app::model_type_name(model.type()) << " model on http://" << a.host << ':' << port
              << '\n';
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Clickbait scoring: corpus preparation, features, models and a scoring service"};
    cli.require_subcommand(1);

    IngestArgs ingest;
    auto* ci = cli.add_subcommand("ingest", "Join instances and truth JSONL into one corpus CSV");
    ci->add_option("--instances", ingest.instances, "instances.jsonl (repeatable)")->required();
    ci->add_option("--truth", ingest.truth, "truth.jsonl (repeatable, paired with --instances)")->required();
    ci->add_option("--out", ingest.out, "Output corpus CSV")->required();
    ci->add_flag("--lenient", ingest.lenient, "Skip malformed lines instead of failing");

    EdaArgs eda;
    auto* ce = cli.add_subcommand("eda", "Clickbait share per group");
    ce->add_option("--corpus", eda.corpus, "Corpus CSV from ingest")->required();
    ce->add_option("--group", eda.group, "images, weekday, keywords or captions")->required();
    ce->add_option("--out", eda.out, "Also write the table as CSV");

    FeaturizeArgs fz;
    auto* cf = cli.add_subcommand("featurize", "Compute the feature matrix for a corpus");
    cf->add_option("--corpus", fz.corpus, "Corpus CSV from ingest")->required();
    cf->add_option("--embeddings", fz.embeddings, "Word vectors (text format); env CLICKBAIT_EMBEDDINGS");
    cf->add_option("--out", fz.out, "Output feature CSV; the schema goes next to it")->required();
    cf->add_option("--data-dir", fz.dataDir, "Lexicon directory; env CLICKBAIT_DATA_DIR");
    cf->add_option("--sample", fz.sample, "Featurize a seeded random sample of N rows");
    cf->add_option("--seed", fz.seed, "Sampling seed");
    cf->add_option("--dim", fz.dim, "Embedding dimension");
    cf->add_option("--threads", fz.threads, "Worker threads (0 = all cores)");
    cf->add_flag("--valid-only", fz.validOnly, "Drop rows with empty post text or title");
    cf->add_flag("--no-prefilter", fz.noPrefilter, "Always run the exact WMD solver");

    TrainArgs tr;
    auto* ct = cli.add_subcommand("train", "Train a model on the seeded training split");
    ct->add_option("--features", tr.features, "Feature CSV from featurize")->required();
    ct->add_option("--model", tr.model, "lr, rf or mlp")->required();
    ct->add_option("--out", tr.out, "Output model file")->required();
    ct->add_option("--seed", tr.seed, "Split and model seed");
    ct->add_option("--train-fraction", tr.trainFraction, "Share of rows used for training");
    ct->add_option("--epochs", tr.epochs, "MLP epochs");
    ct->add_option("--batch-size", tr.batchSize, "MLP batch size");
    ct->add_option("--learning-rate", tr.learningRate, "MLP Adam learning rate");
    ct->add_option("--threads", tr.threads, "Forest worker threads (0 = all cores)");

    EvaluateArgs ev;
    auto* cv = cli.add_subcommand("evaluate", "Metrics on the model's train and test split");
    cv->add_option("--model", ev.model, "Model file")->required();
    cv->add_option("--features", ev.features, "Feature CSV the model was trained from")->required();
    cv->add_option("--out", ev.out, "Report JSON; .csv and ROC files are written alongside")->required();

    PredictArgs pr;
    auto* cp = cli.add_subcommand("predict", "Score one request");
    cp->add_option("--model", pr.model, "Model file; env CLICKBAIT_MODEL");
    cp->add_option("--embeddings", pr.embeddings, "Word vectors; env CLICKBAIT_EMBEDDINGS");
    cp->add_option("--data-dir", pr.dataDir, "Lexicon directory; env CLICKBAIT_DATA_DIR");
    auto* json_opt = cp->add_option("--json", pr.json, "Request JSON file");
    cp->add_flag("--stdin", pr.stdinInput, "Read the request from standard input")->excludes(json_opt);
    cp->add_flag("--echo", pr.echo, "Include the feature values in the response");

    ServeArgs sv;
    auto* cs = cli.add_subcommand("serve", "Run the HTTP scoring service");
    cs->add_option("--model", sv.model, "Model file; env CLICKBAIT_MODEL");
    cs->add_option("--embeddings", sv.embeddings, "Word vectors; env CLICKBAIT_EMBEDDINGS");
    cs->add_option("--data-dir", sv.dataDir, "Lexicon directory; env CLICKBAIT_DATA_DIR");
    cs->add_option("--host", sv.host, "Listen address");
    cs->add_option("--port", sv.port, "Listen port (0 picks a free one)");

    CLI11_PARSE(cli, argc, argv);

    try {
        if (*ci) return run_ingest(ingest);
        if (*ce) return run_eda(eda);
        if (*cf) return run_featurize(fz);
        if (*ct) return run_train(tr);
        if (*cv) return run_evaluate(ev);
        if (*cp) return run_predict(pr);
        if (*cs) return run_serve(sv);
    } catch (const app::RequestError& e) {
        for (const auto& f : e.errors()) {
            std::cerr << "invalid request: " << f.field << ": " << f.message << '\n';
        }
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
