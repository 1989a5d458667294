#include "clickbait/app.hpp"
#include "clickbait/random.hpp"

#include "support/synthetic.hpp"

#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <future>
#include <iterator>

using namespace clickbait;
using namespace clickbait::app;
using nlohmann::json;

namespace {

// One featurised synthetic corpus and resources shared by every test case.
struct World {
    embed::EmbeddingTable table = testing::synthetic_embeddings();
    const nlp::Lexicons& lex = testing::project_lexicons();
    features::Dataset ds;

    World() {
        const features::Resources res{table, lex, nlp::TagSet::penn36()};
        ds = features::featurize(testing::synthetic_corpus({.rows = 240}), res, features::make_schema(50));
    }

    TrainedModel train(ModelType t) const {
        TrainOptions o;
        o.type = t;
        o.forest.treeCount = 15;
        o.mlp.epochs = 3;
        o.mlp.batchSize = 32;
        return train_model(ds, o);
    }
};

const World& world() {
    static const World w;
    return w;
}

std::vector<std::vector<double>> random_inputs(std::size_t n, std::size_t dim) {
    Rng rng(123);
    std::vector<std::vector<double>> out(n, std::vector<double>(dim));
    for (auto& v : out)
        for (auto& x : v) x = rng.normal() * 2.0;
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

json request_body(const std::string& post, const std::string& title) {
    return json{{"postText", post},
                {"targetTitle", title},
                {"targetDescription", "The minister announces a budget report."},
                {"targetParagraphs", {"Police and court officials said the market shares rose.", "Second paragraph."}},
                {"targetKeywords", "budget, economy"},
                {"targetCaptions", {"A photo of the summit"}}};
}

} // namespace

TEST_CASE("model type names") {
    CHECK(model_type_name(ModelType::Forest) == "rf");
    CHECK(parse_model_type("mlp") == ModelType::Mlp);
    CHECK(parse_model_type("logistic") == ModelType::Logistic);
    CHECK_THROWS_AS(parse_model_type("xgb"), ValidationError);
}

TEST_CASE("split_rows matches the corpus split and is disjoint") {
    const auto s = split_rows(100, 0.67, 1);
    CHECK(s.train.size() == 67);
    CHECK(s.test.size() == 33);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

TEST_CASE("persistence is bitwise for all three model types") {
    const auto dir = testing::scratch_dir("app_persist");
    const auto inputs = random_inputs(100, world().ds.schema.size());
    for (auto t : {ModelType::Logistic, ModelType::Forest, ModelType::Mlp}) {
        CAPTURE(model_type_name(t));
        const auto m = world().train(t);
        CHECK(m.type() == t);
        CHECK(m.preprocessor.mode == preprocess_mode_for(t));
        const auto path = dir / (std::string(model_type_name(t)) + ".json");
        save_model(m, path);
        const auto back = load_model(path);
        for (const auto& x : inputs) {
            const double a = m.predict(x), b = back.predict(x);
            CHECK(std::memcmp(&a, &b, sizeof a) == 0);
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }
        // Re-serialisation reproduces the file byte for byte.
        const auto again = dir / ("again_" + std::string(model_type_name(t)) + ".json");
        save_model(back, again);
        CHECK(read_file(path) == read_file(again));
    }
}

TEST_CASE("forest training is reproducible through the app layer") {
    const auto a = world().train(ModelType::Forest).to_json().dump();
    const auto b = world().train(ModelType::Forest).to_json().dump();
    CHECK(a == b);
}

TEST_CASE("broken model files are rejected") {
    const auto dir = testing::scratch_dir("app_broken");
    const auto m = world().train(ModelType::Logistic);
    save_model(m, dir / "ok.json");
    const auto text = read_file(dir / "ok.json");

    std::ofstream(dir / "truncated.json") << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(load_model(dir / "truncated.json"), SchemaError);

    auto j = json::parse(text);
    j["formatVersion"] = 99;
    std::ofstream(dir / "future.json") << j.dump();
    CHECK_THROWS_AS(load_model(dir / "future.json"), SchemaError);

    auto k = json::parse(text);
    k["parameters"]["weights"].erase(0);
    std::ofstream(dir / "short.json") << k.dump();
    CHECK_THROWS(load_model(dir / "short.json"));

    CHECK_THROWS_AS(load_model(dir / "missing.json"), IoError);
    CHECK_THROWS_AS(m.predict(std::vector<double>(5, 0.0)), ValidationError);
}

TEST_CASE("evaluate_model reports both parts") {
    const auto m = world().train(ModelType::Logistic);
    const auto reports = evaluate_model(m, world().ds);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].first == "train");
    CHECK(reports[0].second.count + reports[1].second.count == world().ds.size());
    CHECK(reports[1].second.auc.value_or(0.0) > 0.7); // synthetic classes are well separated
    CHECK(m.training.at("trainRows") == reports[0].second.count);
}

TEST_CASE("request parsing") {
    const auto r = parse_score_request(json{{"postText", "Hi"}, {"numImages", 2}, {"targetParagraphs", {"a"}}});
    CHECK(r.postText == "Hi");
    CHECK(r.numImages == 2);
    CHECK_FALSE(r.numParagraphs.has_value());

    try {
        parse_score_request(json{{"postText", "   "}, {"numImages", -1}, {"targetCaptions", "nope"}});
        FAIL("invalid request accepted");
    } catch (const RequestError& e) {
        std::vector<std::string> fields;
        for (const auto& f : e.errors()) fields.push_back(f.field);
        CHECK(std::count(fields.begin(), fields.end(), "postText") == 1);
        CHECK(std::count(fields.begin(), fields.end(), "numImages") == 1);
        CHECK(std::count(fields.begin(), fields.end(), "targetCaptions") == 1);
    }
    CHECK_THROWS_AS(parse_score_request(json::array()), RequestError);
    CHECK(parse_score_request(to_json(r)).numImages == 2);
}

TEST_CASE("scorer applies count overrides and is deterministic") {
    const auto m = world().train(ModelType::Logistic);
    const Scorer scorer(m, world().table, world().lex);
    auto req = parse_score_request(request_body("You won't believe this shocking trick", "Budget report"));
    const auto& names = m.schema.names;
    auto at = [&](const std::vector<double>& v, const std::string& n) {
        return v[static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin())];
    };
    CHECK(at(scorer.features(req), "num_captions") == 1.0);
    req.numImages = 4;
    req.numParagraphs = 9;
    const auto f = scorer.features(req);
    CHECK(at(f, "num_captions") == 4.0);
    CHECK(at(f, "num_paragraphs") == 9.0);

    const auto a = score_one(req, scorer);
    const auto b = score_one(req, scorer);
    CHECK(a.probability == b.probability);
    CHECK(a.label == (a.probability >= 0.5 ? "clickbait" : "no-clickbait"));
    CHECK(a.modelType == "lr");

    const auto self = scorer.score(parse_score_request(request_body("Shocking secret trick", "Shocking secret trick")), true);
    REQUIRE(self.featureEcho.has_value());
    CHECK(self.featureEcho->at("cosine_post_title") == doctest::Approx(1.0));
    CHECK(self.featureEcho->at("jaccard_post_title") == 1.0);
    CHECK(self.featureEcho->at("wmd_post_title") < 1e-9);
}

TEST_CASE("resource path resolution") {
    ::setenv("CLICKBAIT_TEST_ENV_PATH", "/from/env", 1);
    CHECK(*resolve_path(std::filesystem::path("/from/flag"), "CLICKBAIT_TEST_ENV_PATH") == "/from/flag");
    CHECK(*resolve_path(std::nullopt, "CLICKBAIT_TEST_ENV_PATH", "/fallback") == "/from/env");
    ::unsetenv("CLICKBAIT_TEST_ENV_PATH");
    CHECK(*resolve_path(std::nullopt, "CLICKBAIT_TEST_ENV_PATH", "/fallback") == "/fallback");
    CHECK_FALSE(resolve_path(std::nullopt, "CLICKBAIT_TEST_ENV_PATH").has_value());
    CHECK(std::filesystem::exists(default_data_dir() / "stopwords.txt"));
}

TEST_CASE("http service") {
    const auto m = world().train(ModelType::Logistic);
    const Scorer scorer(m, world().table, world().lex);
    ScoreServer server(scorer);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    server.start();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);

    SUBCASE("health and schema") {
        const auto h = client.Get("/health");
        REQUIRE(h);
        CHECK(h->status == 200);
        const auto body = json::parse(h->body);
        CHECK(body.at("status") == "ok");
        CHECK(body.at("modelType") == "lr");
        CHECK(body.at("embeddingDim") == 50);
        const auto s = client.Get("/schema");
        REQUIRE(s);
        CHECK(json::parse(s->body).at("featureSchema").at("names").size() == 373);
    }
    SUBCASE("valid, invalid and malformed bodies") {
        const auto ok = client.Post("/score", request_body("Why this epic hack works", "Epic hack").dump(),
                                    "application/json");
        REQUIRE(ok);
        CHECK(ok->status == 200);
        const auto resp = json::parse(ok->body);
        const double p = resp.at("probability");
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(resp.at("label") == (p >= 0.5 ? "clickbait" : "no-clickbait"));
        CHECK(resp.at("latencyMs").get<double>() >= 0.0);
        CHECK(p == scorer.score(parse_score_request(request_body("Why this epic hack works", "Epic hack"))).probability);

        const auto empty = client.Post("/score", json{{"postText", ""}}.dump(), "application/json");
        REQUIRE(empty);
        CHECK(empty->status == 422);
        const auto err = json::parse(empty->body);
        CHECK(err.at("fields").at(0).at("field") == "postText");
        CHECK_FALSE(err.at("fields").at(0).at("message").get<std::string>().empty());

        const auto bad = client.Post("/score", "{not json", "application/json");
        REQUIRE(bad);
        CHECK(bad->status == 400);

        const auto echo = client.Post("/score?echo=1", request_body("Same words", "Same words").dump(),
                                      "application/json");
        REQUIRE(echo);
        CHECK(json::parse(echo->body).at("featureEcho").at("jaccard_post_title") == 1.0);
    }
    SUBCASE("a storm of parallel requests matches serial answers") {
        std::vector<std::string> posts;
        for (int i = 0; i < 100; ++i) {
            posts.push_back(testing::teaser_words()[static_cast<std::size_t>(i) % 36] + " " +
                            testing::news_words()[static_cast<std::size_t>(i * 7) % 36] + " number " + std::to_string(i));
        }
        std::vector<double> serial;
        for (const auto& p : posts) serial.push_back(scorer.score(parse_score_request(request_body(p, "Title"))).probability);
        std::vector<std::future<double>> futures;
        for (const auto& p : posts) {
            futures.push_back(std::async(std::launch::async, [&, p] {
                httplib::Client c("127.0.0.1", port);
                c.set_read_timeout(60, 0);
                const auto r = c.Post("/score", request_body(p, "Title").dump(), "application/json");
                return r && r->status == 200 ? json::parse(r->body).at("probability").get<double>() : -1.0;
            }));
        }
        for (std::size_t i = 0; i < posts.size(); ++i) CHECK(futures[i].get() == serial[i]);
    }
    SUBCASE("p95 latency with 500-word paragraphs") {
        std::vector<double> ms;
        Rng rng(77);
        for (int i = 0; i < 40; ++i) {
            auto body = request_body("You won't believe these " + std::to_string(i) + " secret reasons", "Budget talks");
            std::string para;
            for (int w = 0; w < 500; ++w) {
                const auto& pool = rng.uniform() < 0.5 ? testing::teaser_words() : testing::news_words();
                para += pool[rng.index(pool.size())] + " ";
            }
            body["targetParagraphs"] = {para, para.substr(0, para.size() / 2)};
            const auto t0 = std::chrono::steady_clock::now();
            const auto r = client.Post("/score", body.dump(), "application/json");
            const auto t1 = std::chrono::steady_clock::now();
            REQUIRE(r);
            CHECK(r->status == 200);
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(ms.begin(), ms.end());
        const double p95 = ms[static_cast<std::size_t>(0.95 * static_cast<double>(ms.size() - 1))];
        MESSAGE("p95 latency ms: " << p95);
        CHECK(p95 < 1000.0);
    }
    server.stop();
}
