#include "clickbait/corpus.hpp"
#include "clickbait/error.hpp"

#include "support/synthetic.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace clickbait;
using namespace clickbait::corpus;

namespace {

const char* kFullLine =
    R"({"id":"1","postText":["hello"],"postTimestamp":"Tue Jun 09 16:31:10 +0000 2015","postMedia":["media/a.png"],)"
    R"("targetTitle":"T","targetDescription":"D","targetKeywords":"a, b","targetParagraphs":["p1","p2"],)"
    R"("targetCaptions":["c"]})";

Instance inst(const std::string& id) {
    Instance i;
    i.id = id;
    i.postText = {"post " + id};
    i.targetTitle = "title";
    return i;
}

TruthRecord truth(const std::string& id, const std::string& cls) {
    TruthRecord t;
    t.id = id;
    t.truthJudgments = {0.0};
    t.truthClass = cls;
    return t;
}

} // namespace

TEST_CASE("instance line maps fields directly") {
    const auto i = parse_instance_json(kFullLine);
    CHECK(i.id == "1");
    CHECK(i.postText == std::vector<std::string>{"hello"});
    CHECK(i.postMedia == std::vector<std::string>{"media/a.png"});
    CHECK(i.targetKeywords == "a, b");
    CHECK(i.targetParagraphs.size() == 2);
    CHECK(i.post() == "hello");
}

TEST_CASE("absent list fields become empty") {
    const auto i = parse_instance_json(R"({"id":"2","postText":["x"],"targetTitle":"t"})");
    CHECK(i.postMedia.empty());
    CHECK(i.targetCaptions.empty());
    CHECK(i.targetDescription.empty());
}

TEST_CASE("multi-part post text joins with single spaces") {
    const auto i = parse_instance_json(R"({"id":"3","postText":["a","b c"]})");
    CHECK(i.post() == "a b c");
}

TEST_CASE("truth line parses") {
    const auto t = parse_truth_json(
        R"({"id":"1","truthJudgments":[0,0,0,0,0],"truthMean":0.0,"truthMedian":0.0,"truthMode":0.0,"truthClass":"no-clickbait"})");
    CHECK(t.truthMean == 0.0);
    CHECK(encode_label(t.truthClass) == 0);
    CHECK(encode_label("clickbait") == 1);
    CHECK_THROWS_AS(encode_label("maybe"), ValidationError);
}

TEST_CASE("truth statistics") {
    SUBCASE("constant list") {
        const auto s = recompute_truth_stats({0, 0, 0, 0, 0});
        CHECK(s.mean == 0.0);
        CHECK(s.median == 0.0);
        CHECK(s.mode == 0.0);
    }
    SUBCASE("mixed judgments") {
        const auto s = recompute_truth_stats({0.0, 0.33, 0.66, 1.0, 1.0});
        CHECK(s.mean == doctest::Approx(0.598).epsilon(1e-12));
        CHECK(s.median == doctest::Approx(0.66));
        CHECK(s.mode == 1.0);
    }
    SUBCASE("even length median and mode tie") {
        const auto s = recompute_truth_stats({0.0, 1.0});
        CHECK(s.median == 0.5);
        CHECK(s.mode == 0.0);
    }
    CHECK_THROWS_AS(recompute_truth_stats({}), ValidationError);
}

TEST_CASE("strict and lenient parsing of files") {
    const auto dir = testing::scratch_dir("corpus_parse");
    const auto path = dir / "instances.jsonl";
    {
        std::ofstream out(path);
        out << kFullLine << "\n\n{not json}\n" << R"({"id":"9","postText":["y"]})" << "\n";
    }
    try {
        parse_instances(path);
        FAIL("strict mode accepted a malformed line");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    const auto lenient = parse_instances(path, ParseMode::Lenient);
    CHECK(lenient.records.size() == 2);
    CHECK(lenient.skippedLines == 1);
    CHECK_THROWS_AS(parse_instances(dir / "missing.jsonl"), IoError);
}

TEST_CASE("merge joins on id in instance order") {
    SUBCASE("full join") {
        auto m = merge_corpus({inst("a"), inst("b"), inst("c")},
                              {truth("c", "clickbait"), truth("a", "no-clickbait"), truth("b", "no-clickbait")});
        REQUIRE(m.rows.size() == 3);
        CHECK(m.rows[0].instance.id == "a");
        CHECK(m.rows[2].label == 1);
        CHECK(m.unmatchedInstances == 0);
    }
    SUBCASE("partial join reports the unmatched row") {
        auto m = merge_corpus({inst("a"), inst("b")}, {truth("b", "clickbait")});
        CHECK(m.rows.size() == 1);
        CHECK(m.unmatchedInstances == 1);
        CHECK(m.unmatchedTruths == 0);
    }
    SUBCASE("duplicate ids are rejected") {
        CHECK_THROWS_AS(merge_corpus({inst("a"), inst("a")}, {truth("a", "clickbait")}), ValidationError);
        CHECK_THROWS_AS(merge_corpus({inst("a")}, {truth("a", "clickbait"), truth("a", "clickbait")}),
                        ValidationError);
    }
}

TEST_CASE("train/test split") {
    CHECK(train_size(21997, 0.67) == 14737);
    CHECK(21997 - train_size(21997, 0.67) == 7260);
    CHECK_THROWS_AS(train_size(10, 0.0), ValidationError);
    CHECK_THROWS_AS(train_size(10, 1.0), ValidationError);

    std::vector<LabeledInstance> four(4);
    for (int i = 0; i < 4; ++i) {
        four[i].instance.id = std::to_string(i);
    }
    const auto half = split_train_test(four, 0.5, 1);
    CHECK(half.train.size() == 2);
    CHECK(half.test.size() == 2);

    const auto rows = testing::synthetic_corpus({.rows = 101});
    const auto a = split_train_test(rows, 0.67, 1);
    const auto b = split_train_test(rows, 0.67, 1);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].instance.id == b.train[i].instance.id);
        ids.insert(a.train[i].instance.id);
    }
    for (const auto& r : a.test) {
        CHECK(ids.insert(r.instance.id).second); // disjoint
    }
    CHECK(ids.size() == rows.size()); // covering
    CHECK_THROWS_AS(split_train_test({}, 0.5, 1), ValidationError);
}

TEST_CASE("weekday from twitter timestamps") {
    CHECK(weekday_of("Tue Jun 09 16:31:10 +0000 2015") == "Tuesday");
    CHECK(weekday_of("Mon Jun 01 00:00:00 +0000 2015") == "Monday");
    CHECK(weekday_of("Sun Feb 29 23:59:59 -0500 2004") == "Sunday");
    CHECK_FALSE(weekday_of("yesterday").has_value());
    CHECK_FALSE(weekday_of("Tue Jun 31 16:31:10 +0000 2015").has_value());
}

TEST_CASE("keyword counting") {
    CHECK(keyword_count("") == 0);
    CHECK(keyword_count("a, b,c") == 3);
    CHECK(keyword_count(" , a,, ") == 1);
}

TEST_CASE("group tables partition the rows and keep the percentage identity") {
    const auto rows = testing::synthetic_corpus({.rows = 300});
    for (auto g : {Grouper::ImageCount, Grouper::Weekday, Grouper::KeywordCount, Grouper::CaptionCount}) {
        const auto t = eda_group_table(rows, g);
        std::size_t total = 0;
        for (const auto& r : t.rows) {
            const auto n = r.clickbaitCount + r.nonClickbaitCount;
            CHECK(n > 0);
            CHECK(r.clickbaitPct == doctest::Approx(100.0 * r.clickbaitCount / n).epsilon(1e-12));
            total += n;
        }
        CHECK(total + t.excludedCount == rows.size());
    }
    const auto weekdays = eda_group_table(rows, Grouper::Weekday);
    CHECK(weekdays.rows.front().groupKey == "Monday");
    CHECK(weekdays.unknownCount == 0);
    CHECK(parse_grouper("images") == Grouper::ImageCount);
    CHECK_THROWS_AS(parse_grouper("colour"), ValidationError);
}

TEST_CASE("unparseable timestamps go to the unknown group") {
    std::vector<LabeledInstance> rows(3);
    rows[0].instance.postTimestamp = "Tue Jun 09 16:31:10 +0000 2015";
    rows[1].instance.postTimestamp = "garbage";
    rows[2].instance.postTimestamp = "";
    rows[1].label = 1;
    const auto t = eda_group_table(rows, Grouper::Weekday);
    CHECK(t.unknownCount == 2);
    CHECK(t.rows.back().groupKey == "unknown");
    CHECK(t.rows.back().clickbaitCount == 1);
}

TEST_CASE("keyword and caption groups are truncated to 0..10") {
    std::vector<LabeledInstance> rows(2);
    for (int i = 0; i < 12; ++i) {
        rows[0].instance.targetKeywords += "k" + std::to_string(i) + ",";
    }
    rows[1].instance.targetKeywords = "a,b";
    const auto t = eda_group_table(rows, Grouper::KeywordCount);
    CHECK(t.excludedCount == 1);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].groupKey == "2");
}

TEST_CASE("percentages format with two decimals") {
    CHECK(format_percent(28.0827) == "28.08%");
    CHECK(format_percent(100.0) == "100.00%");
}

TEST_CASE("corpus CSV round trip") {
    const auto dir = testing::scratch_dir("corpus_csv");
    auto rows = testing::synthetic_corpus({.rows = 25});
    rows[3].instance.targetParagraphs.push_back("has \"quotes\", commas\nand a newline");
    write_corpus_csv(dir / "c.csv", rows);
    const auto back = read_corpus_csv(dir / "c.csv");
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].instance.id == rows[i].instance.id);
        CHECK(back[i].instance.targetParagraphs == rows[i].instance.targetParagraphs);
        CHECK(back[i].instance.postMedia == rows[i].instance.postMedia);
        CHECK(back[i].truth.truthJudgments == rows[i].truth.truthJudgments);
        CHECK(back[i].truth.truthMean == rows[i].truth.truthMean);
        CHECK(back[i].label == rows[i].label);
    }
}

TEST_CASE("validity filter") {
    std::vector<LabeledInstance> rows(3);
    rows[0].instance.postText = {"x"};
    rows[0].instance.targetTitle = "t";
    rows[1].instance.postText = {""};
    rows[1].instance.targetTitle = "t";
    rows[2].instance.postText = {"x"};
    CHECK(filter_valid(rows).size() == 1);
}
