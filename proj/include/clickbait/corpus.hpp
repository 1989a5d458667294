#pragma once

// Clickbait Challenge corpus: JSONL parsing, id join, seeded split and the
// exploratory group tables.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clickbait::corpus {

struct Instance {
    std::string id;
    std::vector<std::string> postText;
    std::string postTimestamp;
    std::vector<std::string> postMedia;
    std::string targetTitle;
    std::string targetDescription;
    std::string targetKeywords;
    std::vector<std::string> targetParagraphs;
    std::vector<std::string> targetCaptions;

    /// postText elements joined with single spaces.
    std::string post() const;
};

struct TruthRecord {
    std::string id;
    std::vector<double> truthJudgments;
    double truthMean = 0.0;
    double truthMedian = 0.0;
    double truthMode = 0.0;
    std::string truthClass;
};

struct LabeledInstance {
    Instance instance;
    TruthRecord truth;
    int label = 0;
};

enum class ParseMode { Strict, Lenient };

template <typename T>
struct ParseResult {
    std::vector<T> records;
    std::size_t skippedLines = 0;
};

ParseResult<Instance> parse_instances(const std::filesystem::path& path,
                                      ParseMode mode = ParseMode::Strict);
ParseResult<TruthRecord> parse_truth(const std::filesystem::path& path,
                                     ParseMode mode = ParseMode::Strict);

/// Single-line parsers, exposed for reuse by the scoring service and tests.
Instance parse_instance_json(std::string_view line);
TruthRecord parse_truth_json(std::string_view line);

struct MergeResult {
    std::vector<LabeledInstance> rows;
    std::size_t unmatchedInstances = 0;
    std::size_t unmatchedTruths = 0;
};

/// Inner join on id in instance order. Throws ValidationError on duplicate ids.
MergeResult merge_corpus(std::vector<Instance> instances, std::vector<TruthRecord> truths);

int encode_label(std::string_view truthClass);

struct TruthStats {
    double mean = 0.0;
    double median = 0.0;
    double mode = 0.0;
};

TruthStats recompute_truth_stats(const std::vector<double>& judgments);

struct Split {
    std::vector<LabeledInstance> train;
    std::vector<LabeledInstance> test;
};

/// Permutation of [0, n) from a seeded uniform shuffle; first floor(n*fraction)
/// indices form the training part. Shared by every split in the project.
std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed);
std::size_t train_size(std::size_t n, double trainFraction);

Split split_train_test(const std::vector<LabeledInstance>& data, double trainFraction,
                       std::uint64_t seed = 1);

/// Rows with non-empty post text and non-empty target title.
std::vector<LabeledInstance> filter_valid(const std::vector<LabeledInstance>& data);

// --- exploratory tables -----------------------------------------------------

enum class Grouper { ImageCount, Weekday, KeywordCount, CaptionCount };

Grouper parse_grouper(std::string_view name);
std::string_view grouper_name(Grouper g);

struct EdaRow {
    std::string groupKey;
    std::size_t clickbaitCount = 0;
    std::size_t nonClickbaitCount = 0;
    double clickbaitPct = 0.0;
};

struct EdaTable {
    Grouper grouper{};
    std::vector<EdaRow> rows;
    /// Rows routed to the "unknown" group (weekday parse failures).
    std::size_t unknownCount = 0;
    /// Rows outside the 0..10 window for keyword/caption groupings.
    std::size_t excludedCount = 0;
};

EdaTable eda_group_table(const std::vector<LabeledInstance>& data, Grouper grouper);

/// Day of week from a Twitter timestamp "Tue Jun 09 16:31:10 +0000 2015",
/// computed from the calendar date in the timestamp's own offset.
std::optional<std::string> weekday_of(std::string_view timestamp);

std::size_t keyword_count(std::string_view keywords);

// --- merged corpus CSV ------------------------------------------------------

/// Header of the merged corpus file. List fields are JSON arrays.
const std::vector<std::string>& corpus_csv_header();

void write_corpus_csv(const std::filesystem::path& path, const std::vector<LabeledInstance>& rows);
std::vector<LabeledInstance> read_corpus_csv(const std::filesystem::path& path);

void write_eda_csv(const std::filesystem::path& path, const EdaTable& table);
std::string format_percent(double pct);

} // namespace clickbait::corpus
