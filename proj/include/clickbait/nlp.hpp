#pragma once

// Tokenisation, surface features, rule-based POS tag counts and lexicon
// sentiment.

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace clickbait::nlp {

struct TokenSeq {
    std::vector<std::string> tokens;   // lowercased
    std::vector<std::string> original; // same tokens, source casing

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
};

/// Maps curly quotes and apostrophes to their ASCII forms.
std::string normalize_text(std::string_view text);

/// Whitespace split; leading/trailing ASCII punctuation peeled into
/// single-character tokens. A leading '#' or '@' stays attached to a word.
TokenSeq tokenize(std::string_view text);

// --- lexical resources ----------------------------------------------------

class StopWords {
public:
    StopWords() = default;
    explicit StopWords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

    static StopWords load(const std::filesystem::path& path);

    bool contains(const std::string& lowered) const { return words_.count(lowered) != 0; }
    std::size_t size() const noexcept { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

struct SentimentEntry {
    double polarity = 0.0;
    double subjectivity = 0.0;
};

class SentimentLexicon {
public:
    SentimentLexicon() = default;
    explicit SentimentLexicon(std::unordered_map<std::string, SentimentEntry> entries)
        : entries_(std::move(entries)) {}

    /// CSV "word,polarity,subjectivity" with a header row.
    static SentimentLexicon load(const std::filesystem::path& path);

    const SentimentEntry* find(const std::string& lowered) const {
        auto it = entries_.find(lowered);
        return it == entries_.end() ? nullptr : &it->second;
    }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::unordered_map<std::string, SentimentEntry> entries_;
};

/// Fixed ordered tag set over which POS counts are reported.
class TagSet {
public:
    explicit TagSet(std::vector<std::string> tags);

    /// The 36 Penn Treebank word-level tags.
    static const TagSet& penn36();

    const std::vector<std::string>& tags() const noexcept { return tags_; }
    std::size_t size() const noexcept { return tags_.size(); }
    /// Index of `tag`, or size() when absent.
    std::size_t index_of(std::string_view tag) const;
    bool contains(std::string_view tag) const { return index_of(tag) < tags_.size(); }

private:
    std::vector<std::string> tags_;
    std::unordered_map<std::string, std::size_t> index_;
};

class PosLexicon {
public:
    PosLexicon() = default;
    explicit PosLexicon(std::unordered_map<std::string, std::string> tags) : tags_(std::move(tags)) {}

    /// TSV "word<TAB>tag". Entries whose tag is outside `tagset` are ignored.
    static PosLexicon load(const std::filesystem::path& path, const TagSet& tagset);

    const std::string* find(const std::string& lowered) const {
        auto it = tags_.find(lowered);
        return it == tags_.end() ? nullptr : &it->second;
    }
    std::size_t size() const noexcept { return tags_.size(); }

private:
    std::unordered_map<std::string, std::string> tags_;
};

// --- features ---------------------------------------------------------------

struct SurfaceFeatures {
    int stopwordCount = 0;
    int uniquePunctuationCount = 0;
    int hasDigits = 0;
    int hasWhWord = 0;
    int hasAlluringPhrase = 0;
};

const std::vector<std::string>& wh_words();
const std::vector<std::string>& alluring_phrases();

SurfaceFeatures surface_features(std::string_view text, const TokenSeq& tokens,
                                 const StopWords& stopwords);

/// Tag a single token: lexicon, then suffix/shape rules, then NN.
std::string tag_token(const std::string& lowered, const std::string& original,
                      const PosLexicon& lexicon);

/// Counts indexed like `tagset.tags()`. Sum equals the token count provided
/// the tag set contains NN and the rule tags.
std::vector<int> pos_counts(const TokenSeq& tokens, const PosLexicon& lexicon, const TagSet& tagset);

struct SentimentScore {
    double polarity = 0.0;
    double subjectivity = 0.0;
};

bool is_negator(std::string_view lowered);

SentimentScore sentiment(const TokenSeq& tokens, const SentimentLexicon& lexicon);

/// Bundle of the immutable lexical resources a feature pipeline needs.
struct Lexicons {
    StopWords stopwords;
    SentimentLexicon sentiment;
    PosLexicon pos;

    /// Loads stopwords.txt, sentiment_lexicon.csv and pos_lexicon.tsv.
    static Lexicons load(const std::filesystem::path& dataDir, const TagSet& tagset = TagSet::penn36());
};

} // namespace clickbait::nlp
