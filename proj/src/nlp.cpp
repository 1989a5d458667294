#include "clickbait/nlp.hpp"

#include "clickbait/csv.hpp"
#include "clickbait/error.hpp"

#include <algorithm>
#include <fstream>

namespace clickbait::nlp {

namespace {

bool is_punct(unsigned char c) {
    return c < 0x80 && std::ispunct(c) != 0;
}

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Word characters include every byte of a multi-byte UTF-8 sequence.
bool is_word_char(unsigned char c) {
    return c >= 0x80 || std::isalnum(c) != 0;
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

void push_token(TokenSeq& seq, std::string_view tok) {
    seq.original.emplace_back(tok);
    seq.tokens.push_back(lower_ascii(tok));
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

} // namespace

std::string normalize_text(std::string_view text) {
    // U+2018/2019 -> ', U+201C/201D -> "
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
            static_cast<unsigned char>(text[i + 1]) == 0x80) {
            const auto c = static_cast<unsigned char>(text[i + 2]);
            if (c == 0x98 || c == 0x99) {
                out.push_back('\'');
                i += 2;
                continue;
            }
            if (c == 0x9C || c == 0x9D) {
                out.push_back('"');
                i += 2;
                continue;
            }
        }
        out.push_back(text[i]);
    }
    return out;
}

TokenSeq tokenize(std::string_view text) {
    TokenSeq seq;
    std::size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && is_space(static_cast<unsigned char>(text[pos]))) ++pos;
        std::size_t end = pos;
        while (end < text.size() && !is_space(static_cast<unsigned char>(text[end]))) ++end;
        if (end == pos) {
            break;
        }
        std::string_view chunk = text.substr(pos, end - pos);
        pos = end;

        std::size_t b = 0;
        std::size_t e = chunk.size();
        while (b < e && is_punct(static_cast<unsigned char>(chunk[b]))) {
            const char c = chunk[b];
            if ((c == '#' || c == '@') && b + 1 < e && is_word_char(static_cast<unsigned char>(chunk[b + 1]))) {
                break;
            }
            push_token(seq, chunk.substr(b, 1));
            ++b;
        }
        std::size_t core_end = e;
        while (core_end > b && is_punct(static_cast<unsigned char>(chunk[core_end - 1]))) {
            --core_end;
        }
        if (core_end > b) {
            push_token(seq, chunk.substr(b, core_end - b));
        }
        for (std::size_t i = core_end; i < e; ++i) {
            push_token(seq, chunk.substr(i, 1));
        }
    }
    return seq;
}

// --- resources ----------------------------------------------------------------

StopWords StopWords::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open stop-word list " + path.string());
    }
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        auto w = trim(line);
        if (!w.empty() && w.front() != '#') {
            words.insert(lower_ascii(w));
        }
    }
    return StopWords(std::move(words));
}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open sentiment lexicon " + path.string());
    }
    std::size_t line = 0;
    auto header = csv::read_row(in, line);
    if (!header || header->size() != 3 || (*header)[0] != "word") {
        throw ParseError("sentiment lexicon must start with 'word,polarity,subjectivity'", 1);
    }
    std::unordered_map<std::string, SentimentEntry> entries;
    while (auto row = csv::read_row(in, line)) {
        if (row->size() == 1 && (*row)[0].empty()) {
            continue;
        }
        if (row->size() != 3) {
            throw ParseError("expected word,polarity,subjectivity", line);
        }
        try {
            SentimentEntry e{csv::parse_double((*row)[1]), csv::parse_double((*row)[2])};
            entries[lower_ascii((*row)[0])] = e;
        } catch (const Error& err) {
            throw ParseError(err.what(), line);
        }
    }
    return SentimentLexicon(std::move(entries));
}

TagSet::TagSet(std::vector<std::string> tags) : tags_(std::move(tags)) {
    for (std::size_t i = 0; i < tags_.size(); ++i) {
        if (!index_.emplace(tags_[i], i).second) {
            throw ValidationError("tagset", "duplicate tag " + tags_[i]);
        }
    }
}

const TagSet& TagSet::penn36() {
    static const TagSet set({"CC",  "CD",  "DT",   "EX", "FW",  "IN",  "JJ",  "JJR", "JJS",
                             "LS",  "MD",  "NN",   "NNS", "NNP", "NNPS", "PDT", "POS", "PRP",
                             "PRP$", "RB", "RBR",  "RBS", "RP",  "SYM", "TO",  "UH",  "VB",
                             "VBD", "VBG", "VBN",  "VBP", "VBZ", "WDT", "WP",  "WP$", "WRB"});
    return set;
}

std::size_t TagSet::index_of(std::string_view tag) const {
    auto it = index_.find(std::string(tag));
    return it == index_.end() ? tags_.size() : it->second;
}

PosLexicon PosLexicon::load(const std::filesystem::path& path, const TagSet& tagset) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open POS lexicon " + path.string());
    }
    std::unordered_map<std::string, std::string> tags;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("expected word<TAB>tag", line_no);
        }
        std::string tag = trim(std::string_view(line).substr(tab + 1));
        if (tagset.contains(tag)) {
            tags.emplace(lower_ascii(line.substr(0, tab)), std::move(tag));
        }
    }
    return PosLexicon(std::move(tags));
}

Lexicons Lexicons::load(const std::filesystem::path& dataDir, const TagSet& tagset) {
    return Lexicons{StopWords::load(dataDir / "stopwords.txt"),
                    SentimentLexicon::load(dataDir / "sentiment_lexicon.csv"),
                    PosLexicon::load(dataDir / "pos_lexicon.tsv", tagset)};
}

// --- features -------------------------------------------------------------------

const std::vector<std::string>& wh_words() {
    static const std::vector<std::string> words = {"who",   "what",  "when", "where", "why",
                                                   "which", "whom", "whose", "how"};
    return words;
}

const std::vector<std::string>& alluring_phrases() {
    static const std::vector<std::string> phrases = {"click here",  "exclusive", "won't believe",
                                                     "happens next", "don't want", "you know"};
    return phrases;
}

SurfaceFeatures surface_features(std::string_view text, const TokenSeq& tokens,
                                 const StopWords& stopwords) {
    SurfaceFeatures f;
    for (const auto& t : tokens.tokens) {
        if (stopwords.contains(t)) {
            ++f.stopwordCount;
        }
    }

    std::array<bool, 128> seen{};
    for (unsigned char c : text) {
        if (is_punct(c) && !seen[c]) {
            seen[c] = true;
            ++f.uniquePunctuationCount;
        }
        if (c >= '0' && c <= '9') {
            f.hasDigits = 1;
        }
    }

    const auto& wh = wh_words();
    f.hasWhWord = std::any_of(tokens.tokens.begin(), tokens.tokens.end(), [&](const std::string& t) {
                      return std::find(wh.begin(), wh.end(), t) != wh.end();
                  })
                      ? 1
                      : 0;

    const std::string lowered = lower_ascii(normalize_text(text));
    for (const auto& phrase : alluring_phrases()) {
        if (lowered.find(phrase) != std::string::npos) {
            f.hasAlluringPhrase = 1;
            break;
        }
    }
    return f;
}

std::string tag_token(const std::string& lowered, const std::string& original, const PosLexicon& lexicon) {
    if (const auto* tag = lexicon.find(lowered)) {
        return *tag;
    }
    if (!lowered.empty() && std::all_of(lowered.begin(), lowered.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return "CD";
    }
    if (!lowered.empty() &&
        std::all_of(lowered.begin(), lowered.end(), [](unsigned char c) { return is_punct(c); })) {
        return "SYM";
    }
    if (ends_with(lowered, "ing")) return "VBG";
    if (ends_with(lowered, "ly")) return "RB";
    if (ends_with(lowered, "ed")) return "VBD";
    if (ends_with(lowered, "s") && lowered.size() > 3) return "NNS";
    if (!original.empty() && original.front() >= 'A' && original.front() <= 'Z') return "NNP";
    return "NN";
}

std::vector<int> pos_counts(const TokenSeq& tokens, const PosLexicon& lexicon, const TagSet& tagset) {
    std::vector<int> counts(tagset.size(), 0);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto idx = tagset.index_of(tag_token(tokens.tokens[i], tokens.original[i], lexicon));
        if (idx < counts.size()) {
            ++counts[idx];
        }
    }
    return counts;
}

bool is_negator(std::string_view lowered) {
    return lowered == "not" || lowered == "no" || lowered == "never" || ends_with(lowered, "n't");
}

SentimentScore sentiment(const TokenSeq& tokens, const SentimentLexicon& lexicon) {
    double pol = 0.0;
    double subj = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto* entry = lexicon.find(tokens.tokens[i]);
        if (!entry) {
            continue;
        }
        double p = entry->polarity;
        const bool negated = (i >= 1 && is_negator(tokens.tokens[i - 1])) ||
                             (i >= 2 && is_negator(tokens.tokens[i - 2]));
        if (negated) {
            p *= -0.5;
        }
        pol += p;
        subj += entry->subjectivity;
        ++hits;
    }
    if (hits == 0) {
        return {};
    }
    const double n = static_cast<double>(hits);
    return {std::clamp(pol / n, -1.0, 1.0), std::clamp(subj / n, 0.0, 1.0)};
}

} // namespace clickbait::nlp
