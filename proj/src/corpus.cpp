#include "clickbait/corpus.hpp"

#include "clickbait/csv.hpp"
#include "clickbait/error.hpp"
#include "clickbait/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace clickbait::corpus {

using nlohmann::json;

std::string Instance::post() const {
    std::string out;
    for (const auto& part : postText) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += part;
    }
    return out;
}

namespace {

std::string string_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return {};
    }
    if (it->is_string()) {
        return it->get<std::string>();
    }
    if (it->is_number_integer()) {
        return std::to_string(it->get<long long>());
    }
    throw Error(std::string("field '") + key + "' must be a string");
}

std::vector<std::string> list_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return {};
    }
    if (it->is_string()) {
        return {it->get<std::string>()};
    }
    if (!it->is_array()) {
        throw Error(std::string("field '") + key + "' must be a list of strings");
    }
    std::vector<std::string> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_string()) {
            throw Error(std::string("field '") + key + "' must be a list of strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

double number_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) {
        throw Error(std::string("field '") + key + "' must be a number");
    }
    return it->get<double>();
}

json parse_object(std::string_view line) {
    json obj = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) {
        throw Error("not a JSON object");
    }
    return obj;
}

bool blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

template <typename T, typename ParseLine>
ParseResult<T> parse_jsonl(const std::filesystem::path& path, ParseMode mode, ParseLine parse_line) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    ParseResult<T> result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        try {
            result.records.push_back(parse_line(line));
        } catch (const Error& e) {
            if (mode == ParseMode::Strict) {
                throw ParseError(path.filename().string() + ": " + e.what(), line_no);
            }
            ++result.skippedLines;
        }
    }
    if (in.bad()) {
        throw IoError("read failure on " + path.string());
    }
    return result;
}

} // namespace

Instance parse_instance_json(std::string_view line) {
    const json obj = parse_object(line);
    Instance inst;
    inst.id = string_field(obj, "id");
    if (inst.id.empty()) {
        throw Error("missing id");
    }
    inst.postText = list_field(obj, "postText");
    inst.postTimestamp = string_field(obj, "postTimestamp");
    inst.postMedia = list_field(obj, "postMedia");
    inst.targetTitle = string_field(obj, "targetTitle");
    inst.targetDescription = string_field(obj, "targetDescription");
    inst.targetKeywords = string_field(obj, "targetKeywords");
    inst.targetParagraphs = list_field(obj, "targetParagraphs");
    inst.targetCaptions = list_field(obj, "targetCaptions");
    return inst;
}

TruthRecord parse_truth_json(std::string_view line) {
    const json obj = parse_object(line);
    TruthRecord t;
    t.id = string_field(obj, "id");
    if (t.id.empty()) {
        throw Error("missing id");
    }
    auto it = obj.find("truthJudgments");
    if (it == obj.end() || !it->is_array() || it->empty()) {
        throw Error("truthJudgments must be a non-empty list");
    }
    for (const auto& v : *it) {
        if (!v.is_number()) {
            throw Error("truthJudgments must hold numbers");
        }
        t.truthJudgments.push_back(v.get<double>());
    }
    t.truthMean = number_field(obj, "truthMean");
    t.truthMedian = number_field(obj, "truthMedian");
    t.truthMode = number_field(obj, "truthMode");
    t.truthClass = string_field(obj, "truthClass");
    if (t.truthClass != "clickbait" && t.truthClass != "no-clickbait") {
        throw Error("truthClass must be 'clickbait' or 'no-clickbait'");
    }
    return t;
}

ParseResult<Instance> parse_instances(const std::filesystem::path& path, ParseMode mode) {
    return parse_jsonl<Instance>(path, mode, parse_instance_json);
}

ParseResult<TruthRecord> parse_truth(const std::filesystem::path& path, ParseMode mode) {
    return parse_jsonl<TruthRecord>(path, mode, parse_truth_json);
}

int encode_label(std::string_view truthClass) {
    if (truthClass == "clickbait") {
        return 1;
    }
    if (truthClass == "no-clickbait") {
        return 0;
    }
    throw ValidationError("truthClass", "unknown class '" + std::string(truthClass) + "'");
}

MergeResult merge_corpus(std::vector<Instance> instances, std::vector<TruthRecord> truths) {
    std::unordered_map<std::string, std::size_t> truth_index;
    truth_index.reserve(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!truth_index.emplace(truths[i].id, i).second) {
            throw ValidationError("id", "duplicate id '" + truths[i].id + "' in truth records");
        }
    }
    std::unordered_set<std::string> seen;
    seen.reserve(instances.size());
    MergeResult out;
    std::size_t matched = 0;
    for (auto& inst : instances) {
        if (!seen.insert(inst.id).second) {
            throw ValidationError("id", "duplicate id '" + inst.id + "' in instances");
        }
        auto it = truth_index.find(inst.id);
        if (it == truth_index.end()) {
            ++out.unmatchedInstances;
            continue;
        }
        LabeledInstance row;
        row.truth = std::move(truths[it->second]);
        row.label = encode_label(row.truth.truthClass);
        row.instance = std::move(inst);
        out.rows.push_back(std::move(row));
        ++matched;
    }
    out.unmatchedTruths = truths.size() - matched;
    return out;
}

TruthStats recompute_truth_stats(const std::vector<double>& judgments) {
    if (judgments.empty()) {
        throw ValidationError("truthJudgments", "empty judgment list");
    }
    TruthStats s;
    double sum = 0.0;
    for (double j : judgments) {
        sum += j;
    }
    s.mean = sum / static_cast<double>(judgments.size());

    std::vector<double> sorted = judgments;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    // Sorted ascending, so the first run of maximal length is the smallest mode.
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && sorted[j] == sorted[i]) {
            ++j;
        }
        if (j - i > best_len) {
            best_len = j - i;
            s.mode = sorted[i];
        }
        i = j;
    }
    return s;
}

std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    return order;
}

std::size_t train_size(std::size_t n, double trainFraction) {
    if (!(trainFraction > 0.0 && trainFraction < 1.0)) {
        throw ValidationError("trainFraction", "must lie strictly between 0 and 1");
    }
    // Guard against 0.67 * 21997 landing a hair under the integer.
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * trainFraction + 1e-9));
}

Split split_train_test(const std::vector<LabeledInstance>& data, double trainFraction,
                       std::uint64_t seed) {
    if (data.empty()) {
        throw ValidationError("data", "cannot split an empty corpus");
    }
    const std::size_t cut = train_size(data.size(), trainFraction);
    const auto order = split_order(data.size(), seed);
    Split s;
    s.train.reserve(cut);
    s.test.reserve(data.size() - cut);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < cut ? s.train : s.test).push_back(data[order[i]]);
    }
    return s;
}

std::vector<LabeledInstance> filter_valid(const std::vector<LabeledInstance>& data) {
    auto has_text = [](std::string_view s) {
        return std::any_of(s.begin(), s.end(), [](unsigned char c) { return !std::isspace(c); });
    };
    std::vector<LabeledInstance> out;
    for (const auto& row : data) {
        if (has_text(row.instance.post()) && has_text(row.instance.targetTitle)) {
            out.push_back(row);
        }
    }
    return out;
}

// --- exploratory tables -------------------------------------------------------

Grouper parse_grouper(std::string_view name) {
    if (name == "images" || name == "imageCount") return Grouper::ImageCount;
    if (name == "weekday") return Grouper::Weekday;
    if (name == "keywords" || name == "keywordCount") return Grouper::KeywordCount;
    if (name == "captions" || name == "captionCount") return Grouper::CaptionCount;
    throw ValidationError("group", "unknown grouping '" + std::string(name) + "'");
}

std::string_view grouper_name(Grouper g) {
    switch (g) {
    case Grouper::ImageCount: return "images";
    case Grouper::Weekday: return "weekday";
    case Grouper::KeywordCount: return "keywords";
    case Grouper::CaptionCount: return "captions";
    }
    return "?";
}

namespace {

constexpr std::array<std::string_view, 7> kWeekdays = {
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"};

constexpr std::array<std::string_view, 12> kMonths = {
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) {
        return false;
    }
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') {
            return false;
        }
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

} // namespace

std::optional<std::string> weekday_of(std::string_view timestamp) {
    // EEE MMM dd HH:mm:ss +zzzz yyyy
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos < timestamp.size()) {
        while (pos < timestamp.size() && timestamp[pos] == ' ') ++pos;
        std::size_t end = timestamp.find(' ', pos);
        if (end == std::string_view::npos) end = timestamp.size();
        if (end > pos) parts.push_back(timestamp.substr(pos, end - pos));
        pos = end;
    }
    if (parts.size() != 6) {
        return std::nullopt;
    }
    auto month_it = std::find(kMonths.begin(), kMonths.end(), parts[1]);
    int dom = 0;
    int yr = 0;
    if (month_it == kMonths.end() || !parse_int(parts[2], dom) || !parse_int(parts[5], yr)) {
        return std::nullopt;
    }
    const auto& tz = parts[4];
    int tz_digits = 0;
    if (tz.size() != 5 || (tz[0] != '+' && tz[0] != '-') || !parse_int(tz.substr(1), tz_digits)) {
        return std::nullopt;
    }
    const auto& clock = parts[3];
    int hh = 0, mm = 0, ss = 0;
    if (clock.size() != 8 || clock[2] != ':' || clock[5] != ':' ||
        !parse_int(clock.substr(0, 2), hh) || !parse_int(clock.substr(3, 2), mm) ||
        !parse_int(clock.substr(6, 2), ss) || hh > 23 || mm > 59 || ss > 60) {
        return std::nullopt;
    }
    namespace chr = std::chrono;
    const chr::year_month_day ymd{chr::year{yr},
                                  chr::month{static_cast<unsigned>(month_it - kMonths.begin() + 1)},
                                  chr::day{static_cast<unsigned>(dom)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    const chr::weekday wd{chr::sys_days{ymd}};
    // iso_encoding: Monday = 1 ... Sunday = 7
    return std::string(kWeekdays[wd.iso_encoding() - 1]);
}

std::size_t keyword_count(std::string_view keywords) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= keywords.size()) {
        std::size_t end = keywords.find(',', pos);
        if (end == std::string_view::npos) end = keywords.size();
        auto piece = keywords.substr(pos, end - pos);
        if (std::any_of(piece.begin(), piece.end(), [](unsigned char c) { return !std::isspace(c); })) {
            ++count;
        }
        pos = end + 1;
    }
    return count;
}

EdaTable eda_group_table(const std::vector<LabeledInstance>& data, Grouper grouper) {
    EdaTable table;
    table.grouper = grouper;

    struct Counts {
        std::size_t cb = 0;
        std::size_t ncb = 0;
    };
    std::map<std::size_t, Counts> numeric;
    std::array<Counts, 7> days{};
    Counts unknown;

    for (const auto& row : data) {
        const auto& inst = row.instance;
        Counts* slot = nullptr;
        switch (grouper) {
        case Grouper::ImageCount:
            slot = &numeric[inst.postMedia.size()];
            break;
        case Grouper::KeywordCount:
        case Grouper::CaptionCount: {
            const std::size_t k = grouper == Grouper::KeywordCount ? keyword_count(inst.targetKeywords)
                                                                   : inst.targetCaptions.size();
            if (k > 10) {
                ++table.excludedCount;
                continue;
            }
            slot = &numeric[k];
            break;
        }
        case Grouper::Weekday: {
            auto wd = weekday_of(inst.postTimestamp);
            if (!wd) {
                slot = &unknown;
                ++table.unknownCount;
            } else {
                auto it = std::find(kWeekdays.begin(), kWeekdays.end(), *wd);
                slot = &days[static_cast<std::size_t>(it - kWeekdays.begin())];
            }
            break;
        }
        }
        (row.label == 1 ? slot->cb : slot->ncb)++;
    }

    auto emit = [&](std::string key, const Counts& c) {
        if (c.cb + c.ncb == 0) {
            return;
        }
        EdaRow r;
        r.groupKey = std::move(key);
        r.clickbaitCount = c.cb;
        r.nonClickbaitCount = c.ncb;
        r.clickbaitPct = 100.0 * static_cast<double>(c.cb) / static_cast<double>(c.cb + c.ncb);
        table.rows.push_back(std::move(r));
    };
    if (grouper == Grouper::Weekday) {
        for (std::size_t d = 0; d < days.size(); ++d) {
            emit(std::string(kWeekdays[d]), days[d]);
        }
        emit("unknown", unknown);
    } else {
        for (const auto& [k, c] : numeric) {
            emit(std::to_string(k), c);
        }
    }
    return table;
}

std::string format_percent(double pct) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << pct << '%';
    return os.str();
}

void write_eda_csv(const std::filesystem::path& path, const EdaTable& table) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    csv::write_row(out, {std::string(grouper_name(table.grouper)), "clickbait", "no-clickbait", "%-clickbait"});
    for (const auto& r : table.rows) {
        csv::write_row(out, {r.groupKey, std::to_string(r.clickbaitCount),
                             std::to_string(r.nonClickbaitCount), format_percent(r.clickbaitPct)});
    }
}

// --- merged corpus CSV --------------------------------------------------------

const std::vector<std::string>& corpus_csv_header() {
    static const std::vector<std::string> header = {
        "id",          "postText",         "postTimestamp",     "postMedia",        "targetTitle",
        "targetDescription", "targetKeywords", "targetParagraphs", "targetCaptions", "truthJudgments",
        "truthMean",   "truthMedian",      "truthMode",         "truthClass",       "label"};
    return header;
}

namespace {

std::string list_json(const std::vector<std::string>& v) { return json(v).dump(); }

std::vector<std::string> json_list(const std::string& text, std::size_t line) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw ParseError("expected a JSON array", line);
    }
    return j.get<std::vector<std::string>>();
}

} // namespace

void write_corpus_csv(const std::filesystem::path& path, const std::vector<LabeledInstance>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    csv::write_row(out, corpus_csv_header());
    for (const auto& r : rows) {
        const auto& i = r.instance;
        const auto& t = r.truth;
        csv::write_row(out, {i.id, list_json(i.postText), i.postTimestamp, list_json(i.postMedia),
                             i.targetTitle, i.targetDescription, i.targetKeywords,
                             list_json(i.targetParagraphs), list_json(i.targetCaptions),
                             json(t.truthJudgments).dump(), csv::format_double(t.truthMean),
                             csv::format_double(t.truthMedian), csv::format_double(t.truthMode),
                             t.truthClass, std::to_string(r.label)});
    }
}

std::vector<LabeledInstance> read_corpus_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::size_t line = 0;
    auto header = csv::read_row(in, line);
    if (!header || *header != corpus_csv_header()) {
        throw SchemaError(path.string() + ": not a merged corpus file (unexpected header)");
    }
    std::vector<LabeledInstance> rows;
    while (auto rec = csv::read_row(in, line)) {
        const auto& f = *rec;
        if (f.size() == 1 && f[0].empty()) {
            continue;
        }
        if (f.size() != header->size()) {
            throw ParseError("expected " + std::to_string(header->size()) + " fields", line);
        }
        LabeledInstance r;
        try {
            r.instance.id = f[0];
            r.instance.postText = json_list(f[1], line);
            r.instance.postTimestamp = f[2];
            r.instance.postMedia = json_list(f[3], line);
            r.instance.targetTitle = f[4];
            r.instance.targetDescription = f[5];
            r.instance.targetKeywords = f[6];
            r.instance.targetParagraphs = json_list(f[7], line);
            r.instance.targetCaptions = json_list(f[8], line);
            json judgments = json::parse(f[9], nullptr, false);
            if (judgments.is_discarded() || !judgments.is_array()) {
                throw ParseError("truthJudgments is not a JSON array", line);
            }
            r.truth.id = f[0];
            r.truth.truthJudgments = judgments.get<std::vector<double>>();
            r.truth.truthMean = csv::parse_double(f[10]);
            r.truth.truthMedian = csv::parse_double(f[11]);
            r.truth.truthMode = csv::parse_double(f[12]);
            r.truth.truthClass = f[13];
            r.label = encode_label(f[13]);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(e.what(), line);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace clickbait::corpus
