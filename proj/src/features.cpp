#include "clickbait/features.hpp"

#include "clickbait/csv.hpp"
#include "clickbait/error.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace clickbait::features {

using nlohmann::json;

std::string_view field_name(Field f) {
    switch (f) {
    case Field::Post: return "post";
    case Field::Captions: return "captions";
    case Field::Description: return "description";
    case Field::Keywords: return "keywords";
    case Field::Paragraphs: return "paragraphs";
    case Field::Title: return "title";
    }
    return "?";
}

const std::vector<FieldPair>& wmd_pairs() {
    using F = Field;
    static const std::vector<FieldPair> pairs = {
        {F::Post, F::Title},         {F::Post, F::Description}, {F::Post, F::Paragraphs},
        {F::Post, F::Keywords},      {F::Post, F::Captions},    {F::Title, F::Description},
        {F::Title, F::Paragraphs},   {F::Title, F::Keywords},   {F::Title, F::Captions}};
    return pairs;
}

const std::vector<FieldPair>& cosine_pairs() {
    using F = Field;
    static const std::vector<FieldPair> pairs = {
        {F::Post, F::Title},         {F::Post, F::Description}, {F::Post, F::Paragraphs},
        {F::Post, F::Keywords},      {F::Post, F::Captions},    {F::Description, F::Title},
        {F::Paragraphs, F::Title},   {F::Keywords, F::Title},   {F::Captions, F::Title}};
    return pairs;
}

namespace {

constexpr std::array<Field, kFieldCount> kFields = {Field::Post,     Field::Captions,   Field::Description,
                                                    Field::Keywords, Field::Paragraphs, Field::Title};
constexpr std::array<Field, 5> kPolarityFields = {Field::Post, Field::Captions, Field::Description,
                                                  Field::Paragraphs, Field::Title};
constexpr std::array<Field, 4> kSubjectivityFields = {Field::Captions, Field::Description, Field::Paragraphs,
                                                      Field::Title};

std::string pair_name(std::string_view prefix, FieldPair p) {
    return std::string(prefix) + "_" + std::string(field_name(p.first)) + "_" + std::string(field_name(p.second));
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += p;
    }
    return out;
}

std::string field_text(const corpus::Instance& inst, Field f) {
    switch (f) {
    case Field::Post: return inst.post();
    case Field::Captions: return join(inst.targetCaptions);
    case Field::Description: return inst.targetDescription;
    case Field::Keywords: {
        std::string k = inst.targetKeywords;
        std::replace(k.begin(), k.end(), ',', ' ');
        return k;
    }
    case Field::Paragraphs: return join(inst.targetParagraphs);
    case Field::Title: return inst.targetTitle;
    }
    return {};
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

FeatureSchema make_schema(std::size_t embeddingDim, const nlp::TagSet& tagset) {
    FeatureSchema s;
    s.embeddingDim = embeddingDim;
    s.tags = tagset.tags();
    for (Field f : kFields) {
        for (std::size_t k = 0; k < embeddingDim; ++k) {
            s.names.push_back(std::string(field_name(f)) + "_vec_" + std::to_string(k));
        }
    }
    for (const auto& p : wmd_pairs()) s.names.push_back(pair_name("wmd", p));
    for (Field f : kPolarityFields) s.names.push_back("polarity_" + std::string(field_name(f)));
    for (Field f : kSubjectivityFields) s.names.push_back("subjectivity_" + std::string(field_name(f)));
    for (const auto& p : cosine_pairs()) s.names.push_back(pair_name("cosine", p));
    s.names.push_back("jaccard_post_title");
    s.names.push_back("jaccard_post_description");
    s.names.push_back("num_captions");
    s.names.push_back("num_paragraphs");
    s.names.push_back("post_stopword_count");
    s.names.push_back("post_unique_punctuation");
    s.names.push_back("num_post_images");
    s.names.push_back("has_digits");
    s.names.push_back("has_wh_word");
    s.names.push_back("has_alluring_phrase");
    for (const auto& t : tagset.tags()) s.names.push_back("pos_" + t);
    return s;
}

std::string FeatureSchema::version() const {
    std::uint64_t h = fnv1a("clickbait-features-v1");
    for (const auto& n : names) {
        h = fnv1a(n, h);
        h = fnv1a("\x1f", h);
    }
    std::ostringstream os;
    os << "v1-" << std::hex << h;
    return os.str();
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw SchemaError("unknown feature '" + name + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
}

json FeatureSchema::to_json() const {
    json sent = json::object();
    for (const auto& [k, v] : sentinels) {
        sent[k] = v;
    }
    return json{{"version", version()}, {"embeddingDim", embeddingDim}, {"tags", tags},
                {"names", names},       {"sentinels", sent}};
}

FeatureSchema FeatureSchema::from_json(const json& j) {
    try {
        FeatureSchema s;
        s.names = j.at("names").get<std::vector<std::string>>();
        s.embeddingDim = j.at("embeddingDim").get<std::size_t>();
        s.tags = j.at("tags").get<std::vector<std::string>>();
        for (const auto& [k, v] : j.at("sentinels").items()) {
            s.sentinels[k] = v.get<double>();
        }
        if (j.contains("version") && j.at("version").get<std::string>() != s.version()) {
            throw SchemaError("feature schema version does not match its name list");
        }
        return s;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed feature schema: ") + e.what());
    }
}

RawFeatures assemble_raw(const corpus::Instance& inst, const Resources& res, const FeatureSchema& schema) {
    const std::size_t dim = res.table.dimension();
    if (dim != schema.embeddingDim || schema.tags != res.tagset.tags()) {
        throw SchemaError("feature schema does not match the loaded resources");
    }
    std::array<std::string, kFieldCount> text;
    std::array<nlp::TokenSeq, kFieldCount> tokens;
    std::array<embed::Vector, kFieldCount> vectors;
    std::array<std::optional<embed::NbowDoc>, kFieldCount> docs;
    for (std::size_t f = 0; f < kFieldCount; ++f) {
        text[f] = nlp::normalize_text(field_text(inst, kFields[f]));
        tokens[f] = nlp::tokenize(text[f]);
        vectors[f] = embed::sentence_vector(tokens[f], res.table);
    }
    auto idx = [](Field f) { return static_cast<std::size_t>(f); };
    auto doc = [&](Field f) -> const embed::NbowDoc& {
        auto& d = docs[idx(f)];
        if (!d) {
            d = embed::nbow(tokens[idx(f)], res.table);
        }
        return *d;
    };

    RawFeatures out;
    auto& v = out.values;
    v.reserve(schema.size());
    for (const auto& vec : vectors) {
        v.insert(v.end(), vec.begin(), vec.end());
    }
    for (const auto& p : wmd_pairs()) {
        const auto& a = doc(p.first);
        const auto& b = doc(p.second);
        auto d = res.prefilter ? embed::wmd_prefiltered(a, b, res.table) : embed::wmd(a, b, res.table);
        if (!d) {
            out.missingWmd.push_back(v.size());
        }
        v.push_back(d.value_or(0.0));
    }
    std::array<nlp::SentimentScore, kFieldCount> senti;
    for (std::size_t f = 0; f < kFieldCount; ++f) {
        senti[f] = nlp::sentiment(tokens[f], res.lexicons.sentiment);
    }
    for (Field f : kPolarityFields) v.push_back(senti[idx(f)].polarity);
    for (Field f : kSubjectivityFields) v.push_back(senti[idx(f)].subjectivity);
    for (const auto& p : cosine_pairs()) {
        v.push_back(embed::cosine(vectors[idx(p.first)], vectors[idx(p.second)]));
    }
    const auto& post = tokens[idx(Field::Post)];
    v.push_back(embed::jaccard(post, tokens[idx(Field::Title)]));
    v.push_back(embed::jaccard(post, tokens[idx(Field::Description)]));

    const auto surface = nlp::surface_features(text[idx(Field::Post)], post, res.lexicons.stopwords);
    v.push_back(static_cast<double>(inst.targetCaptions.size()));
    v.push_back(static_cast<double>(inst.targetParagraphs.size()));
    v.push_back(surface.stopwordCount);
    v.push_back(surface.uniquePunctuationCount);
    v.push_back(static_cast<double>(inst.postMedia.size()));
    v.push_back(surface.hasDigits);
    v.push_back(surface.hasWhWord);
    v.push_back(surface.hasAlluringPhrase);
    for (int c : nlp::pos_counts(post, res.lexicons.pos, res.tagset)) {
        v.push_back(c);
    }
    if (v.size() != schema.size()) {
        throw SchemaError("assembled " + std::to_string(v.size()) + " features, schema has " +
                          std::to_string(schema.size()));
    }
    return out;
}

std::vector<double> assemble(const corpus::Instance& inst, const Resources& res, const FeatureSchema& schema) {
    auto raw = assemble_raw(inst, res, schema);
    for (std::size_t i : raw.missingWmd) {
        auto it = schema.sentinels.find(schema.names[i]);
        raw.values[i] = it == schema.sentinels.end() ? 0.0 : it->second;
    }
    return std::move(raw.values);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.schema = schema;
    out.X = X.select_rows(rows);
    for (std::size_t r : rows) {
        out.ids.push_back(ids[r]);
        out.labels.push_back(labels[r]);
        out.truthMeans.push_back(truthMeans[r]);
    }
    return out;
}

Dataset featurize(const std::vector<corpus::LabeledInstance>& rows, const Resources& res, FeatureSchema schema,
                  const Progress& progress, std::size_t threads) {
    Dataset ds;
    ds.X = Matrix(rows.size(), schema.size());
    std::vector<std::vector<std::size_t>> missing(rows.size());
    for (const auto& row : rows) {
        ds.ids.push_back(row.instance.id);
        ds.labels.push_back(row.label);
        ds.truthMeans.push_back(row.truth.truthMean);
    }

    // Rows are independent; each worker writes only its own rows.
    std::atomic<std::size_t> next{0};
    std::size_t done = 0;
    std::mutex progress_mutex;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t r = next++; r < rows.size(); r = next++) {
            try {
                auto raw = assemble_raw(rows[r].instance, res, schema);
                std::copy(raw.values.begin(), raw.values.end(), ds.X.row(r).begin());
                missing[r] = std::move(raw.missingWmd);
            } catch (...) {
                std::lock_guard lock(progress_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = rows.size();
                return;
            }
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(++done, rows.size());
            }
        }
    };
    std::size_t workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::max<std::size_t>(1, std::min(workers, rows.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) {
            pool.emplace_back(work);
        }
        work();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    const std::size_t first_wmd = kFieldCount * schema.embeddingDim;
    const std::size_t n_wmd = wmd_pairs().size();
    std::vector<double> max_seen(n_wmd, 0.0);
    std::vector<char> is_missing(n_wmd);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::fill(is_missing.begin(), is_missing.end(), 0);
        for (std::size_t i : missing[r]) {
            is_missing[i - first_wmd] = 1;
        }
        for (std::size_t k = 0; k < n_wmd; ++k) {
            if (!is_missing[k]) {
                max_seen[k] = std::max(max_seen[k], ds.X(r, first_wmd + k));
            }
        }
    }
    for (std::size_t k = 0; k < n_wmd; ++k) {
        schema.sentinels[schema.names[first_wmd + k]] = max_seen[k];
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i : missing[r]) {
            ds.X(r, i) = max_seen[i - first_wmd];
        }
    }
    ds.schema = std::move(schema);
    return ds;
}

std::filesystem::path schema_path_for(const std::filesystem::path& csvPath) {
    auto p = csvPath;
    p.replace_extension();
    return p.string() + ".schema.json";
}

void write_schema_json(const std::filesystem::path& path, const FeatureSchema& schema) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << schema.to_json().dump(2) << '\n';
}

FeatureSchema read_schema_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw SchemaError(path.string() + ": not valid JSON");
    }
    return FeatureSchema::from_json(j);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    csv::Row header = {"id", "label", "truthMean"};
    header.insert(header.end(), ds.schema.names.begin(), ds.schema.names.end());
    csv::write_row(out, header);
    csv::Row row;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        row.clear();
        row.push_back(ds.ids[r]);
        row.push_back(std::to_string(ds.labels[r]));
        row.push_back(csv::format_double(ds.truthMeans[r]));
        for (double x : ds.X.row(r)) {
            row.push_back(csv::format_double(x));
        }
        csv::write_row(out, row);
    }
}

Dataset read_dataset(const std::filesystem::path& csvPath, const std::filesystem::path& schemaPath) {
    Dataset ds;
    ds.schema = read_schema_json(schemaPath);
    std::ifstream in(csvPath);
    if (!in) {
        throw IoError("cannot open " + csvPath.string());
    }
    std::size_t line = 0;
    auto header = csv::read_row(in, line);
    csv::Row expected = {"id", "label", "truthMean"};
    expected.insert(expected.end(), ds.schema.names.begin(), ds.schema.names.end());
    if (!header || *header != expected) {
        throw SchemaError(csvPath.string() + ": header does not match the feature schema");
    }
    ds.X = Matrix(0, ds.schema.size());
    std::vector<double> values(ds.schema.size());
    while (auto rec = csv::read_row(in, line)) {
        if (rec->size() == 1 && (*rec)[0].empty()) {
            continue;
        }
        if (rec->size() != expected.size()) {
            throw ParseError("wrong number of fields", line);
        }
        try {
            ds.ids.push_back((*rec)[0]);
            const int label = std::stoi((*rec)[1]);
            if (label != 0 && label != 1) {
                throw Error("label must be 0 or 1");
            }
            ds.labels.push_back(label);
            ds.truthMeans.push_back(csv::parse_double((*rec)[2]));
            for (std::size_t k = 0; k < values.size(); ++k) {
                values[k] = csv::parse_double((*rec)[k + 3]);
                if (!std::isfinite(values[k])) {
                    throw Error("non-finite feature value");
                }
            }
        } catch (const std::exception& e) {
            throw ParseError(e.what(), line);
        }
        ds.X.append_row(values);
    }
    return ds;
}

// --- preprocessing ----------------------------------------------------------------

std::string_view mode_name(PreprocessMode m) {
    switch (m) {
    case PreprocessMode::Identity: return "identity";
    case PreprocessMode::Standardize: return "standardize";
    case PreprocessMode::PruneAndStandardize: return "prune-standardize";
    }
    return "?";
}

PreprocessMode parse_mode(std::string_view name) {
    if (name == "identity") return PreprocessMode::Identity;
    if (name == "standardize") return PreprocessMode::Standardize;
    if (name == "prune-standardize") return PreprocessMode::PruneAndStandardize;
    throw SchemaError("unknown preprocessor mode '" + std::string(name) + "'");
}

double pearson(const Matrix& X, std::size_t a, std::size_t b) {
    const double n = static_cast<double>(X.rows);
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
        ma += X(r, a);
        mb += X(r, b);
    }
    ma /= n;
    mb /= n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
        const double da = X(r, a) - ma;
        const double db = X(r, b) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        return 0.0;
    }
    return sab / std::sqrt(saa * sbb);
}

Preprocessor fit_preprocessor(const Matrix& X, PreprocessMode mode, std::string schemaVersion) {
    if (X.rows < 2) {
        throw ValidationError("matrix", "need at least 2 rows to fit a preprocessor");
    }
    Preprocessor p;
    p.mode = mode;
    p.inputDim = X.cols;
    p.schemaVersion = std::move(schemaVersion);
    const double n = static_cast<double>(X.rows);

    std::vector<double> mean(X.cols, 0.0);
    std::vector<double> sd(X.cols, 0.0);
    std::vector<std::size_t> zeros(X.cols, 0);
    for (std::size_t r = 0; r < X.rows; ++r) {
        for (std::size_t c = 0; c < X.cols; ++c) {
            const double x = X(r, c);
            mean[c] += x;
            zeros[c] += x == 0.0;
        }
    }
    for (auto& m : mean) {
        m /= n;
    }
    for (std::size_t r = 0; r < X.rows; ++r) {
        for (std::size_t c = 0; c < X.cols; ++c) {
            const double d = X(r, c) - mean[c];
            sd[c] += d * d;
        }
    }
    for (auto& s : sd) {
        s = std::sqrt(s / n);
    }

    if (mode == PreprocessMode::PruneAndStandardize) {
        // Centred, unit-norm columns make each correlation a single dot product.
        std::vector<std::vector<double>> unit;
        for (std::size_t c = 0; c < X.cols; ++c) {
            if (static_cast<double>(zeros[c]) / n > kMaxZeroFraction || !(sd[c] > 0.0)) {
                continue;
            }
            std::vector<double> col(X.rows);
            double norm = 0.0;
            for (std::size_t r = 0; r < X.rows; ++r) {
                col[r] = X(r, c) - mean[c];
                norm += col[r] * col[r];
            }
            norm = std::sqrt(norm);
            for (auto& x : col) {
                x /= norm;
            }
            bool redundant = false;
            for (const auto& kept : unit) {
                double dot = 0.0;
                for (std::size_t r = 0; r < X.rows; ++r) {
                    dot += kept[r] * col[r];
                }
                if (std::abs(dot) > kMaxAbsCorrelation) {
                    redundant = true;
                    break;
                }
            }
            if (!redundant) {
                unit.push_back(std::move(col));
                p.keptIndices.push_back(c);
            }
        }
    } else {
        for (std::size_t c = 0; c < X.cols; ++c) {
            p.keptIndices.push_back(c);
        }
    }

    if (mode != PreprocessMode::Identity) {
        for (std::size_t c : p.keptIndices) {
            p.means.push_back(mean[c]);
            p.stds.push_back(sd[c] > 0.0 ? sd[c] : 1.0);
        }
    }
    return p;
}

Preprocessor fit_preprocessor(const Matrix& X, bool forLinearModel, std::string schemaVersion) {
    return fit_preprocessor(X, forLinearModel ? PreprocessMode::PruneAndStandardize : PreprocessMode::Identity,
                            std::move(schemaVersion));
}

std::vector<double> Preprocessor::apply(std::span<const double> x) const {
    if (x.size() != inputDim) {
        throw SchemaError("preprocessor expects " + std::to_string(inputDim) + " features, got " +
                          std::to_string(x.size()));
    }
    std::vector<double> out(keptIndices.size());
    for (std::size_t k = 0; k < keptIndices.size(); ++k) {
        const double v = x[keptIndices[k]];
        out[k] = means.empty() ? v : (v - means[k]) / stds[k];
    }
    return out;
}

Matrix Preprocessor::apply(const Matrix& X) const {
    Matrix out(X.rows, outputDim());
    for (std::size_t r = 0; r < X.rows; ++r) {
        auto v = apply(X.row(r));
        std::copy(v.begin(), v.end(), out.row(r).begin());
    }
    return out;
}

std::vector<double> apply_preprocessor(const Preprocessor& p, std::span<const double> x,
                                       const std::string& schemaVersion) {
    if (!schemaVersion.empty() && !p.schemaVersion.empty() && schemaVersion != p.schemaVersion) {
        throw SchemaError("preprocessor was fitted for schema " + p.schemaVersion + ", input has " + schemaVersion);
    }
    return p.apply(x);
}

json Preprocessor::to_json() const {
    return json{{"mode", mode_name(mode)}, {"inputDim", inputDim}, {"schemaVersion", schemaVersion},
                {"keptIndices", keptIndices}, {"means", means}, {"stds", stds}};
}

Preprocessor Preprocessor::from_json(const json& j) {
    try {
        Preprocessor p;
        p.mode = parse_mode(j.at("mode").get<std::string>());
        p.inputDim = j.at("inputDim").get<std::size_t>();
        p.schemaVersion = j.at("schemaVersion").get<std::string>();
        p.keptIndices = j.at("keptIndices").get<std::vector<std::size_t>>();
        p.means = j.at("means").get<std::vector<double>>();
        p.stds = j.at("stds").get<std::vector<double>>();
        const bool scaled = p.mode != PreprocessMode::Identity;
        if (std::any_of(p.keptIndices.begin(), p.keptIndices.end(), [&](std::size_t i) { return i >= p.inputDim; }) ||
            (scaled && (p.means.size() != p.keptIndices.size() || p.stds.size() != p.keptIndices.size())) ||
            std::any_of(p.stds.begin(), p.stds.end(), [](double s) { return !(s > 0.0); })) {
            throw SchemaError("inconsistent preprocessor");
        }
        return p;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed preprocessor: ") + e.what());
    }
}

} // namespace clickbait::features
