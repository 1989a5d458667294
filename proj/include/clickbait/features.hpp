#pragma once

// Per-instance feature assembly, the featurised dataset file format, and the
// pruning/standardisation preprocessor.

#include "clickbait/corpus.hpp"
#include "clickbait/embed.hpp"
#include "clickbait/matrix.hpp"
#include "clickbait/nlp.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace clickbait::features {

/// Text fields in block order: post, captions, description, keywords,
/// paragraphs, title.
enum class Field { Post, Captions, Description, Keywords, Paragraphs, Title };
inline constexpr std::size_t kFieldCount = 6;

std::string_view field_name(Field f);

struct FieldPair {
    Field first;
    Field second;
};

/// The nine post/title pairs used for WMD (first == post or title).
const std::vector<FieldPair>& wmd_pairs();
/// The nine pairs used for cosine similarity.
const std::vector<FieldPair>& cosine_pairs();

struct FeatureSchema {
    std::vector<std::string> names;
    std::size_t embeddingDim = 50;
    std::vector<std::string> tags;
    /// WMD feature name -> value used when either document is empty.
    std::map<std::string, double> sentinels;

    /// Stable identifier of the name list; sentinels are not part of it.
    std::string version() const;
    std::size_t size() const noexcept { return names.size(); }
    std::size_t index_of(const std::string& name) const;

    nlohmann::json to_json() const;
    static FeatureSchema from_json(const nlohmann::json& j);
};

FeatureSchema make_schema(std::size_t embeddingDim, const nlp::TagSet& tagset = nlp::TagSet::penn36());

struct Resources {
    const embed::EmbeddingTable& table;
    const nlp::Lexicons& lexicons;
    const nlp::TagSet& tagset;
    /// Use the relaxed-bound shortcut before the exact WMD solve.
    bool prefilter = true;
};

/// Feature values with the WMD slots of empty documents left unset.
struct RawFeatures {
    std::vector<double> values;
    std::vector<std::size_t> missingWmd; // indices into values
};

RawFeatures assemble_raw(const corpus::Instance& inst, const Resources& res, const FeatureSchema& schema);

/// Complete vector; empty-document WMDs take the schema sentinel (0 when the
/// schema has none for that feature).
std::vector<double> assemble(const corpus::Instance& inst, const Resources& res, const FeatureSchema& schema);

/// Featurised corpus: one row per instance plus identifying columns.
struct Dataset {
    FeatureSchema schema;
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<double> truthMeans;
    Matrix X;

    std::size_t size() const noexcept { return ids.size(); }
    Dataset subset(std::span<const std::size_t> rows) const;
};

using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// Assembles every row, then sets each WMD sentinel to the largest value
/// observed for that pair over the corpus and fills the empty slots with it.
/// Rows are assembled on `threads` workers (0 = hardware concurrency); the
/// result does not depend on the worker count.
Dataset featurize(const std::vector<corpus::LabeledInstance>& rows, const Resources& res,
                  FeatureSchema schema, const Progress& progress = {}, std::size_t threads = 0);

/// CSV with header "id,label,truthMean,<feature names>".
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);
/// Reads the CSV; the schema (with sentinels) comes from the JSON sidecar.
Dataset read_dataset(const std::filesystem::path& csvPath, const std::filesystem::path& schemaPath);
void write_schema_json(const std::filesystem::path& path, const FeatureSchema& schema);
FeatureSchema read_schema_json(const std::filesystem::path& path);
/// "<stem>.schema.json" next to the CSV.
std::filesystem::path schema_path_for(const std::filesystem::path& csvPath);

// --- preprocessing -------------------------------------------------------------

enum class PreprocessMode {
    Identity,             // keep everything, no scaling
    Standardize,          // keep everything, z-score (constant columns centred only)
    PruneAndStandardize,  // drop sparse and correlated columns, then z-score
};

std::string_view mode_name(PreprocessMode m);
PreprocessMode parse_mode(std::string_view name);

struct Preprocessor {
    PreprocessMode mode = PreprocessMode::Identity;
    std::size_t inputDim = 0;
    std::string schemaVersion;
    std::vector<std::size_t> keptIndices;
    std::vector<double> means;
    std::vector<double> stds;

    std::size_t outputDim() const noexcept { return keptIndices.size(); }

    std::vector<double> apply(std::span<const double> x) const;
    Matrix apply(const Matrix& X) const;

    nlohmann::json to_json() const;
    static Preprocessor from_json(const nlohmann::json& j);
};

inline constexpr double kMaxZeroFraction = 0.90;
inline constexpr double kMaxAbsCorrelation = 0.90;

Preprocessor fit_preprocessor(const Matrix& X, PreprocessMode mode, std::string schemaVersion = {});

/// forLinearModel selects PruneAndStandardize, otherwise Identity.
Preprocessor fit_preprocessor(const Matrix& X, bool forLinearModel, std::string schemaVersion = {});

std::vector<double> apply_preprocessor(const Preprocessor& p, std::span<const double> x,
                                       const std::string& schemaVersion = {});

double pearson(const Matrix& X, std::size_t a, std::size_t b);

} // namespace clickbait::features
