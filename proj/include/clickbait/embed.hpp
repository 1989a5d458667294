#pragma once

// Pretrained word vectors, median sentence vectors, similarity measures and
// Word Mover's Distance.

#include "clickbait/nlp.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace clickbait::embed {

class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return index_.size(); }

    /// Inserts or overwrites. Returns false when the token already existed.
    bool insert(const std::string& token, std::span<const double> vector);

    /// Vector of `token`, or an empty span when out of vocabulary.
    std::span<const float> find(const std::string& token) const;
    bool contains(const std::string& token) const { return index_.count(token) != 0; }

    /// Number of lines whose token had already been seen during load.
    std::size_t duplicateCount = 0;

private:
    std::size_t dimension_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<float> values_;
};

/// One entry per line: token then `dimension` whitespace-separated decimals.
/// Duplicate tokens: last wins, counted in duplicateCount.
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dimension = 50);

using Vector = std::vector<double>;

/// Per-dimension median over in-vocabulary tokens; zero vector when none.
Vector sentence_vector(const nlp::TokenSeq& tokens, const EmbeddingTable& table);

/// dot(u,v)/(|u||v|); 0 when either norm is zero.
double cosine(std::span<const double> u, std::span<const double> v);

/// |A ∩ B| / |A ∪ B| over token sets; 0 when both are empty.
double jaccard(const nlp::TokenSeq& a, const nlp::TokenSeq& b);

/// Normalised bag of words over in-vocabulary tokens, in first-seen order.
struct NbowDoc {
    std::vector<std::string> uniqueTokens;
    std::vector<double> weights;

    bool empty() const noexcept { return uniqueTokens.empty(); }
};

NbowDoc nbow(const nlp::TokenSeq& tokens, const EmbeddingTable& table);

/// Euclidean distance between the vectors of two in-vocabulary tokens.
double token_distance(const EmbeddingTable& table, const std::string& a, const std::string& b);

/// Exact WMD. Returns nullopt when either document is empty; the caller
/// substitutes its sentinel.
std::optional<double> wmd(const NbowDoc& a, const NbowDoc& b, const EmbeddingTable& table);

/// Relaxed WMD: every word ships all its mass to its nearest counterpart,
/// max over both directions. Never exceeds wmd().
std::optional<double> wmd_lower_bound(const NbowDoc& a, const NbowDoc& b, const EmbeddingTable& table);

/// Exact WMD, skipping the simplex when the relaxed bound already meets the
/// greedy upper bound.
std::optional<double> wmd_prefiltered(const NbowDoc& a, const NbowDoc& b, const EmbeddingTable& table);

} // namespace clickbait::embed
