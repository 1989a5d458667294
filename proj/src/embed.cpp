#include "clickbait/embed.hpp"

#include "clickbait/error.hpp"
#include "clickbait/transport.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace clickbait::embed {

bool EmbeddingTable::insert(const std::string& token, std::span<const double> vector) {
    if (vector.size() != dimension_) {
        throw ValidationError("embedding", "vector for '" + token + "' has wrong dimension");
    }
    auto [it, fresh] = index_.emplace(token, values_.size() / std::max<std::size_t>(dimension_, 1));
    if (fresh) {
        values_.resize(values_.size() + dimension_);
    }
    float* dst = values_.data() + it->second * dimension_;
    for (std::size_t k = 0; k < dimension_; ++k) {
        dst[k] = static_cast<float>(vector[k]);
    }
    return fresh;
}

std::span<const float> EmbeddingTable::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) {
        return {};
    }
    return {values_.data() + it->second * dimension_, dimension_};
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dimension) {
    if (dimension == 0) {
        throw ValidationError("dimension", "must be positive");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open embeddings " + path.string());
    }
    EmbeddingTable table(dimension);
    std::vector<double> vec(dimension);
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
        const char* p = line.data();
        const char* end = p + line.size();
        const char* tok_end = std::find_if(p, end, [](char c) { return c == ' ' || c == '\t'; });
        std::string token(p, tok_end);
        p = tok_end;
        std::size_t count = 0;
        while (true) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p == end) {
                break;
            }
            if (count == dimension) {
                throw ParseError("more than " + std::to_string(dimension) + " components", line_no);
            }
            double v = 0.0;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc() || (res.ptr < end && *res.ptr != ' ' && *res.ptr != '\t')) {
                throw ParseError("malformed number in embedding row", line_no);
            }
            vec[count++] = v;
            p = res.ptr;
        }
        if (count != dimension) {
            throw ParseError("expected " + std::to_string(dimension) + " components, found " +
                                 std::to_string(count),
                             line_no);
        }
        if (!table.insert(token, vec)) {
            ++table.duplicateCount;
        }
    }
    return table;
}

Vector sentence_vector(const nlp::TokenSeq& tokens, const EmbeddingTable& table) {
    const std::size_t dim = table.dimension();
    std::vector<std::span<const float>> rows;
    rows.reserve(tokens.size());
    for (const auto& t : tokens.tokens) {
        auto v = table.find(t);
        if (!v.empty()) {
            rows.push_back(v);
        }
    }
    Vector out(dim, 0.0);
    if (rows.empty()) {
        return out;
    }
    const std::size_t k = rows.size();
    std::vector<double> column(k);
    for (std::size_t d = 0; d < dim; ++d) {
        for (std::size_t r = 0; r < k; ++r) {
            column[r] = rows[r][d];
        }
        std::sort(column.begin(), column.end());
        out[d] = k % 2 ? column[k / 2] : 0.5 * (column[k / 2 - 1] + column[k / 2]);
    }
    return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw ValidationError("cosine", "vector lengths differ");
    }
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

double jaccard(const nlp::TokenSeq& a, const nlp::TokenSeq& b) {
    std::unordered_set<std::string> sa(a.tokens.begin(), a.tokens.end());
    std::unordered_set<std::string> sb(b.tokens.begin(), b.tokens.end());
    if (sa.empty() && sb.empty()) {
        return 0.0;
    }
    std::size_t inter = 0;
    for (const auto& t : sa) {
        inter += sb.count(t);
    }
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

NbowDoc nbow(const nlp::TokenSeq& tokens, const EmbeddingTable& table) {
    NbowDoc doc;
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    for (const auto& t : tokens.tokens) {
        if (!table.contains(t)) {
            continue;
        }
        auto [it, fresh] = slot.emplace(t, doc.uniqueTokens.size());
        if (fresh) {
            doc.uniqueTokens.push_back(t);
            counts.push_back(0);
        }
        ++counts[it->second];
        ++total;
    }
    doc.weights.reserve(counts.size());
    for (std::size_t c : counts) {
        doc.weights.push_back(static_cast<double>(c) / static_cast<double>(total));
    }
    return doc;
}

namespace {

double distance(std::span<const float> x, std::span<const float> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = static_cast<double>(x[k]) - static_cast<double>(y[k]);
        s += d * d;
    }
    return std::sqrt(s);
}

transport::CostMatrix cost_matrix(const NbowDoc& a, const NbowDoc& b, const EmbeddingTable& table) {
    transport::CostMatrix cost(a.uniqueTokens.size(), b.uniqueTokens.size());
    std::vector<std::span<const float>> bv;
    bv.reserve(b.uniqueTokens.size());
    for (const auto& t : b.uniqueTokens) {
        bv.push_back(table.find(t));
    }
    for (std::size_t i = 0; i < a.uniqueTokens.size(); ++i) {
        const auto av = table.find(a.uniqueTokens[i]);
        for (std::size_t j = 0; j < bv.size(); ++j) {
            cost(i, j) = distance(av, bv[j]);
        }
    }
    return cost;
}

double relaxed_bound(const NbowDoc& a, const NbowDoc& b, const transport::CostMatrix& cost) {
    double forward = 0.0;
    for (std::size_t i = 0; i < cost.rows; ++i) {
        double best = cost(i, 0);
        for (std::size_t j = 1; j < cost.cols; ++j) {
            best = std::min(best, cost(i, j));
        }
        forward += a.weights[i] * best;
    }
    double backward = 0.0;
    for (std::size_t j = 0; j < cost.cols; ++j) {
        double best = cost(0, j);
        for (std::size_t i = 1; i < cost.rows; ++i) {
            best = std::min(best, cost(i, j));
        }
        backward += b.weights[j] * best;
    }
    return std::max(forward, backward);
}

} // namespace

double token_distance(const EmbeddingTable& table, const std::string& a, const std::string& b) {
    auto x = table.find(a);
    auto y = table.find(b);
    if (x.empty() || y.empty()) {
        throw ValidationError("token", "out-of-vocabulary token");
    }
    return distance(x, y);
}

std::optional<double> wmd(const NbowDoc& a, const NbowDoc& b, const EmbeddingTable& table) {
    if (a.empty() || b.empty()) {
        return std::nullopt;
    }
    const auto cost = cost_matrix(a, b, table);
    return transport::solve(a.weights, b.weights, cost).cost;
}

std::optional<double> wmd_lower_bound(const NbowDoc& a, const NbowDoc& b, const EmbeddingTable& table) {
    if (a.empty() || b.empty()) {
        return std::nullopt;
    }
    return relaxed_bound(a, b, cost_matrix(a, b, table));
}

std::optional<double> wmd_prefiltered(const NbowDoc& a, const NbowDoc& b, const EmbeddingTable& table) {
    if (a.empty() || b.empty()) {
        return std::nullopt;
    }
    const auto cost = cost_matrix(a, b, table);
    const double lower = relaxed_bound(a, b, cost);
    const double upper = transport::greedy_upper_bound(a.weights, b.weights, cost);
    if (upper - lower <= 1e-12 * std::max(1.0, upper)) {
        return upper;
    }
    return transport::solve(a.weights, b.weights, cost).cost;
}

} // namespace clickbait::embed
