#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fairtext {

struct Neighbor {
    std::string token;
    double score;
};

// Immutable vocabulary -> vector table with cached row norms, answering cosine
// similarity and top-k nearest-neighbor queries. Tokens are lowercased at load
// and at query. Safe for concurrent read-only use after construction.
//
// Scores are computed with the blocked dot-product kernels; rankings are total
// ordered by (score descending, token ascending), so every query is
// deterministic and the chunked scan matches a full brute-force sort.
class EmbeddingModel {
  public:
    // GloVe text format: one line per token, "token c0 c1 ... c{d-1}",
    // UTF-8, LF or CRLF. Duplicate tokens keep the first occurrence.
    static EmbeddingModel load(const std::string& path,
                               std::optional<int> expected_dim = std::nullopt);

    // Build directly from rows (test fixtures). Tokens are lowercased;
    // duplicates and zero-norm rows are rejected.
    static EmbeddingModel from_rows(const std::vector<std::string>& tokens,
                                    const std::vector<std::vector<float>>& rows);

    std::size_t size() const { return tokens_.size(); }
    int dim() const { return dim_; }

    bool contains(std::string_view token) const;
    // Index of the (lowercased) token, if present.
    std::optional<std::uint32_t> index_of(std::string_view token) const;
    const std::string& token(std::uint32_t index) const { return tokens_[index]; }
    std::span<const float> row(std::uint32_t index) const {
        return {matrix_.data() + static_cast<std::size_t>(index) * dim_,
                static_cast<std::size_t>(dim_)};
    }
    double norm(std::uint32_t index) const { return norms_[index]; }

    // Cosine of the two tokens' vectors. Throws OovError for unknown tokens.
    double similarity(std::string_view a, std::string_view b) const;
    double cosine_rows(std::uint32_t i, std::uint32_t j) const;

    // Top-k most similar tokens, query term excluded, clamped to vocab-1
    // entries. Ties broken by ascending token order.
    std::vector<Neighbor> top_k_similar(std::string_view term, std::size_t k) const;

    // Top-k tokens nearest to w(term2) + w(term1p) - w(term1), excluding the
    // three input tokens.
    std::vector<Neighbor> analogy_neighbors(std::string_view term1,
                                            std::string_view term2,
                                            std::string_view term1p,
                                            std::size_t k) const;

    // Index-level variants used by the lexicon builder and by oracle tests.
    std::vector<std::uint32_t> top_k_indices(std::uint32_t query, std::size_t k) const;
    std::vector<Neighbor> rank_against(std::span<const double> query,
                                       std::span<const std::uint32_t> exclude,
                                       std::size_t k) const;

  private:
    EmbeddingModel() = default;
    void finalize(const std::string& origin);
    std::uint32_t require(std::string_view token) const;

    int dim_ = 0;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<float> matrix_;  // size() * dim_, row-major
    std::vector<double> norms_;
};

std::string lowercase_ascii(std::string_view text);

}  // namespace fairtext
