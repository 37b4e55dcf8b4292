#include "fairtext/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "fairtext/errors.hpp"
#include "fairtext/simd.hpp"

namespace fairtext {

namespace {

constexpr std::size_t kParallelScanThreshold = 200000;
constexpr int kMaxDuplicateWarnings = 5;

struct Candidate {
    double score;
    std::uint32_t index;
};

// Ranking order: higher score first, lexicographically smaller token first on
// exact ties.
struct Better {
    const std::vector<std::string>& tokens;
    bool operator()(const Candidate& a, const Candidate& b) const {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return tokens[a.index] < tokens[b.index];
    }
};

// Keeps the k best candidates; worst of the kept set sits on top of the heap.
class TopKHeap {
  public:
    TopKHeap(std::size_t k, Better better) : k_(k), better_(better) {}

    void offer(Candidate c) {
        if (k_ == 0) {
            return;
        }
        if (heap_.size() < k_) {
            heap_.push_back(c);
            std::push_heap(heap_.begin(), heap_.end(), better_);
            return;
        }
        if (better_(c, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), better_);
            heap_.back() = c;
            std::push_heap(heap_.begin(), heap_.end(), better_);
        }
    }

    std::vector<Candidate> take_ranked() {
        std::sort(heap_.begin(), heap_.end(), better_);
        return std::move(heap_);
    }

    std::vector<Candidate>& raw() { return heap_; }

  private:
    std::size_t k_;
    Better better_;
    std::vector<Candidate> heap_;
};

}  // namespace

std::string lowercase_ascii(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c + ('a' - 'A'));
        }
    }
    return out;
}

void EmbeddingModel::finalize(const std::string& origin) {
    if (tokens_.empty()) {
        throw ValidationError(origin + ": no embedding vectors");
    }
    norms_.resize(tokens_.size());
    const auto& k = simd::kernels();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const float* r = matrix_.data() + i * dim_;
        const double sq = k.dot_f32(r, r, static_cast<std::size_t>(dim_));
        if (sq == 0.0) {
            throw ValidationError(origin + ": zero-norm vector for token '" +
                                  tokens_[i] + "'");
        }
        norms_[i] = std::sqrt(sq);
    }
}

EmbeddingModel EmbeddingModel::load(const std::string& path,
                                    std::optional<int> expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open embeddings file: " + path);
    }

    EmbeddingModel model;
    std::string line;
    std::size_t line_no = 0;
    int duplicate_warnings = 0;
    std::size_t duplicates = 0;
    std::vector<float> row;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const std::size_t token_end = line.find(' ');
        if (line.empty() || token_end == 0 || token_end == std::string::npos) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": malformed line (expected 'token c0 c1 ...')");
        }
        std::string token = lowercase_ascii(std::string_view(line).substr(0, token_end));

        row.clear();
        const char* p = line.data() + token_end;
        const char* end = line.data() + line.size();
        while (p != end) {
            while (p != end && *p == ' ') {
                ++p;
            }
            if (p == end) {
                break;
            }
            float value = 0.0f;
            auto [next, ec] = std::from_chars(p, end, value);
            if (ec != std::errc() || (next != end && *next != ' ')) {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": cannot parse vector component");
            }
            row.push_back(value);
            p = next;
        }
        if (row.empty()) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": line has no vector components");
        }

        if (model.dim_ == 0) {
            model.dim_ = static_cast<int>(row.size());
            if (expected_dim && *expected_dim != model.dim_) {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": dimension " + std::to_string(model.dim_) +
                                      " does not match expected " +
                                      std::to_string(*expected_dim));
            }
        } else if (static_cast<int>(row.size()) != model.dim_) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": dimension " + std::to_string(row.size()) +
                                  " differs from first line's " +
                                  std::to_string(model.dim_));
        }

        auto [it, inserted] =
            model.index_.try_emplace(token, static_cast<std::uint32_t>(model.tokens_.size()));
        if (!inserted) {
            ++duplicates;
            if (duplicate_warnings < kMaxDuplicateWarnings) {
                std::fprintf(stderr,
                             "[fairtext] %s:%zu: duplicate token '%s', keeping first\n",
                             path.c_str(), line_no, token.c_str());
                ++duplicate_warnings;
            }
            continue;
        }
        model.tokens_.push_back(std::move(token));
        model.matrix_.insert(model.matrix_.end(), row.begin(), row.end());
    }

    if (duplicates > static_cast<std::size_t>(kMaxDuplicateWarnings)) {
        std::fprintf(stderr, "[fairtext] %s: %zu duplicate tokens total\n",
                     path.c_str(), duplicates);
    }
    model.finalize(path);
    return model;
}

EmbeddingModel EmbeddingModel::from_rows(const std::vector<std::string>& tokens,
                                         const std::vector<std::vector<float>>& rows) {
    if (tokens.size() != rows.size()) {
        throw ValidationError("from_rows: token/row count mismatch");
    }
    EmbeddingModel model;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (model.dim_ == 0) {
            model.dim_ = static_cast<int>(rows[i].size());
        }
        if (rows[i].empty() || static_cast<int>(rows[i].size()) != model.dim_) {
            throw ValidationError("from_rows: inconsistent row dimension at index " +
                                  std::to_string(i));
        }
        std::string token = lowercase_ascii(tokens[i]);
        auto [it, inserted] =
            model.index_.try_emplace(token, static_cast<std::uint32_t>(model.tokens_.size()));
        if (!inserted) {
            throw ValidationError("from_rows: duplicate token '" + token + "'");
        }
        model.tokens_.push_back(std::move(token));
        model.matrix_.insert(model.matrix_.end(), rows[i].begin(), rows[i].end());
    }
    model.finalize("from_rows");
    return model;
}

bool EmbeddingModel::contains(std::string_view token) const {
    return index_.find(lowercase_ascii(token)) != index_.end();
}

std::optional<std::uint32_t> EmbeddingModel::index_of(std::string_view token) const {
    auto it = index_.find(lowercase_ascii(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::uint32_t EmbeddingModel::require(std::string_view token) const {
    auto it = index_.find(lowercase_ascii(token));
    if (it == index_.end()) {
        throw OovError(std::string(token));
    }
    return it->second;
}

double EmbeddingModel::cosine_rows(std::uint32_t i, std::uint32_t j) const {
    // Canonical argument order; dot and norm products commute bit-exactly
    // anyway, this just pins the expression.
    const std::uint32_t lo = std::min(i, j);
    const std::uint32_t hi = std::max(i, j);
    const double d = simd::kernels().dot_f32(row(lo).data(), row(hi).data(),
                                             static_cast<std::size_t>(dim_));
    return d / (norms_[lo] * norms_[hi]);
}

double EmbeddingModel::similarity(std::string_view a, std::string_view b) const {
    return cosine_rows(require(a), require(b));
}

std::vector<std::uint32_t> EmbeddingModel::top_k_indices(std::uint32_t query,
                                                         std::size_t k) const {
    const std::size_t n = size();
    k = std::min(k, n - 1);
    Better better{tokens_};
    const auto& kern = simd::kernels();
    const float* q = matrix_.data() + static_cast<std::size_t>(query) * dim_;
    const double qnorm = norms_[query];
    const std::size_t dim = static_cast<std::size_t>(dim_);

    auto scan = [&](std::size_t begin, std::size_t end, TopKHeap& heap) {
        for (std::size_t j = begin; j < end; ++j) {
            if (j == query) {
                continue;
            }
            const double d = kern.dot_f32(q, matrix_.data() + j * dim, dim);
            heap.offer({d / (qnorm * norms_[j]), static_cast<std::uint32_t>(j)});
        }
    };

    TopKHeap heap(k, better);
    const unsigned hw = std::thread::hardware_concurrency();
    if (n >= kParallelScanThreshold && hw > 1) {
        // Per-chunk selection then merge; selection under a total order is
        // independent of the partitioning.
        const std::size_t nchunks = std::min<std::size_t>(hw, 8);
        std::vector<TopKHeap> partial(nchunks, TopKHeap(k, better));
        std::vector<std::thread> workers;
        const std::size_t step = (n + nchunks - 1) / nchunks;
        for (std::size_t c = 0; c < nchunks; ++c) {
            const std::size_t begin = c * step;
            const std::size_t end = std::min(n, begin + step);
            workers.emplace_back([&, begin, end, c] { scan(begin, end, partial[c]); });
        }
        for (auto& w : workers) {
            w.join();
        }
        for (auto& p : partial) {
            for (const Candidate& c : p.raw()) {
                heap.offer(c);
            }
        }
    } else {
        scan(0, n, heap);
    }

    std::vector<Candidate> ranked = heap.take_ranked();
    std::vector<std::uint32_t> out;
    out.reserve(ranked.size());
    for (const Candidate& c : ranked) {
        out.push_back(c.index);
    }
    return out;
}

std::vector<Neighbor> EmbeddingModel::top_k_similar(std::string_view term,
                                                    std::size_t k) const {
    const std::uint32_t query = require(term);
    std::vector<Neighbor> out;
    for (std::uint32_t idx : top_k_indices(query, k)) {
        out.push_back({tokens_[idx], cosine_rows(query, idx)});
    }
    return out;
}

std::vector<Neighbor> EmbeddingModel::rank_against(
    std::span<const double> query, std::span<const std::uint32_t> exclude,
    std::size_t k) const {
    const std::size_t n = size();
    std::vector<std::uint32_t> excluded(exclude.begin(), exclude.end());
    std::sort(excluded.begin(), excluded.end());
    excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
    k = std::min(k, n - std::min(n, excluded.size()));
    const auto& kern = simd::kernels();
    const std::size_t dim = static_cast<std::size_t>(dim_);
    const double qnorm =
        std::sqrt(kern.dot_f64(query.data(), query.data(), query.size()));
    if (qnorm == 0.0) {
        throw ValidationError("query vector has zero norm");
    }
    TopKHeap heap(k, Better{tokens_});
    for (std::size_t j = 0; j < n; ++j) {
        if (std::binary_search(excluded.begin(), excluded.end(),
                               static_cast<std::uint32_t>(j))) {
            continue;
        }
        const double d = kern.dot_f32_f64(matrix_.data() + j * dim, query.data(), dim);
        heap.offer({d / (norms_[j] * qnorm), static_cast<std::uint32_t>(j)});
    }
    std::vector<Neighbor> out;
    for (const Candidate& c : heap.take_ranked()) {
        out.push_back({tokens_[c.index], c.score});
    }
    return out;
}

std::vector<Neighbor> EmbeddingModel::analogy_neighbors(std::string_view term1,
                                                        std::string_view term2,
                                                        std::string_view term1p,
                                                        std::size_t k) const {
    const std::uint32_t i1 = require(term1);
    const std::uint32_t i2 = require(term2);
    const std::uint32_t i1p = require(term1p);
    std::vector<double> q(static_cast<std::size_t>(dim_));
    const auto r1 = row(i1);
    const auto r2 = row(i2);
    const auto r1p = row(i1p);
    for (int c = 0; c < dim_; ++c) {
        q[c] = static_cast<double>(r2[c]) + static_cast<double>(r1p[c]) -
               static_cast<double>(r1[c]);
    }
    const std::uint32_t exclude[3] = {i1, i2, i1p};
    return rank_against(q, exclude, k);
}

}  // namespace fairtext
