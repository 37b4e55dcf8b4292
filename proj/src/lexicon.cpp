#include "fairtext/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "fairtext/errors.hpp"
#include "fairtext/hash.hpp"
#include "fairtext/io.hpp"

namespace fairtext {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

using UnorderedKey = std::pair<std::string, std::string>;

UnorderedKey unordered_key(const IdentityPair& p) {
    return p.first <= p.second ? UnorderedKey{p.first, p.second}
                               : UnorderedKey{p.second, p.first};
}

int source_priority(PairSource s) {
    switch (s) {
        case PairSource::known: return 0;
        case PairSource::augmented: return 1;
        case PairSource::analogy_diagnostic: return 2;
    }
    return 3;
}

std::size_t intersection_size(const std::vector<std::uint32_t>& a,
                              const std::vector<std::uint32_t>& b) {
    std::size_t i = 0, j = 0, count = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

double jaccard_indices(const std::vector<std::uint32_t>& a,
                       const std::vector<std::uint32_t>& b) {
    if (a.empty() && b.empty()) {
        return 0.0;
    }
    const std::size_t inter = intersection_size(a, b);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

const char* pair_source_name(PairSource source) {
    switch (source) {
        case PairSource::known: return "known";
        case PairSource::augmented: return "augmented";
        case PairSource::analogy_diagnostic: return "analogy_diagnostic";
    }
    return "unknown";
}

PairSource pair_source_from_name(const std::string& name) {
    if (name == "known") {
        return PairSource::known;
    }
    if (name == "augmented") {
        return PairSource::augmented;
    }
    if (name == "analogy_diagnostic") {
        return PairSource::analogy_diagnostic;
    }
    throw ValidationError("unknown pair source: '" + name + "'");
}

bool same_unordered(const IdentityPair& a, const IdentityPair& b) {
    return unordered_key(a) == unordered_key(b);
}

std::vector<std::string> IdentityLexicon::terms() const {
    std::set<std::string> s;
    for (const IdentityPair& p : pairs) {
        s.insert(p.first);
        s.insert(p.second);
    }
    return {s.begin(), s.end()};
}

void AugmentationConfig::validate() const {
    if (!(tau > 0.0) || tau > 1.0) {
        throw ValidationError("tau must lie in (0, 1], got " + format_double(tau));
    }
    if (top_k1 < 1 || top_k2 < 1) {
        throw ValidationError("top_k1 and top_k2 must be positive");
    }
    if (top_k2 < top_k1) {
        std::fprintf(stderr,
                     "[fairtext] top_k2 (%d) < top_k1 (%d); overlap check will be "
                     "coarser than the candidate pool\n",
                     top_k2, top_k1);
    }
}

double jaccard(const std::vector<std::string>& s1, const std::vector<std::string>& s2) {
    std::vector<std::string> a(s1), b(s2);
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    if (a.empty() && b.empty()) {
        return 0.0;
    }
    std::size_t i = 0, j = 0, inter = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

// Sorted top_k2 neighborhood per queried term, computed once and shared.
class NeighborhoodCache {
  public:
    NeighborhoodCache(const EmbeddingModel& model, int k) : model_(model), k_(k) {}

    void prepare(const std::vector<std::uint32_t>& terms) {
        std::vector<std::uint32_t> missing;
        for (std::uint32_t t : terms) {
            if (cache_.find(t) == cache_.end()) {
                missing.push_back(t);
            }
        }
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        if (missing.empty()) {
            return;
        }
        std::vector<std::vector<std::uint32_t>> results(missing.size());
        const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        const std::size_t nworkers = std::min<std::size_t>(hw, missing.size());
        if (nworkers > 1) {
            std::vector<std::thread> workers;
            for (std::size_t w = 0; w < nworkers; ++w) {
                workers.emplace_back([&, w] {
                    for (std::size_t i = w; i < missing.size(); i += nworkers) {
                        results[i] = compute(missing[i]);
                    }
                });
            }
            for (auto& t : workers) {
                t.join();
            }
        } else {
            for (std::size_t i = 0; i < missing.size(); ++i) {
                results[i] = compute(missing[i]);
            }
        }
        for (std::size_t i = 0; i < missing.size(); ++i) {
            cache_.emplace(missing[i], std::move(results[i]));
        }
    }

    const std::vector<std::uint32_t>& get(std::uint32_t term) {
        auto it = cache_.find(term);
        if (it == cache_.end()) {
            it = cache_.emplace(term, compute(term)).first;
        }
        return it->second;
    }

  private:
    std::vector<std::uint32_t> compute(std::uint32_t term) const {
        std::vector<std::uint32_t> n =
            model_.top_k_indices(term, static_cast<std::size_t>(k_));
        std::sort(n.begin(), n.end());
        return n;
    }

    const EmbeddingModel& model_;
    int k_;
    std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> cache_;
};

}  // namespace detail

IdentityLexicon augment_pairs(const EmbeddingModel& model,
                              const std::vector<IdentityPair>& known,
                              const AugmentationConfig& cfg, AugmentStats* stats) {
    cfg.validate();

    IdentityLexicon out;
    std::set<UnorderedKey> present;

    // Line 1: the output starts as the (normalized) known set.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> expandable;
    for (const IdentityPair& given : known) {
        IdentityPair p = given;
        p.first = lowercase_ascii(p.first);
        p.second = lowercase_ascii(p.second);
        if (p.first.empty() || p.second.empty() || p.first == p.second) {
            std::fprintf(stderr, "[fairtext] skipping degenerate known pair (%s, %s)\n",
                         p.first.c_str(), p.second.c_str());
            continue;
        }
        if (!present.insert(unordered_key(p)).second) {
            continue;
        }
        const auto i1 = model.index_of(p.first);
        const auto i2 = model.index_of(p.second);
        if (i1 && i2) {
            expandable.emplace_back(*i1, *i2);
        } else {
            std::fprintf(stderr,
                         "[fairtext] known pair (%s, %s) has out-of-vocabulary "
                         "terms; kept but not expanded\n",
                         p.first.c_str(), p.second.c_str());
            if (stats != nullptr) {
                ++stats->known_oov;
            }
        }
        out.pairs.push_back(std::move(p));
    }
    if (stats != nullptr) {
        stats->known_kept = out.pairs.size();
    }

    detail::NeighborhoodCache cache(model, cfg.top_k2);

    // Candidate pools: cartesian products of top_k1 neighbor sets.
    std::vector<std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>> pools;
    std::vector<std::uint32_t> needed;
    for (const auto& [i1, i2] : expandable) {
        auto n1 = model.top_k_indices(i1, static_cast<std::size_t>(cfg.top_k1));
        auto n2 = model.top_k_indices(i2, static_cast<std::size_t>(cfg.top_k1));
        needed.insert(needed.end(), n1.begin(), n1.end());
        needed.insert(needed.end(), n2.begin(), n2.end());
        pools.emplace_back(std::move(n1), std::move(n2));
    }
    cache.prepare(needed);

    std::map<UnorderedKey, double> admitted;
    std::map<UnorderedKey, double> evaluated;
    for (const auto& [n1, n2] : pools) {
        for (std::uint32_t j1 : n1) {
            for (std::uint32_t j2 : n2) {
                if (j1 == j2) {
                    continue;
                }
                IdentityPair cand{model.token(j1), model.token(j2),
                                  PairSource::augmented, std::nullopt};
                const UnorderedKey key = unordered_key(cand);
                if (stats != nullptr) {
                    ++stats->candidates_examined;
                }
                if (present.count(key) != 0 || admitted.count(key) != 0) {
                    continue;  // set semantics: kept once
                }
                double psi;
                auto seen = evaluated.find(key);
                if (seen != evaluated.end()) {
                    psi = seen->second;
                } else {
                    psi = jaccard_indices(cache.get(j1), cache.get(j2));
                    evaluated.emplace(key, psi);
                }
                if (psi >= cfg.tau) {
                    admitted.emplace(key, psi);
                }
            }
        }
    }

    for (const auto& [key, psi] : admitted) {
        out.pairs.push_back(IdentityPair{key.first, key.second, PairSource::augmented, psi});
    }
    if (stats != nullptr) {
        stats->admitted = admitted.size();
    }
    return out;
}

IdentityLexicon augment_pairs(const EmbeddingModel& model,
                              const std::vector<IdentityPair>& known,
                              const AugmentationConfig& cfg) {
    return augment_pairs(model, known, cfg, nullptr);
}

IdentityLexicon analogy_augment(const EmbeddingModel& model,
                                const std::vector<IdentityPair>& known, int top_k) {
    if (top_k < 0) {
        throw ValidationError("analogy top_k must be nonnegative");
    }
    IdentityLexicon out;
    if (top_k == 0) {
        return out;
    }
    std::set<UnorderedKey> present;
    for (const IdentityPair& given : known) {
        const std::string t1 = lowercase_ascii(given.first);
        const std::string t2 = lowercase_ascii(given.second);
        if (!model.contains(t1) || !model.contains(t2)) {
            std::fprintf(stderr,
                         "[fairtext] known pair (%s, %s) has out-of-vocabulary "
                         "terms; skipped for analogy expansion\n",
                         t1.c_str(), t2.c_str());
            continue;
        }
        for (const Neighbor& n : model.top_k_similar(t1, static_cast<std::size_t>(top_k))) {
            const auto hits = model.analogy_neighbors(t1, t2, n.token, 1);
            if (hits.empty()) {
                continue;
            }
            IdentityPair p{n.token, hits[0].token, PairSource::analogy_diagnostic,
                           hits[0].score};
            if (p.first == p.second) {
                continue;
            }
            if (present.insert(unordered_key(p)).second) {
                out.pairs.push_back(std::move(p));
            }
        }
    }
    return out;
}

std::string stem_token(const std::string& token) {
    static const std::unordered_map<std::string, std::string> exceptions = {
        {"men", "man"},       {"women", "woman"}, {"children", "child"},
        {"people", "person"}, {"wives", "wife"},  {"feet", "foot"},
        {"teeth", "tooth"},   {"mice", "mouse"},
    };
    auto ex = exceptions.find(token);
    if (ex != exceptions.end()) {
        return ex->second;
    }
    const std::size_t n = token.size();
    auto ends_with = [&](std::string_view suffix) {
        return n >= suffix.size() &&
               token.compare(n - suffix.size(), suffix.size(), suffix) == 0;
    };
    auto collapse_double = [](std::string s) {
        const std::size_t m = s.size();
        if (m >= 3 && s[m - 1] == s[m - 2] && s[m - 1] != 'l' && s[m - 1] != 's') {
            s.pop_back();
        }
        return s;
    };
    if (ends_with("ies") && n > 4) {
        return token.substr(0, n - 3) + "y";
    }
    if (ends_with("sses")) {
        return token.substr(0, n - 2);
    }
    if (ends_with("shes") || ends_with("ches") || ends_with("xes") || ends_with("zes")) {
        return token.substr(0, n - 2);
    }
    if (ends_with("s") && !ends_with("ss") && !ends_with("us") && !ends_with("is") &&
        n > 3) {
        return token.substr(0, n - 1);
    }
    if (ends_with("ing") && n >= 6) {
        return collapse_double(token.substr(0, n - 3));
    }
    if (ends_with("ed") && n >= 5) {
        return collapse_double(token.substr(0, n - 2));
    }
    return token;
}

IdentityLexicon normalize_lexicon(const IdentityLexicon& lexicon, bool lemmatize,
                                  const EmbeddingModel* rank_source) {
    struct Entry {
        IdentityPair pair;
        std::size_t position;
    };
    auto rank_of = [&](const std::string& token) -> std::size_t {
        if (rank_source == nullptr) {
            return 0;
        }
        const auto idx = rank_source->index_of(token);
        return idx ? static_cast<std::size_t>(*idx) : rank_source->size();
    };
    // Lower tuple wins a merge.
    auto merge_key = [&](const IdentityPair& p) {
        return std::tuple<int, std::size_t, std::string, std::string>(
            source_priority(p.source), rank_of(p.first) + rank_of(p.second), p.first,
            p.second);
    };

    std::vector<Entry> entries;
    std::set<UnorderedKey> seen;
    for (const IdentityPair& given : lexicon.pairs) {
        IdentityPair p = given;
        p.first = lowercase_ascii(p.first);
        p.second = lowercase_ascii(p.second);
        if (p.first.empty() || p.second.empty() || p.first == p.second) {
            continue;
        }
        if (p.source != PairSource::known && p.second < p.first) {
            std::swap(p.first, p.second);
        }
        if (!seen.insert(unordered_key(p)).second) {
            continue;
        }
        entries.push_back({std::move(p), entries.size()});
    }

    if (lemmatize) {
        std::map<UnorderedKey, std::size_t> best;  // stem key -> entries index
        for (std::size_t i = 0; i < entries.size(); ++i) {
            IdentityPair stemmed{stem_token(entries[i].pair.first),
                                 stem_token(entries[i].pair.second),
                                 entries[i].pair.source, std::nullopt};
            // A pair collapsing to a single lemma is form-redundant, drop it.
            if (stemmed.first == stemmed.second) {
                entries[i].position = SIZE_MAX;
                continue;
            }
            const UnorderedKey key = unordered_key(stemmed);
            auto [it, inserted] = best.emplace(key, i);
            if (!inserted) {
                std::size_t& winner = it->second;
                if (merge_key(entries[i].pair) < merge_key(entries[winner].pair)) {
                    entries[winner].position = SIZE_MAX;
                    winner = i;
                } else {
                    entries[i].position = SIZE_MAX;
                }
            }
        }
    }

    IdentityLexicon out;
    out.placeholder_map = lexicon.placeholder_map;
    for (const Entry& e : entries) {
        if (e.position != SIZE_MAX) {
            out.pairs.push_back(e.pair);
        }
    }
    return out;
}

IdentityLexicon load_lexicon_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open lexicon file: " + path);
    }
    IdentityLexicon out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    int width = 4;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const std::size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) {
                break;
            }
            start = tab + 1;
        }
        if (!header_seen) {
            if (cols.size() == 4 && cols[0] == "first" && cols[1] == "second" &&
                cols[2] == "source" && cols[3] == "score") {
                width = 4;
            } else if (cols.size() == 2 && cols[0] == "first" && cols[1] == "second") {
                width = 2;
            } else {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": expected header 'first\\tsecond[\\tsource\\tscore]'");
            }
            header_seen = true;
            continue;
        }
        if (static_cast<int>(cols.size()) != width) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected " + std::to_string(width) + " columns");
        }
        IdentityPair p;
        p.first = lowercase_ascii(cols[0]);
        p.second = lowercase_ascii(cols[1]);
        p.source = width == 4 ? pair_source_from_name(cols[2]) : PairSource::known;
        if (width == 4 && !cols[3].empty()) {
            double score = 0.0;
            auto [ptr, ec] =
                std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), score);
            if (ec != std::errc() || ptr != cols[3].data() + cols[3].size()) {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": cannot parse score '" + cols[3] + "'");
            }
            p.score = score;
        }
        if (p.first.empty() || p.second.empty()) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": empty identity term");
        }
        if (p.first == p.second) {
            std::fprintf(stderr, "[fairtext] %s:%zu: skipping self-pair (%s, %s)\n",
                         path.c_str(), line_no, p.first.c_str(), p.second.c_str());
            continue;
        }
        out.pairs.push_back(std::move(p));
    }
    if (!header_seen) {
        throw ValidationError(path + ": missing header row");
    }
    return out;
}

void save_lexicon_tsv(const IdentityLexicon& lexicon, const std::string& path,
                      const std::vector<std::string>& comments) {
    std::ostringstream body;
    for (const std::string& c : comments) {
        body << "# " << c << "\n";
    }
    body << "first\tsecond\tsource\tscore\n";
    for (const IdentityPair& p : lexicon.pairs) {
        body << p.first << '\t' << p.second << '\t' << pair_source_name(p.source)
             << '\t' << (p.score ? format_double(*p.score) : std::string()) << '\n';
    }
    write_file_atomic(path, body.str());
}

std::map<std::string, std::string> load_placeholder_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open placeholder file: " + path);
    }
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected two tab-separated columns");
        }
        const std::string a = line.substr(0, tab);
        const std::string b = line.substr(tab + 1);
        if (!header_seen) {
            if (a != "term" || b != "placeholder") {
                throw ValidationError(path + ": expected header 'term\\tplaceholder'");
            }
            header_seen = true;
            continue;
        }
        out[lowercase_ascii(a)] = lowercase_ascii(b);
    }
    if (!header_seen) {
        throw ValidationError(path + ": missing header row");
    }
    return out;
}

std::uint64_t lexicon_hash(const IdentityLexicon& lexicon) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const IdentityPair& p : lexicon.pairs) {
        h = fnv1a64(p.first, h);
        h = fnv1a64("\t", h);
        h = fnv1a64(p.second, h);
        h = fnv1a64("\t", h);
        h = fnv1a64(pair_source_name(p.source), h);
        h = fnv1a64("\t", h);
        h = fnv1a64(p.score ? format_double(*p.score) : "", h);
        h = fnv1a64("\n", h);
    }
    for (const auto& [term, ph] : lexicon.placeholder_map) {
        h = fnv1a64(term, h);
        h = fnv1a64("=", h);
        h = fnv1a64(ph, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

}  // namespace fairtext
