#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairtext/embedding.hpp"

namespace fairtext {

enum class PairSource { known, augmented, analogy_diagnostic };

const char* pair_source_name(PairSource source);
PairSource pair_source_from_name(const std::string& name);

struct IdentityPair {
    std::string first;
    std::string second;
    PairSource source = PairSource::known;
    // Admission score for augmented pairs (the set-overlap value that passed
    // the threshold); empty for known pairs.
    std::optional<double> score;
};

bool same_unordered(const IdentityPair& a, const IdentityPair& b);

// Ordered pair list plus optional per-term placeholder labels. Distinct terms
// are derived from the pairs on demand.
struct IdentityLexicon {
    std::vector<IdentityPair> pairs;
    std::map<std::string, std::string> placeholder_map;

    // Sorted distinct tokens appearing in any pair.
    std::vector<std::string> terms() const;
};

struct AugmentationConfig {
    double tau = 0.25;
    int top_k1 = 10;
    int top_k2 = 500;

    void validate() const;  // throws ValidationError
};

// Jaccard index of the two token sets; 0 when both are empty.
double jaccard(const std::vector<std::string>& s1, const std::vector<std::string>& s2);

struct AugmentStats {
    std::size_t known_kept = 0;
    std::size_t known_oov = 0;
    std::size_t candidates_examined = 0;
    std::size_t admitted = 0;
};

// Expand known identity pairs through embedding neighborhoods: for each known
// pair, candidate pairs are the cartesian product of the two terms' top_k1
// neighbor sets; a candidate is admitted when the Jaccard overlap of its
// members' top_k2 neighborhoods reaches tau. Known pairs are always carried
// into the output; augmented pairs are canonicalized (first < second) and
// sorted. OOV known terms are kept in the output but skipped for expansion,
// with a warning.
IdentityLexicon augment_pairs(const EmbeddingModel& model,
                              const std::vector<IdentityPair>& known,
                              const AugmentationConfig& cfg);
IdentityLexicon augment_pairs(const EmbeddingModel& model,
                              const std::vector<IdentityPair>& known,
                              const AugmentationConfig& cfg, AugmentStats* stats);

// The rejected analogy baseline, kept as a diagnostic: for each known pair
// (t1, t2) and each of t1's top_K neighbors t1', emits (t1', nearest token to
// w(t2) + w(t1') - w(t1)) with no overlap filter.
IdentityLexicon analogy_augment(const EmbeddingModel& model,
                                const std::vector<IdentityPair>& known, int top_k);

// Removes self-pairs, collapses unordered duplicates (canonical orientation
// for non-known pairs), and optionally merges pairs whose stemmed forms
// collide. On a merge the surviving pair is chosen by source priority
// (known first), then by better vocabulary frequency rank when rank_source is
// given, then lexicographically.
IdentityLexicon normalize_lexicon(const IdentityLexicon& lexicon, bool lemmatize,
                                  const EmbeddingModel* rank_source = nullptr);

// Deterministic suffix-stripping stemmer used for lemma dedup
// (plural -s/-es/-ies, -ing, -ed, plus an exception table).
std::string stem_token(const std::string& token);

// TSV persistence: "first<TAB>second<TAB>source<TAB>score" with a required
// header row; lines starting with '#' are metadata comments.
IdentityLexicon load_lexicon_tsv(const std::string& path);
void save_lexicon_tsv(const IdentityLexicon& lexicon, const std::string& path,
                      const std::vector<std::string>& comments = {});

// Placeholder map TSV: "term<TAB>placeholder" with a header row.
std::map<std::string, std::string> load_placeholder_tsv(const std::string& path);

// Content digest over pairs and placeholders, independent of file formatting.
std::uint64_t lexicon_hash(const IdentityLexicon& lexicon);

}  // namespace fairtext
