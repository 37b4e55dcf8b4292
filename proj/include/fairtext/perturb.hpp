#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairtext/lexicon.hpp"

namespace fairtext {

// One labeled text example. Derived (perturbed) instances carry provenance:
// the origin instance id, the operation that produced them, and a detail
// string such as "man->woman".
struct Instance {
    std::string id;
    std::string text;
    std::vector<std::string> tokens;  // tokenize(text), kept in sync
    int label = 0;                    // 1 = positive class
    std::string origin_id;
    std::string op;
    std::string detail;
};

// Lowercases, splits on whitespace, and peels leading/trailing ASCII
// punctuation characters off into their own single-character tokens.
// Interior punctuation (don't, african_american) is preserved.
std::vector<std::string> tokenize(const std::string& text);

// Joins with single spaces. Normalizing, not byte-preserving:
// tokenize(detokenize(t)) == t for any t produced by tokenize.
std::string detokenize(const std::vector<std::string>& tokens);

Instance make_instance(std::string id, const std::string& text, int label);

struct PerturbationConfig {
    double n_r = 0.5;
    double n_b = 0.1;
    double n_s = 0.1;
    std::uint64_t seed = 0;
    std::string placeholder_default = "IDENTITY_TOKEN";

    void validate() const;  // throws ValidationError
};

// The derived instances of one origin: counterfactual replacements,
// placeholder blindings, and pair swaps, each with what produced it.
struct PerturbationSet {
    std::string origin;
    std::vector<std::pair<IdentityPair, Instance>> replacements;
    std::vector<std::pair<std::string, Instance>> blinded;
    std::vector<std::pair<IdentityPair, Instance>> swapped;
};

// Directional replacement of every token equal to pair.first with
// pair.second; empty when the text does not contain pair.first.
std::optional<Instance> replace_pair(const Instance& x, const IdentityPair& pair);

// Every lexicon term occurrence replaced by its placeholder (placeholder_map
// entry when present, else the default). Always returns an instance, possibly
// an unchanged copy, so whole-corpus blinding is uniform.
Instance blind_instance(const Instance& x, const IdentityLexicon& lexicon,
                        const std::string& placeholder_default);

// Samples ceil(n_r * |pairs|) pairs without replacement, applies each sampled
// pair in both orientations, and emits one counterfactual per orientation
// that actually occurs in x. Deterministic: the generator is derived from
// (cfg.seed, x.id, op tag).
std::vector<std::pair<IdentityPair, Instance>> generate_ipr(
    const Instance& x, const IdentityLexicon& lexicon, const PerturbationConfig& cfg);

// Samples ceil(n_b * |terms|) identity terms; for each sampled term present
// in x, emits one instance with every occurrence blinded.
std::vector<std::pair<std::string, Instance>> generate_itb(
    const Instance& x, const IdentityLexicon& lexicon, const PerturbationConfig& cfg);

// Samples ceil(n_s * |pairs|) pairs; for each sampled pair with either member
// present in x, emits one instance with both members exchanged simultaneously.
std::vector<std::pair<IdentityPair, Instance>> generate_ips(
    const Instance& x, const IdentityLexicon& lexicon, const PerturbationConfig& cfg);

PerturbationSet generate_all(const Instance& x, const IdentityLexicon& lexicon,
                             const PerturbationConfig& cfg);

// Every combination of replacements across the distinct identity terms
// present in x (each term independently kept or replaced by any lexicon
// partner), deduplicated by token sequence, emitted in lexicographic order of
// the applied-substitution lists and truncated at cap.
std::vector<Instance> counterfactuals_all(const Instance& x,
                                          const IdentityLexicon& lexicon,
                                          std::size_t cap = 256);

// Dataset CSV: header "id,text,label" or the provenance form
// "id,text,label,origin_id,op,detail"; RFC 4180 quoting; leading '#' comment
// lines are skipped. Labels must be 0 or 1.
std::vector<Instance> load_dataset_csv(const std::string& path);
void save_dataset_csv(const std::vector<Instance>& instances, const std::string& path,
                      bool with_provenance, const std::vector<std::string>& comments = {});

}  // namespace fairtext
