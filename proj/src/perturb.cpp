#include "fairtext/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fairtext/errors.hpp"
#include "fairtext/io.hpp"
#include "fairtext/rng.hpp"

namespace fairtext {

namespace {

bool is_ascii_punct(char c) {
    const unsigned char u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u) != 0;
}

std::size_t sample_count(double fraction, std::size_t universe) {
    if (fraction <= 0.0 || universe == 0) {
        return 0;
    }
    const double raw = fraction * static_cast<double>(universe);
    auto count = static_cast<std::size_t>(raw);
    if (static_cast<double>(count) < raw) {
        ++count;  // ceiling: a nonzero fraction always samples something
    }
    return std::min(count, universe);
}

std::string resolve_placeholder(const IdentityLexicon& lexicon, const std::string& term,
                                const std::string& placeholder_default) {
    auto it = lexicon.placeholder_map.find(term);
    const std::string& raw = it != lexicon.placeholder_map.end() ? it->second
                                                                 : placeholder_default;
    // Placeholders live in token sequences, which are lowercase by contract.
    return lowercase_ascii(raw);
}

Instance derive(const Instance& x, std::vector<std::string> tokens, std::string op,
                std::string detail) {
    Instance d;
    d.id = x.id + "/" + op.substr(0, 1) + "/" + detail;
    d.text = detokenize(tokens);
    d.tokens = std::move(tokens);
    d.label = x.label;
    d.origin_id = x.id;
    d.op = std::move(op);
    d.detail = std::move(detail);
    return d;
}

bool occurs(const Instance& x, const std::string& token) {
    return std::find(x.tokens.begin(), x.tokens.end(), token) != x.tokens.end();
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    const std::string lower = lowercase_ascii(text);
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = lower.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(lower[i]))) {
            ++i;
        }
        if (i >= n) {
            break;
        }
        std::size_t j = i;
        while (j < n && !std::isspace(static_cast<unsigned char>(lower[j]))) {
            ++j;
        }
        // Peel edge punctuation into single-character tokens.
        std::size_t lo = i, hi = j;
        std::vector<std::string> trailing;
        while (lo < hi && is_ascii_punct(lower[lo])) {
            out.emplace_back(1, lower[lo]);
            ++lo;
        }
        while (hi > lo && is_ascii_punct(lower[hi - 1])) {
            trailing.emplace_back(1, lower[hi - 1]);
            --hi;
        }
        if (hi > lo) {
            out.emplace_back(lower.substr(lo, hi - lo));
        }
        out.insert(out.end(), trailing.rbegin(), trailing.rend());
        i = j;
    }
    return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i != 0) {
            out += ' ';
        }
        out += tokens[i];
    }
    return out;
}

Instance make_instance(std::string id, const std::string& text, int label) {
    if (label != 0 && label != 1) {
        throw ValidationError("label must be 0 or 1, got " + std::to_string(label));
    }
    Instance x;
    x.id = std::move(id);
    x.text = text;
    x.tokens = tokenize(text);
    x.label = label;
    return x;
}

void PerturbationConfig::validate() const {
    auto check = [](double f, const char* name) {
        if (!(f >= 0.0) || f > 1.0) {
            throw ValidationError(std::string(name) + " must lie in [0, 1]");
        }
    };
    check(n_r, "n_r");
    check(n_b, "n_b");
    check(n_s, "n_s");
    if (placeholder_default.empty()) {
        throw ValidationError("placeholder_default must be nonempty");
    }
}

std::optional<Instance> replace_pair(const Instance& x, const IdentityPair& pair) {
    if (!occurs(x, pair.first)) {
        return std::nullopt;
    }
    std::vector<std::string> tokens = x.tokens;
    for (std::string& t : tokens) {
        if (t == pair.first) {
            t = pair.second;
        }
    }
    return derive(x, std::move(tokens), "replace", pair.first + "->" + pair.second);
}

Instance blind_instance(const Instance& x, const IdentityLexicon& lexicon,
                        const std::string& placeholder_default) {
    std::unordered_map<std::string, std::string> subst;
    for (const std::string& term : lexicon.terms()) {
        subst.emplace(term, resolve_placeholder(lexicon, term, placeholder_default));
    }
    std::vector<std::string> tokens = x.tokens;
    bool changed = false;
    for (std::string& t : tokens) {
        auto it = subst.find(t);
        if (it != subst.end() && it->second != t) {
            t = it->second;
            changed = true;
        }
    }
    if (!changed) {
        return x;
    }
    return derive(x, std::move(tokens), "blind", "all");
}

std::vector<std::pair<IdentityPair, Instance>> generate_ipr(
    const Instance& x, const IdentityLexicon& lexicon, const PerturbationConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<IdentityPair, Instance>> out;
    const std::size_t count = sample_count(cfg.n_r, lexicon.pairs.size());
    if (count == 0) {
        return out;
    }
    DetRng rng(derive_seed(cfg.seed, "ipr:" + x.id));
    for (std::size_t idx : rng.sample_without_replacement(lexicon.pairs.size(), count)) {
        const IdentityPair& p = lexicon.pairs[idx];
        if (auto fwd = replace_pair(x, p)) {
            out.emplace_back(p, std::move(*fwd));
        }
        const IdentityPair rev{p.second, p.first, p.source, p.score};
        if (auto bwd = replace_pair(x, rev)) {
            out.emplace_back(rev, std::move(*bwd));
        }
    }
    return out;
}

std::vector<std::pair<std::string, Instance>> generate_itb(
    const Instance& x, const IdentityLexicon& lexicon, const PerturbationConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<std::string, Instance>> out;
    const std::vector<std::string> terms = lexicon.terms();
    const std::size_t count = sample_count(cfg.n_b, terms.size());
    if (count == 0) {
        return out;
    }
    DetRng rng(derive_seed(cfg.seed, "itb:" + x.id));
    for (std::size_t idx : rng.sample_without_replacement(terms.size(), count)) {
        const std::string& term = terms[idx];
        if (!occurs(x, term)) {
            continue;
        }
        const std::string placeholder =
            resolve_placeholder(lexicon, term, cfg.placeholder_default);
        if (placeholder == term) {
            std::fprintf(stderr,
                         "[fairtext] placeholder for '%s' equals the term itself; "
                         "cannot blind\n",
                         term.c_str());
            continue;
        }
        std::vector<std::string> tokens = x.tokens;
        for (std::string& t : tokens) {
            if (t == term) {
                t = placeholder;
            }
        }
        out.emplace_back(term, derive(x, std::move(tokens), "blind",
                                      term + "->" + placeholder));
    }
    return out;
}

std::vector<std::pair<IdentityPair, Instance>> generate_ips(
    const Instance& x, const IdentityLexicon& lexicon, const PerturbationConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<IdentityPair, Instance>> out;
    const std::size_t count = sample_count(cfg.n_s, lexicon.pairs.size());
    if (count == 0) {
        return out;
    }
    DetRng rng(derive_seed(cfg.seed, "ips:" + x.id));
    for (std::size_t idx : rng.sample_without_replacement(lexicon.pairs.size(), count)) {
        const IdentityPair& p = lexicon.pairs[idx];
        if (!occurs(x, p.first) && !occurs(x, p.second)) {
            continue;
        }
        std::vector<std::string> tokens = x.tokens;
        for (std::string& t : tokens) {
            if (t == p.first) {
                t = p.second;
            } else if (t == p.second) {
                t = p.first;
            }
        }
        out.emplace_back(p, derive(x, std::move(tokens), "swap",
                                   p.first + "<->" + p.second));
    }
    return out;
}

PerturbationSet generate_all(const Instance& x, const IdentityLexicon& lexicon,
                             const PerturbationConfig& cfg) {
    PerturbationSet set;
    set.origin = x.id;
    set.replacements = generate_ipr(x, lexicon, cfg);
    set.blinded = generate_itb(x, lexicon, cfg);
    set.swapped = generate_ips(x, lexicon, cfg);
    return set;
}

namespace {

struct CfState {
    const Instance* x;
    std::vector<std::string> terms;                  // distinct present terms, sorted
    std::vector<std::vector<std::string>> partners;  // per term, sorted
    std::size_t cap;
    std::vector<std::pair<std::size_t, std::string>> applied;
    std::set<std::vector<std::string>> seen;
    std::vector<Instance> out;

    void emit() {
        std::vector<std::string> tokens;
        tokens.reserve(x->tokens.size());
        for (const std::string& t : x->tokens) {
            const std::string* repl = &t;
            for (const auto& [idx, r] : applied) {
                if (t == terms[idx]) {
                    repl = &r;
                    break;
                }
            }
            tokens.push_back(*repl);
        }
        if (!seen.insert(tokens).second) {
            return;
        }
        std::string detail;
        for (const auto& [idx, r] : applied) {
            if (!detail.empty()) {
                detail += ',';
            }
            detail += terms[idx] + "->" + r;
        }
        out.push_back(derive(*x, std::move(tokens), "counterfactual", detail));
    }

    // Emits the applied-substitution lists in lexicographic order: extending
    // the current list with term index j comes before any extension with a
    // later term, and a list precedes all of its own extensions.
    bool dfs(std::size_t from) {
        for (std::size_t j = from; j < terms.size(); ++j) {
            for (const std::string& r : partners[j]) {
                applied.emplace_back(j, r);
                emit();
                if (out.size() >= cap || dfs(j + 1)) {
                    applied.pop_back();
                    return true;
                }
                applied.pop_back();
            }
        }
        return false;
    }
};

}  // namespace

std::vector<Instance> counterfactuals_all(const Instance& x,
                                          const IdentityLexicon& lexicon,
                                          std::size_t cap) {
    if (cap == 0) {
        return {};
    }
    std::map<std::string, std::set<std::string>> partner_map;
    for (const IdentityPair& p : lexicon.pairs) {
        partner_map[p.first].insert(p.second);
        partner_map[p.second].insert(p.first);
    }
    CfState state;
    state.x = &x;
    state.cap = cap;
    std::set<std::string> present;
    for (const std::string& t : x.tokens) {
        if (partner_map.count(t) != 0) {
            present.insert(t);
        }
    }
    for (const std::string& t : present) {
        const std::set<std::string>& partners = partner_map[t];
        std::vector<std::string> list(partners.begin(), partners.end());
        list.erase(std::remove(list.begin(), list.end(), t), list.end());
        if (list.empty()) {
            continue;
        }
        state.terms.push_back(t);
        state.partners.push_back(std::move(list));
    }
    state.seen.insert(x.tokens);  // never emit the unperturbed sequence
    state.dfs(0);
    return std::move(state.out);
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& content,
                                                const std::string& origin,
                                                std::vector<std::size_t>* record_lines) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool record_open = false;
    std::size_t line_no = 1;
    std::size_t record_line = 1;

    const std::size_t n = content.size();
    std::size_t i = 0;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        if (record_lines != nullptr) {
            record_lines->push_back(record_line);
        }
        record.clear();
        record_open = false;
    };
    while (i < n) {
        const char c = content[i];
        if (!record_open && !in_quotes) {
            if (c == '#') {  // comment line
                while (i < n && content[i] != '\n') {
                    ++i;
                }
                if (i < n) {
                    ++i;
                    ++line_no;
                }
                continue;
            }
            if (c == '\n') {  // blank line
                ++i;
                ++line_no;
                continue;
            }
            if (c == '\r' && i + 1 < n && content[i + 1] == '\n') {
                i += 2;
                ++line_no;
                continue;
            }
            record_open = true;
            record_line = line_no;
        }
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && content[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                if (c == '\n') {
                    ++line_no;
                }
                field += c;
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) {
                    throw ValidationError(origin + ":" + std::to_string(line_no) +
                                          ": quote inside unquoted field");
                }
                in_quotes = true;
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 < n && content[i + 1] == '\n') {
                    end_record();
                    i += 2;
                    ++line_no;
                } else {
                    field += c;
                    ++i;
                }
                break;
            case '\n':
                end_record();
                ++i;
                ++line_no;
                break;
            default:
                field += c;
                ++i;
                break;
        }
    }
    if (in_quotes) {
        throw ValidationError(origin + ": unterminated quoted field");
    }
    if (record_open) {
        end_record();  // final record without trailing newline
    }
    return records;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

}  // namespace

std::vector<Instance> load_dataset_csv(const std::string& path) {
    const std::string content = read_file(path);
    std::vector<std::size_t> record_lines;
    const auto records = parse_csv(content, path, &record_lines);
    if (records.empty()) {
        throw ValidationError(path + ": empty dataset");
    }
    const std::vector<std::string>& header = records[0];
    bool provenance = false;
    if (header == std::vector<std::string>{"id", "text", "label"}) {
        provenance = false;
    } else if (header == std::vector<std::string>{"id", "text", "label", "origin_id",
                                                  "op", "detail"}) {
        provenance = true;
    } else {
        throw ValidationError(path + ": expected header 'id,text,label[,origin_id,op,detail]'");
    }
    std::vector<Instance> out;
    std::unordered_set<std::string> ids;
    std::size_t duplicate_ids = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& row = records[r];
        const std::string where = path + ":" + std::to_string(record_lines[r]);
        if (row.size() != header.size()) {
            throw ValidationError(where + ": expected " +
                                  std::to_string(header.size()) + " columns, got " +
                                  std::to_string(row.size()));
        }
        if (row[0].empty()) {
            throw ValidationError(where + ": empty id");
        }
        if (row[2] != "0" && row[2] != "1") {
            throw ValidationError(where + ": label must be 0 or 1, got '" + row[2] + "'");
        }
        Instance x = make_instance(row[0], row[1], row[2] == "1" ? 1 : 0);
        if (provenance) {
            x.origin_id = row[3];
            x.op = row[4];
            x.detail = row[5];
        }
        if (!ids.insert(x.id).second) {
            ++duplicate_ids;
        }
        out.push_back(std::move(x));
    }
    if (duplicate_ids != 0) {
        std::fprintf(stderr, "[fairtext] %s: %zu duplicate instance ids\n", path.c_str(),
                     duplicate_ids);
    }
    return out;
}

void save_dataset_csv(const std::vector<Instance>& instances, const std::string& path,
                      bool with_provenance, const std::vector<std::string>& comments) {
    std::ostringstream body;
    for (const std::string& c : comments) {
        body << "# " << c << "\n";
    }
    body << (with_provenance ? "id,text,label,origin_id,op,detail" : "id,text,label")
         << "\n";
    for (const Instance& x : instances) {
        body << csv_escape(x.id) << ',' << csv_escape(x.text) << ',' << x.label;
        if (with_provenance) {
            body << ',' << csv_escape(x.origin_id) << ',' << csv_escape(x.op) << ','
                 << csv_escape(x.detail);
        }
        body << '\n';
    }
    write_file_atomic(path, body.str());
}

}  // namespace fairtext
