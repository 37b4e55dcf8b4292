#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fairtext/errors.hpp"
#include "fairtext/io.hpp"
#include "fairtext/perturb.hpp"
#include "fairtext/rng.hpp"

using namespace fairtext;

namespace {

IdentityLexicon gender_lexicon() {
    IdentityLexicon lex;
    lex.pairs = {
        {"man", "woman", PairSource::known, std::nullopt},
        {"he", "she", PairSource::known, std::nullopt},
        {"him", "her", PairSource::augmented, 0.8},
    };
    return lex;
}

std::string temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "fairtext_perturb_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::vector<std::string> random_tokens(DetRng& rng, std::size_t n) {
    static const std::vector<std::string> words = {
        "man", "woman", "he",   "she",  "likes", "hates", "the", "a",
        "dog", "road",  "trip", "fast", "slow",  "!",     ",",   "today"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(words[rng.bounded(words.size())]);
    }
    return out;
}

}  // namespace

TEST_CASE("tokenizer lowercases and peels edge punctuation") {
    CHECK(tokenize("Women should rule!") ==
          std::vector<std::string>{"women", "should", "rule", "!"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("   ") == std::vector<std::string>{});
    CHECK(tokenize("(hello), world...") ==
          std::vector<std::string>{"(", "hello", ")", ",", "world", ".", ".", "."});
    // Interior punctuation stays attached.
    CHECK(tokenize("don't stop african-american voters") ==
          std::vector<std::string>{"don't", "stop", "african-american", "voters"});
}

TEST_CASE("tokenize after detokenize is the identity on token sequences") {
    DetRng rng(404);
    for (int i = 0; i < 500; ++i) {
        const auto toks = random_tokens(rng, 1 + rng.bounded(12));
        CHECK(tokenize(detokenize(toks)) == toks);
    }
}

TEST_CASE("make_instance validates labels") {
    const auto x = make_instance("id1", "He likes dogs", 1);
    CHECK(x.tokens == std::vector<std::string>{"he", "likes", "dogs"});
    CHECK(x.label == 1);
    CHECK_THROWS_AS(make_instance("id2", "text", 2), ValidationError);
    CHECK_THROWS_AS(make_instance("id3", "text", -1), ValidationError);
}

TEST_CASE("directional replacement substitutes every occurrence") {
    const auto x = make_instance("a", "women should rule the world", 0);
    IdentityPair p{"women", "men", PairSource::known, std::nullopt};
    const auto y = replace_pair(x, p);
    REQUIRE(y.has_value());
    CHECK(y->text == "men should rule the world");
    CHECK(y->label == x.label);
    CHECK(y->origin_id == "a");

    const auto z = make_instance("b", "man to man", 1);
    IdentityPair q{"man", "woman", PairSource::known, std::nullopt};
    const auto w = replace_pair(z, q);
    REQUIRE(w.has_value());
    CHECK(w->text == "woman to woman");

    const auto none = replace_pair(z, p);
    CHECK_FALSE(none.has_value());
}

TEST_CASE("replacement is idempotent once the source term is gone") {
    DetRng rng(77);
    IdentityPair p{"man", "woman", PairSource::known, std::nullopt};
    int applied = 0;
    for (int i = 0; i < 1000; ++i) {
        Instance x;
        x.id = "r" + std::to_string(i);
        x.tokens = random_tokens(rng, 1 + rng.bounded(10));
        x.text = detokenize(x.tokens);
        x.label = static_cast<int>(rng.bounded(2));
        const auto y = replace_pair(x, p);
        if (!y) {
            CHECK(std::count(x.tokens.begin(), x.tokens.end(), "man") == 0);
            continue;
        }
        ++applied;
        CHECK(y->tokens.size() == x.tokens.size());
        CHECK(y->label == x.label);
        CHECK(std::count(y->tokens.begin(), y->tokens.end(), "man") == 0);
        CHECK_FALSE(replace_pair(*y, p).has_value());
    }
    CHECK(applied > 100);
}

TEST_CASE("blinding removes every lexicon term") {
    const auto lex = gender_lexicon();
    DetRng rng(88);
    int changed = 0;
    for (int i = 0; i < 1000; ++i) {
        Instance x;
        x.id = "b" + std::to_string(i);
        x.tokens = random_tokens(rng, 1 + rng.bounded(10));
        x.text = detokenize(x.tokens);
        x.label = static_cast<int>(rng.bounded(2));
        const auto y = blind_instance(x, lex, "identity_token");
        CHECK(y.tokens.size() == x.tokens.size());
        CHECK(y.label == x.label);
        for (const auto& t : lex.terms()) {
            CHECK(std::count(y.tokens.begin(), y.tokens.end(), t) == 0);
        }
        if (y.tokens != x.tokens) {
            ++changed;
            CHECK(std::count(y.tokens.begin(), y.tokens.end(), "identity_token") > 0);
        }
    }
    CHECK(changed > 100);
}

TEST_CASE("blinding honours the placeholder map and lowercases placeholders") {
    IdentityLexicon lex = gender_lexicon();
    lex.placeholder_map = {{"man", "GENDER_TOKEN"}, {"woman", "GENDER_TOKEN"}};
    const auto x = make_instance("p", "the man met her", 0);
    const auto y = blind_instance(x, lex, "IDENTITY_TOKEN");
    CHECK(y.tokens ==
          std::vector<std::string>{"the", "gender_token", "met", "identity_token"});
}

TEST_CASE("swap exchanges both directions simultaneously") {
    const auto lex = gender_lexicon();
    PerturbationConfig cfg;
    cfg.n_s = 1.0;
    cfg.seed = 5;
    const auto x = make_instance("s", "the man met a woman", 0);
    const auto swaps = generate_ips(x, lex, cfg);
    bool found = false;
    for (const auto& [pair, inst] : swaps) {
        if (same_unordered(pair, {"man", "woman", PairSource::known, std::nullopt})) {
            found = true;
            CHECK(inst.text == "the woman met a man");
        }
    }
    CHECK(found);
}

TEST_CASE("swapping twice restores the original tokens") {
    IdentityLexicon lex;
    lex.pairs = {{"man", "woman", PairSource::known, std::nullopt}};
    PerturbationConfig cfg;
    cfg.n_s = 1.0;
    DetRng rng(909);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        Instance x;
        x.id = "w" + std::to_string(i);
        x.tokens = random_tokens(rng, 1 + rng.bounded(10));
        x.text = detokenize(x.tokens);
        x.label = static_cast<int>(rng.bounded(2));
        cfg.seed = i;
        const auto once = generate_ips(x, lex, cfg);
        if (once.empty()) {
            continue;
        }
        REQUIRE(once.size() == 1);
        const auto twice = generate_ips(once[0].second, lex, cfg);
        REQUIRE(twice.size() == 1);
        CHECK(twice[0].second.tokens == x.tokens);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("replacement sampling rounds up and emits both orientations") {
    const auto lex = gender_lexicon();
    const auto x = make_instance("c", "he saw him and a man", 1);
    PerturbationConfig cfg;
    cfg.seed = 3;

    cfg.n_r = 1.0;
    auto all = generate_ipr(x, lex, cfg);
    // Three pairs sampled, each applied in both directions where a term occurs;
    // only the left term of each pair occurs here.
    CHECK(all.size() == 3);
    std::set<std::string> texts;
    for (const auto& [pair, inst] : all) {
        CHECK(inst.label == x.label);
        CHECK(inst.tokens.size() == x.tokens.size());
        texts.insert(inst.text);
    }
    CHECK(texts.count("she saw him and a man"));
    CHECK(texts.count("he saw her and a man"));
    CHECK(texts.count("he saw him and a woman"));

    cfg.n_r = 0.0;
    CHECK(generate_ipr(x, lex, cfg).empty());

    cfg.n_r = 0.01;
    CHECK(generate_ipr(x, lex, cfg).size() <= 2);
}

TEST_CASE("perturbations are deterministic per seed and instance") {
    const auto lex = gender_lexicon();
    const auto x = make_instance("d1", "the man met a woman and he waved", 1);
    PerturbationConfig cfg;
    cfg.seed = 42;
    const auto a = generate_all(x, lex, cfg);
    const auto b = generate_all(x, lex, cfg);
    REQUIRE(a.replacements.size() == b.replacements.size());
    for (std::size_t i = 0; i < a.replacements.size(); ++i) {
        CHECK(a.replacements[i].second.text == b.replacements[i].second.text);
        CHECK(a.replacements[i].second.id == b.replacements[i].second.id);
    }
    REQUIRE(a.blinded.size() == b.blinded.size());
    REQUIRE(a.swapped.size() == b.swapped.size());
    CHECK(a.origin == x.id);
}

TEST_CASE("derived instances carry provenance") {
    const auto lex = gender_lexicon();
    PerturbationConfig cfg;
    cfg.seed = 1;
    cfg.n_b = 1.0;
    const auto x = make_instance("orig7", "the man spoke", 0);
    const auto blinds = generate_itb(x, lex, cfg);
    REQUIRE_FALSE(blinds.empty());
    for (const auto& [term, inst] : blinds) {
        CHECK(inst.origin_id == "orig7");
        CHECK(inst.op == "blind");
        CHECK(inst.id.rfind("orig7/b/", 0) == 0);
        CHECK(inst.detail.find(term) != std::string::npos);
    }
}

TEST_CASE("counterfactuals cover every substitution combination") {
    const auto lex = gender_lexicon();
    const auto x = make_instance("cf", "she likes him", 1);
    IdentityLexicon two;
    two.pairs = {
        {"she", "he", PairSource::known, std::nullopt},
        {"him", "her", PairSource::known, std::nullopt},
    };
    const auto all = counterfactuals_all(x, two, 256);
    REQUIRE(all.size() == 3);
    std::set<std::string> texts;
    for (const auto& c : all) {
        texts.insert(c.text);
        CHECK(c.label == x.label);
    }
    CHECK(texts == std::set<std::string>{"he likes him", "she likes her", "he likes her"});

    const auto first = counterfactuals_all(x, two, 1);
    REQUIRE(first.size() == 1);
    CHECK(first[0].text == "she likes her");
}

TEST_CASE("counterfactual enumeration matches a brute-force subset walk") {
    IdentityLexicon lex;
    lex.pairs = {
        {"a", "b", PairSource::known, std::nullopt},
        {"c", "d", PairSource::augmented, 0.5},
        {"a", "e", PairSource::augmented, 0.4},
    };
    std::map<std::string, std::set<std::string>> partners;
    for (const auto& p : lex.pairs) {
        partners[p.first].insert(p.second);
        partners[p.second].insert(p.first);
    }
    DetRng rng(2024);
    const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "x", "y"};
    for (int rep = 0; rep < 200; ++rep) {
        Instance x;
        x.id = "bf" + std::to_string(rep);
        for (std::size_t i = 0, n = 1 + rng.bounded(5); i < n; ++i) {
            x.tokens.push_back(alphabet[rng.bounded(alphabet.size())]);
        }
        x.text = detokenize(x.tokens);
        x.label = 0;

        // Reference: recurse over present identity terms, choosing a partner or
        // leaving each alone, and collect the distinct non-identity results.
        std::set<std::string> terms_present;
        for (const auto& t : x.tokens) {
            if (partners.count(t)) {
                terms_present.insert(t);
            }
        }
        std::vector<std::string> term_list(terms_present.begin(), terms_present.end());
        std::set<std::vector<std::string>> expect;
        std::map<std::string, std::string> chosen;
        auto walk = [&](auto&& self, std::size_t idx) -> void {
            if (idx == term_list.size()) {
                std::vector<std::string> out;
                for (const auto& t : x.tokens) {
                    auto it = chosen.find(t);
                    out.push_back(it == chosen.end() ? t : it->second);
                }
                if (out != x.tokens) {
                    expect.insert(out);
                }
                return;
            }
            self(self, idx + 1);
            for (const auto& r : partners.at(term_list[idx])) {
                chosen[term_list[idx]] = r;
                self(self, idx + 1);
                chosen.erase(term_list[idx]);
            }
        };
        walk(walk, 0);

        const auto got = counterfactuals_all(x, lex, 10000);
        std::set<std::vector<std::string>> got_set;
        for (const auto& c : got) {
            got_set.insert(c.tokens);
        }
        CAPTURE(x.text);
        CHECK(got_set == expect);
        CHECK(got.size() == got_set.size());
    }
}

TEST_CASE("instances without identity terms have no counterfactuals") {
    const auto lex = gender_lexicon();
    const auto x = make_instance("none", "dogs chase cars", 0);
    CHECK(counterfactuals_all(x, lex, 256).empty());
}

TEST_CASE("dataset csv round trips provenance and awkward text") {
    std::vector<Instance> rows;
    rows.push_back(make_instance("t1", "plain words", 0));
    rows.push_back(make_instance("t2", "says \"hi, there\"", 1));
    rows.push_back(make_instance("t3", "commas, everywhere,", 1));
    rows[1].origin_id = "t1";
    rows[1].op = "replace";
    rows[1].detail = "a->b";
    const auto path = temp_file("round.csv");
    save_dataset_csv(rows, path, true, {"config_hash=feed"});
    const auto back = load_dataset_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].id == rows[i].id);
        CHECK(back[i].text == rows[i].text);
        CHECK(back[i].label == rows[i].label);
        CHECK(back[i].origin_id == rows[i].origin_id);
        CHECK(back[i].op == rows[i].op);
        CHECK(back[i].detail == rows[i].detail);
    }
}

TEST_CASE("dataset csv accepts the plain three-column header") {
    const auto path = temp_file("plain.csv");
    write_file_atomic(path, "# a comment\nid,text,label\nx1,\"hello, you\",1\nx2,bye,0\n");
    const auto rows = load_dataset_csv(path);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].text == "hello, you");
    CHECK(rows[0].label == 1);
    CHECK(rows[1].label == 0);
}

TEST_CASE("dataset csv errors name the offending line") {
    const auto bad_label = temp_file("badlabel.csv");
    write_file_atomic(bad_label, "id,text,label\nx1,hello,2\n");
    CHECK_THROWS_WITH_AS(load_dataset_csv(bad_label), doctest::Contains(":2:"),
                         ValidationError);

    const auto bad_cols = temp_file("badcols.csv");
    write_file_atomic(bad_cols, "id,text,label\nx1,hello\n");
    CHECK_THROWS_AS(load_dataset_csv(bad_cols), ValidationError);

    const auto bad_header = temp_file("badheader.csv");
    write_file_atomic(bad_header, "ident,text,label\nx1,hello,1\n");
    CHECK_THROWS_AS(load_dataset_csv(bad_header), ValidationError);

    const auto empty_id = temp_file("emptyid.csv");
    write_file_atomic(empty_id, "id,text,label\n,hello,1\n");
    CHECK_THROWS_AS(load_dataset_csv(empty_id), ValidationError);
}

TEST_CASE("quoted fields may contain embedded newlines") {
    const auto path = temp_file("newline.csv");
    write_file_atomic(path, "id,text,label\nx1,\"line one\nline two\",1\n");
    const auto rows = load_dataset_csv(path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].text == "line one\nline two");
}

TEST_CASE("perturbation config validation") {
    PerturbationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.n_r = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.n_r = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.n_r = 0.5;
    cfg.placeholder_default = "";
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
