#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fairtext/errors.hpp"
#include "fairtext/eval.hpp"
#include "fairtext/perturb.hpp"
#include "fairtext/rng.hpp"

using namespace fairtext;

namespace {

IdentityLexicon gender_lexicon() {
    IdentityLexicon lex;
    lex.pairs = {
        {"she", "he", PairSource::known, std::nullopt},
        {"man", "woman", PairSource::known, std::nullopt},
    };
    return lex;
}

// Scores keyed on the first token, so counterfactual texts get controlled
// values.
ScoreFn table_scorer(std::map<std::string, double> table, double fallback) {
    return [table = std::move(table), fallback](const Instance& x) {
        if (x.tokens.empty()) {
            return fallback;
        }
        const auto it = table.find(x.tokens.front());
        return it == table.end() ? fallback : it->second;
    };
}

std::vector<Instance> scored_testset() {
    return {
        make_instance("p1", "she rules", 1),
        make_instance("n1", "man walks", 0),
    };
}

}  // namespace

TEST_CASE("per-instance gap is the mean absolute difference") {
    const auto f = table_scorer({{"she", 0.8}, {"he", 0.6}}, 0.7);
    const auto x = make_instance("x", "she rules", 1);
    std::vector<Instance> cfs = {make_instance("x/c/0", "he rules", 1)};
    auto gap = ctf_gap_instance(f, x, cfs);
    REQUIRE(gap.has_value());
    CHECK(*gap == doctest::Approx(0.2).epsilon(1e-12));

    cfs.push_back(make_instance("x/c/1", "they rule", 1));  // scores 0.7
    gap = ctf_gap_instance(f, x, cfs);
    CHECK(*gap == doctest::Approx(0.15).epsilon(1e-12));

    CHECK_FALSE(ctf_gap_instance(f, x, {}).has_value());
}

TEST_CASE("constant scorers have zero counterfactual gap") {
    const ScoreFn f = [](const Instance&) { return 0.5; };
    const auto res = ctf_gap_dataset(f, scored_testset(), gender_lexicon(), 256);
    CHECK(res.ctf_all == 0.0);
    REQUIRE(res.ctf_pos.has_value());
    CHECK(*res.ctf_pos == 0.0);
    CHECK(res.skipped == 0);
}

TEST_CASE("dataset gap aggregates per class and overall") {
    // she->he gives gap 0.2 on the positive; man->woman gives 0.1 on the
    // negative; overall mean is 0.15 and the parity difference is 0.1.
    const auto f = table_scorer(
        {{"she", 0.8}, {"he", 0.6}, {"man", 0.5}, {"woman", 0.4}}, 0.5);
    const auto res = ctf_gap_dataset(f, scored_testset(), gender_lexicon(), 256);
    REQUIRE(res.ctf_pos.has_value());
    REQUIRE(res.ctf_neg.has_value());
    CHECK(*res.ctf_pos == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(*res.ctf_neg == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(res.ctf_all == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(res.counted_pos == 1);
    CHECK(res.counted_neg == 1);
    CHECK(res.skipped == 0);
}

TEST_CASE("the overall gap is count-weighted, not a class average") {
    // Two positives with gap 0.2 and one negative with gap 0.1:
    // (0.2 + 0.2 + 0.1) / 3, not (0.2 + 0.1) / 2.
    auto testset = scored_testset();
    testset.push_back(make_instance("p2", "she sings", 1));
    const auto f = table_scorer(
        {{"she", 0.8}, {"he", 0.6}, {"man", 0.5}, {"woman", 0.4}}, 0.5);
    const auto res = ctf_gap_dataset(f, testset, gender_lexicon(), 256);
    CHECK(res.ctf_all == doctest::Approx(0.5 / 3.0).epsilon(1e-12));
}

TEST_CASE("instances without counterfactuals are skipped and counted") {
    auto testset = scored_testset();
    testset.push_back(make_instance("skip1", "dogs bark", 1));
    const ScoreFn f = [](const Instance&) { return 0.4; };
    const auto res = ctf_gap_dataset(f, testset, gender_lexicon(), 256);
    CHECK(res.skipped == 1);
    CHECK(res.counted_pos == 1);
    CHECK(res.counted_neg == 1);

    const std::vector<Instance> none = {make_instance("s1", "dogs bark", 1),
                                        make_instance("s2", "cats meow", 0)};
    CHECK_THROWS_AS(ctf_gap_dataset(f, none, gender_lexicon(), 256), ValidationError);
}

TEST_CASE("accuracy thresholds at one half with ties predicting positive") {
    const ScoreFn half = [](const Instance&) { return 0.5; };
    const auto res = accuracy(half, scored_testset());
    REQUIRE(res.acc_pos.has_value());
    REQUIRE(res.acc_neg.has_value());
    CHECK(*res.acc_pos == 1.0);
    CHECK(*res.acc_neg == 0.0);
    CHECK(res.acc_all == 0.5);
}

TEST_CASE("accuracy on a hand fixture") {
    std::vector<Instance> testset = {
        make_instance("a", "t", 1), make_instance("b", "t", 1),
        make_instance("c", "t", 0), make_instance("d", "t", 0)};
    const ScoreFn f = [](const Instance& x) {
        if (x.id == "a") return 0.9;   // right
        if (x.id == "b") return 0.2;   // wrong
        if (x.id == "c") return 0.1;   // right
        return 0.7;                    // wrong
    };
    const auto res = accuracy(f, testset);
    CHECK(*res.acc_pos == 0.5);
    CHECK(*res.acc_neg == 0.5);
    CHECK(res.acc_all == 0.5);
}

TEST_CASE("accuracy reports empty per-class fields when a class is absent") {
    std::vector<Instance> only_pos = {make_instance("a", "t", 1)};
    const ScoreFn f = [](const Instance&) { return 0.9; };
    const auto res = accuracy(f, only_pos);
    CHECK(res.acc_pos.has_value());
    CHECK_FALSE(res.acc_neg.has_value());
    CHECK(res.acc_all == 1.0);
}

TEST_CASE("auc hand values") {
    std::vector<Instance> testset = {
        make_instance("p1", "t", 1), make_instance("p2", "t", 1),
        make_instance("n1", "t", 0), make_instance("n2", "t", 0)};
    const ScoreFn f = [](const Instance& x) {
        if (x.id == "p1") return 0.9;
        if (x.id == "p2") return 0.4;
        if (x.id == "n1") return 0.6;
        return 0.1;
    };
    CHECK(auc(f, testset) == 0.75);

    const ScoreFn perfect = [](const Instance& x) { return x.label ? 0.9 : 0.1; };
    CHECK(auc(perfect, testset) == 1.0);
    const ScoreFn inverted = [](const Instance& x) { return x.label ? 0.1 : 0.9; };
    CHECK(auc(inverted, testset) == 0.0);
    const ScoreFn constant = [](const Instance&) { return 0.3; };
    CHECK(auc(constant, testset) == 0.5);
}

TEST_CASE("auc requires both classes") {
    std::vector<Instance> testset = {make_instance("a", "t", 1)};
    const ScoreFn f = [](const Instance&) { return 0.5; };
    CHECK_THROWS_AS(auc(f, testset), ValidationError);
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    DetRng rng(606);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 4 + rng.bounded(20);
        std::vector<Instance> testset;
        std::vector<double> scores;
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int label = static_cast<int>(rng.bounded(2));
            has_pos |= label == 1;
            has_neg |= label == 0;
            testset.push_back(
                make_instance("r" + std::to_string(i), "t", label));
            // Coarse grid so ties actually happen.
            scores.push_back(static_cast<double>(rng.bounded(6)) / 5.0);
        }
        if (!has_pos || !has_neg) {
            continue;
        }
        const ScoreFn f = [&](const Instance& x) {
            return scores[std::stoul(x.id.substr(1))];
        };
        const ScoreFn g = [&](const Instance& x) {
            const double v = f(x);
            return std::atan(3.0 * v) + v * v * v;  // strictly increasing on [0,1]
        };
        CAPTURE(rep);
        CHECK(auc(f, testset) == auc(g, testset));
    }
}

TEST_CASE("auc of a tie-free scorer and its mirror sum to one") {
    DetRng rng(707);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 4 + rng.bounded(16);
        std::vector<Instance> testset;
        std::vector<double> scores;
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int label = static_cast<int>(rng.bounded(2));
            has_pos |= label == 1;
            has_neg |= label == 0;
            testset.push_back(make_instance("r" + std::to_string(i), "t", label));
            scores.push_back(rng.uniform(0.0, 1.0));  // ties almost surely absent
        }
        if (!has_pos || !has_neg) {
            continue;
        }
        const ScoreFn f = [&](const Instance& x) {
            return scores[std::stoul(x.id.substr(1))];
        };
        const ScoreFn mirror = [&](const Instance& x) { return 1.0 - f(x); };
        CHECK(auc(f, testset) + auc(mirror, testset) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("evaluate stitches the metrics together") {
    const auto f = table_scorer(
        {{"she", 0.8}, {"he", 0.6}, {"man", 0.3}, {"woman", 0.2}}, 0.5);
    const auto report = evaluate(f, scored_testset(), gender_lexicon(), 256);
    CHECK(report.ctf_all == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(report.acc_all == 1.0);
    CHECK(report.auc == 1.0);
    CHECK(report.counted_pos == 1);
    CHECK(report.counted_neg == 1);
    CHECK(report.skipped_no_counterfactual == 0);
}

TEST_CASE("report json has stable keys and six decimal places") {
    CTFReport r;
    r.ctf_pos = 0.2;
    r.ctf_neg = std::nullopt;
    r.ctf_all = 0.15;
    r.acc_pos = 1.0;
    r.acc_neg = 0.5;
    r.acc_all = 0.75;
    r.auc = 0.875;
    r.counted_pos = 3;
    r.counted_neg = 0;
    r.skipped_no_counterfactual = 2;
    r.config_hash = "00ff00ff00ff00ff";
    r.lexicon_hash = "1111222233334444";
    r.seed = "42";
    const auto json = report_to_json(r);
    CHECK(json.find("\"ctf_pos\": 0.200000") != std::string::npos);
    CHECK(json.find("\"ctf_neg\": null") != std::string::npos);
    CHECK(json.find("\"ctf_all\": 0.150000") != std::string::npos);
    CHECK(json.find("\"auc\": 0.875000") != std::string::npos);
    CHECK(json.find("\"counted_pos\": 3") != std::string::npos);
    CHECK(json.find("\"skipped_no_counterfactual\": 2") != std::string::npos);
    CHECK(json.find("\"config_hash\": \"00ff00ff00ff00ff\"") != std::string::npos);
    // ctf keys come before accuracy, which comes before auc.
    CHECK(json.find("ctf_all") < json.find("acc_all"));
    CHECK(json.find("acc_all") < json.find("\"auc\""));
}

TEST_CASE("scorer wraps checkpoint parameters") {
    const auto m = EmbeddingModel::from_rows(
        {"good", "bad", "man", "woman"},
        {{1.0f, 0.0f}, {0.0f, 1.0f}, {0.5f, 0.5f}, {0.4f, 0.6f}});
    ModelParams p;
    p.embed_dim = 2;
    p.hidden_dim = 1;
    p.data = {1.0, -1.0, 0.0, 1.0, 0.0};
    Scorer plain(p, m);
    const auto pos = make_instance("a", "good good", 1);
    CHECK(plain.prob(pos) > 0.5);
    CHECK(plain.prob(pos) == sigmoid(plain.logit(pos)));

    // With blinding enabled, paired identity tokens stop mattering.
    IdentityLexicon lex;
    lex.pairs = {{"man", "woman", PairSource::known, std::nullopt}};
    Scorer blinded(p, m);
    blinded.enable_blinding(&lex, "identity_token");
    const auto xa = make_instance("b1", "good man", 1);
    const auto xb = make_instance("b2", "good woman", 1);
    CHECK(blinded.logit(xa) == blinded.logit(xb));
    CHECK(plain.logit(xa) != plain.logit(xb));
}
