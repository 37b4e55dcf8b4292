#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "fairtext/config.hpp"
#include "fairtext/eval.hpp"
#include "fairtext/hash.hpp"
#include "fairtext/io.hpp"
#include "fairtext/model.hpp"
#include "fairtext/perturb.hpp"

using namespace fairtext;

namespace {

const std::string kCli = FAIRTEXT_CLI_PATH;
const std::string kData = FAIRTEXT_DATA_DIR;

std::filesystem::path work_dir() {
    static const auto dir = [] {
        auto d = std::filesystem::temp_directory_path() / "fairtext_cli_tests";
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

std::string wpath(const std::string& name) {
    return (work_dir() / name).string();
}

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status < 0) {
        return -1;
    }
    return WEXITSTATUS(status);
}

std::string data(const std::string& name) {
    return kData + "/" + name;
}

const std::string kCommon = " --embeddings " + data("fixture_embeddings.txt") +
                            " --config " + data("fixture_config.json");

void build_lexicon_once() {
    static bool done = false;
    if (done) {
        return;
    }
    REQUIRE(run("augment-pairs" + kCommon + " --known-pairs " +
                data("fixture_known_pairs.tsv") + " --out " + wpath("lexicon.tsv")) == 0);
    done = true;
}

}  // namespace

TEST_CASE("augment-pairs produces a deterministic lexicon") {
    build_lexicon_once();
    REQUIRE(run("augment-pairs" + kCommon + " --known-pairs " +
                data("fixture_known_pairs.tsv") + " --out " + wpath("lexicon2.tsv")) == 0);
    const auto a = read_file(wpath("lexicon.tsv"));
    const auto b = read_file(wpath("lexicon2.tsv"));
    CHECK(a == b);
    const auto lex = load_lexicon_tsv(wpath("lexicon.tsv"));
    CHECK(lex.pairs.size() > 3);  // seeds expanded beyond themselves
}

TEST_CASE("bad arguments and missing files exit with code 1") {
    CHECK(run("augment-pairs" + kCommon + " --known-pairs " +
              data("fixture_known_pairs.tsv") + " --tau 1.01 --out " +
              wpath("never.tsv")) == 1);
    CHECK(run("augment-pairs" + kCommon + " --known-pairs " + wpath("absent.tsv") +
              " --out " + wpath("never.tsv")) == 1);
    CHECK(run("train" + kCommon + " --dataset " + data("corpus_train.csv") +
              " --scheme logit-pairing --out " + wpath("never.ckpt")) == 1);
    CHECK(run("") == 1);          // a subcommand is required
    CHECK(run("--help") == 0);
}

TEST_CASE("perturb emits origin rows plus derived rows") {
    build_lexicon_once();
    REQUIRE(run("perturb" + kCommon + " --dataset " + data("corpus_train.csv") +
                " --lexicon " + wpath("lexicon.tsv") + " --out " +
                wpath("perturbed.csv")) == 0);
    const auto rows = load_dataset_csv(wpath("perturbed.csv"));
    const auto origins = load_dataset_csv(data("corpus_train.csv"));
    CHECK(rows.size() > origins.size());
    std::size_t derived = 0;
    for (const auto& r : rows) {
        if (!r.origin_id.empty()) {
            ++derived;
            CHECK_FALSE(r.op.empty());
        }
    }
    CHECK(rows.size() == origins.size() + derived);

    // Reruns are byte-identical.
    REQUIRE(run("perturb" + kCommon + " --dataset " + data("corpus_train.csv") +
                " --lexicon " + wpath("lexicon.tsv") + " --out " +
                wpath("perturbed2.csv")) == 0);
    CHECK(read_file(wpath("perturbed.csv")) == read_file(wpath("perturbed2.csv")));
}

TEST_CASE("zero fractions emit only the origin rows") {
    build_lexicon_once();
    REQUIRE(run("perturb" + kCommon + " --dataset " + data("corpus_train.csv") +
                " --lexicon " + wpath("lexicon.tsv") +
                " --n-r 0 --n-b 0 --n-s 0 --out " + wpath("noop.csv")) == 0);
    const auto rows = load_dataset_csv(wpath("noop.csv"));
    const auto origins = load_dataset_csv(data("corpus_train.csv"));
    REQUIRE(rows.size() == origins.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].id == origins[i].id);
        CHECK(rows[i].text == origins[i].text);
    }
}

TEST_CASE("training writes a reproducible checkpoint and log") {
    build_lexicon_once();
    const std::string args = "train" + kCommon + " --dataset " +
                             data("corpus_train.csv") + " --scheme plain --epochs 8";
    REQUIRE(run(args + " --out " + wpath("plain.ckpt")) == 0);
    CHECK(std::filesystem::exists(wpath("plain.ckpt")));
    CHECK(std::filesystem::exists(wpath("plain.ckpt.log.csv")));
    REQUIRE(run(args + " --out " + wpath("plain_b.ckpt")) == 0);
    CHECK(read_file(wpath("plain.ckpt")) == read_file(wpath("plain_b.ckpt")));

    const auto cp = load_checkpoint(wpath("plain.ckpt"));
    CHECK(cp.scheme == TrainScheme::plain);
    CHECK(cp.params.embed_dim == 16);
    CHECK(cp.lexicon_hash.empty());
}

TEST_CASE("a blindness model evaluates to an exactly zero counterfactual gap") {
    build_lexicon_once();
    REQUIRE(run("train" + kCommon + " --dataset " + data("corpus_train.csv") +
                " --lexicon " + wpath("lexicon.tsv") +
                " --scheme blindness --epochs 3 --out " + wpath("blind.ckpt")) == 0);
    REQUIRE(run("evaluate" + kCommon + " --checkpoint " + wpath("blind.ckpt") +
                " --testset " + data("corpus_test.csv") + " --lexicon " +
                wpath("lexicon.tsv") + " --out " + wpath("blind_report.json")) == 0);
    const auto report = read_file(wpath("blind_report.json"));
    CHECK(report.find("\"ctf_all\": 0.000000") != std::string::npos);
}

TEST_CASE("evaluate refuses a lexicon that does not match the checkpoint") {
    build_lexicon_once();
    // Train against the full lexicon, then evaluate against the bare seeds.
    REQUIRE(run("train" + kCommon + " --dataset " + data("corpus_train.csv") +
                " --lexicon " + wpath("lexicon.tsv") +
                " --scheme blindness --epochs 2 --out " + wpath("mismatch.ckpt")) == 0);
    const std::string eval_args =
        "evaluate" + kCommon + " --checkpoint " + wpath("mismatch.ckpt") +
        " --testset " + data("corpus_test.csv") + " --lexicon " +
        data("fixture_known_pairs.tsv") + " --out " + wpath("mismatch_report.json");
    CHECK(run(eval_args) == 1);
    CHECK(run(eval_args + " --force") == 0);
    CHECK(std::filesystem::exists(wpath("mismatch_report.json")));
}

TEST_CASE("cli evaluation matches a direct library evaluation byte for byte") {
    build_lexicon_once();
    REQUIRE(run("train" + kCommon + " --dataset " + data("corpus_train.csv") +
                " --scheme plain --epochs 8 --out " + wpath("eq.ckpt")) == 0);

    // One shared config file so both sides hash identical settings.
    const std::string cfg_path = wpath("eval_config.json");
    write_file_atomic(cfg_path, std::string("{\n") +
                                    "  \"embeddings\": \"" + data("fixture_embeddings.txt") + "\",\n" +
                                    "  \"checkpoint\": \"" + wpath("eq.ckpt") + "\",\n" +
                                    "  \"testset\": \"" + data("corpus_test.csv") + "\",\n" +
                                    "  \"lexicon\": \"" + wpath("lexicon.tsv") + "\",\n" +
                                    "  \"out\": \"" + wpath("eq_report.json") + "\",\n" +
                                    "  \"seed\": 42\n" +
                                    "}\n");
    REQUIRE(run("evaluate --config " + cfg_path) == 0);

    const RunConfig cfg = RunConfig::from_file(cfg_path);
    const auto cp = load_checkpoint(cfg.checkpoint);
    const auto model = EmbeddingModel::load(cfg.embeddings);
    const auto testset = load_dataset_csv(cfg.testset);
    const auto lex = load_lexicon_tsv(cfg.lexicon);
    Scorer scorer(cp.params, model);
    CTFReport report = evaluate(scorer.fn(), testset, lex,
                                static_cast<std::size_t>(cfg.counterfactual_cap));
    report.config_hash = cfg.hash_hex();
    report.lexicon_hash = hex16(lexicon_hash(lex));
    report.seed = std::to_string(cfg.seed);
    CHECK(report_to_json(report) == read_file(wpath("eq_report.json")));
}

TEST_CASE("config file values are overridden by explicit flags") {
    build_lexicon_once();
    // fixture config says tau=0.25; an impossible flag override must win.
    CHECK(run("augment-pairs" + kCommon + " --known-pairs " +
              data("fixture_known_pairs.tsv") + " --tau 1.01 --out " +
              wpath("never2.tsv")) == 1);
    // Unknown config keys are rejected.
    const std::string bad_cfg = wpath("bad_config.json");
    write_file_atomic(bad_cfg, "{\"taou\": 0.3}\n");
    CHECK(run("augment-pairs --config " + bad_cfg + " --embeddings " +
              data("fixture_embeddings.txt") + " --known-pairs " +
              data("fixture_known_pairs.tsv") + " --out " + wpath("never3.tsv")) == 1);
}

TEST_CASE("expected dimension guard rejects a mismatched table") {
    CHECK(run("augment-pairs --embeddings " + data("fixture_embeddings.txt") +
              " --known-pairs " + data("fixture_known_pairs.tsv") +
              " --expected-dim 300 --out " + wpath("never4.tsv")) == 1);
}
