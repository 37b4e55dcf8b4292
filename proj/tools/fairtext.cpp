#include <cinttypes>
#include <cstdio>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "fairtext/config.hpp"
#include "fairtext/errors.hpp"
#include "fairtext/eval.hpp"
#include "fairtext/hash.hpp"
#include "fairtext/model.hpp"
#include "fairtext/perturb.hpp"

namespace {

using namespace fairtext;

// Flag values land in `values`; only flags the user actually passed override
// the config file (tracked through the CLI11 option handles).
struct Flags {
    std::string config;
    RunConfig values;
    int expected_dim = 0;
    bool force = false;
    std::map<std::string, CLI::Option*> passed;

    bool has(const std::string& name) const {
        auto it = passed.find(name);
        return it != passed.end() && it->second->count() > 0;
    }
};

RunConfig resolve(const Flags& f) {
    RunConfig cfg;
    if (!f.config.empty()) {
        cfg = RunConfig::from_file(f.config);
    }
    auto take = [&](const char* name, auto member) {
        if (f.has(name)) {
            cfg.*member = f.values.*member;
        }
    };
    take("embeddings", &RunConfig::embeddings);
    take("known-pairs", &RunConfig::known_pairs);
    take("lexicon", &RunConfig::lexicon);
    take("dataset", &RunConfig::dataset);
    take("testset", &RunConfig::testset);
    take("checkpoint", &RunConfig::checkpoint);
    take("out", &RunConfig::out);
    take("log", &RunConfig::log);
    take("placeholders", &RunConfig::placeholders);
    take("tau", &RunConfig::tau);
    take("top-k1", &RunConfig::top_k1);
    take("top-k2", &RunConfig::top_k2);
    take("lemmatize", &RunConfig::lemmatize);
    take("analogy-top-k", &RunConfig::analogy_top_k);
    take("n-r", &RunConfig::n_r);
    take("n-b", &RunConfig::n_b);
    take("n-s", &RunConfig::n_s);
    take("placeholder", &RunConfig::placeholder_default);
    take("scheme", &RunConfig::scheme);
    take("lambda1", &RunConfig::lambda1);
    take("lambda2", &RunConfig::lambda2);
    take("epochs", &RunConfig::epochs);
    take("batch-size", &RunConfig::batch_size);
    take("lr", &RunConfig::learning_rate);
    take("hidden-dim", &RunConfig::hidden_dim);
    take("patience", &RunConfig::early_stopping_patience);
    take("holdout-fraction", &RunConfig::holdout_fraction);
    take("seed", &RunConfig::seed);
    take("cap", &RunConfig::counterfactual_cap);
    if (f.has("expected-dim")) {
        cfg.expected_dim = f.expected_dim;
    }
    return cfg;
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file; flags override it");
    f.passed["seed"] = cmd->add_option("--seed", f.values.seed, "run seed");
    f.passed["embeddings"] =
        cmd->add_option("--embeddings", f.values.embeddings, "embedding table (GloVe text format)");
    f.passed["out"] = cmd->add_option("--out", f.values.out, "output file");
    f.passed["expected-dim"] =
        cmd->add_option("--expected-dim", f.expected_dim, "required embedding dimension");
}

std::string require(const std::string& value, const char* what) {
    if (value.empty()) {
        throw ValidationError(std::string("missing required ") + what +
                              " (flag or config key)");
    }
    return value;
}

IdentityLexicon load_lexicon_with_placeholders(const RunConfig& cfg) {
    IdentityLexicon lex = load_lexicon_tsv(require(cfg.lexicon, "--lexicon"));
    if (!cfg.placeholders.empty()) {
        lex.placeholder_map = load_placeholder_tsv(cfg.placeholders);
    }
    return lex;
}

int cmd_augment_pairs(const Flags& f) {
    const RunConfig cfg = resolve(f);
    const EmbeddingModel model =
        EmbeddingModel::load(require(cfg.embeddings, "--embeddings"), cfg.expected_dim);
    const IdentityLexicon seeds =
        load_lexicon_tsv(require(cfg.known_pairs, "--known-pairs"));
    if (!seeds.pairs.empty()) {
        bool any_in_vocab = false;
        for (const IdentityPair& p : seeds.pairs) {
            if (model.contains(p.first) && model.contains(p.second)) {
                any_in_vocab = true;
                break;
            }
        }
        if (!any_in_vocab) {
            throw ValidationError("every known pair has out-of-vocabulary terms; "
                                  "nothing to expand");
        }
    }

    AugmentStats stats;
    IdentityLexicon lex =
        augment_pairs(model, seeds.pairs, cfg.augmentation_config(), &stats);
    if (cfg.analogy_top_k > 0) {
        const IdentityLexicon diag =
            analogy_augment(model, seeds.pairs, cfg.analogy_top_k);
        lex.pairs.insert(lex.pairs.end(), diag.pairs.begin(), diag.pairs.end());
    }
    lex = normalize_lexicon(lex, cfg.lemmatize, &model);
    if (!cfg.placeholders.empty()) {
        lex.placeholder_map = load_placeholder_tsv(cfg.placeholders);
    }

    const std::string out = require(cfg.out, "--out");
    save_lexicon_tsv(lex, out,
                     {"config_hash=" + cfg.hash_hex(),
                      "lexicon_hash=" + hex16(lexicon_hash(lex))});
    std::printf("known pairs kept:     %zu (%zu with OOV terms)\n", stats.known_kept,
                stats.known_oov);
    std::printf("candidates examined:  %zu\n", stats.candidates_examined);
    std::printf("pairs admitted:       %zu\n", stats.admitted);
    std::printf("lexicon pairs total:  %zu -> %s\n", lex.pairs.size(), out.c_str());
    return 0;
}

int cmd_perturb(const Flags& f) {
    const RunConfig cfg = resolve(f);
    const std::vector<Instance> dataset =
        load_dataset_csv(require(cfg.dataset, "--dataset"));
    const IdentityLexicon lex = load_lexicon_with_placeholders(cfg);
    const PerturbationConfig pcfg = cfg.perturbation_config();
    pcfg.validate();

    std::vector<Instance> rows;
    std::size_t n_replace = 0, n_blind = 0, n_swap = 0;
    for (const Instance& x : dataset) {
        rows.push_back(x);
        PerturbationSet set = generate_all(x, lex, pcfg);
        n_replace += set.replacements.size();
        n_blind += set.blinded.size();
        n_swap += set.swapped.size();
        for (auto& [p, inst] : set.replacements) {
            rows.push_back(std::move(inst));
        }
        for (auto& [t, inst] : set.blinded) {
            rows.push_back(std::move(inst));
        }
        for (auto& [p, inst] : set.swapped) {
            rows.push_back(std::move(inst));
        }
    }
    const std::string out = require(cfg.out, "--out");
    save_dataset_csv(rows, out, /*with_provenance=*/true,
                     {"config_hash=" + cfg.hash_hex(),
                      "lexicon_hash=" + hex16(lexicon_hash(lex))});
    std::printf("origin instances:     %zu\n", dataset.size());
    std::printf("replacement (phi_r):  %zu\n", n_replace);
    std::printf("blindness  (phi_b):   %zu\n", n_blind);
    std::printf("swap       (phi_s):   %zu\n", n_swap);
    std::printf("rows written:         %zu -> %s\n", rows.size(), out.c_str());
    return 0;
}

int cmd_train(const Flags& f) {
    const RunConfig cfg = resolve(f);
    const EmbeddingModel model =
        EmbeddingModel::load(require(cfg.embeddings, "--embeddings"), cfg.expected_dim);
    const std::vector<Instance> dataset =
        load_dataset_csv(require(cfg.dataset, "--dataset"));
    const TrainConfig tcfg = cfg.train_config();

    IdentityLexicon lex;
    bool have_lexicon = !cfg.lexicon.empty();
    if (tcfg.scheme != TrainScheme::plain && !have_lexicon) {
        throw ValidationError(std::string("scheme ") + scheme_name(tcfg.scheme) +
                              " requires --lexicon");
    }
    if (have_lexicon) {
        lex = load_lexicon_with_placeholders(cfg);
    }

    const TrainResult result =
        train(model, dataset, have_lexicon ? &lex : nullptr, tcfg,
              cfg.perturbation_config());

    Checkpoint cp;
    cp.params = result.params;
    cp.scheme = tcfg.scheme;
    cp.seed = cfg.seed;
    cp.config_hash = cfg.hash_hex();
    cp.lexicon_hash = have_lexicon ? hex16(lexicon_hash(lex)) : "";
    cp.placeholder_default = cfg.placeholder_default;
    const std::string out = require(cfg.out, "--out");
    save_checkpoint(cp, out);
    const std::string log_path = cfg.log.empty() ? out + ".log.csv" : cfg.log;
    save_training_log_csv(result.log, log_path);

    const TrainingLogEntry& last = result.log.entries.back();
    std::printf("scheme:          %s\n", scheme_name(tcfg.scheme));
    std::printf("epochs trained:  %d of %d\n", result.log.stopped_epoch, tcfg.epochs);
    std::printf("final loss:      %.6f\n", last.train_loss);
    std::printf("final accuracy:  %.6f\n", last.train_accuracy);
    std::printf("checkpoint:      %s\n", out.c_str());
    std::printf("training log:    %s\n", log_path.c_str());
    return 0;
}

int cmd_evaluate(const Flags& f) {
    const RunConfig cfg = resolve(f);
    const Checkpoint cp = load_checkpoint(require(cfg.checkpoint, "--checkpoint"));
    const EmbeddingModel model =
        EmbeddingModel::load(require(cfg.embeddings, "--embeddings"), cfg.expected_dim);
    if (model.dim() != cp.params.embed_dim) {
        throw ValidationError("checkpoint expects embedding dimension " +
                              std::to_string(cp.params.embed_dim) + ", table has " +
                              std::to_string(model.dim()));
    }
    const std::vector<Instance> testset =
        load_dataset_csv(require(cfg.testset, "--testset"));
    const IdentityLexicon lex = load_lexicon_with_placeholders(cfg);

    const std::string lex_hash = hex16(lexicon_hash(lex));
    if (!cp.lexicon_hash.empty() && cp.lexicon_hash != lex_hash && !f.force) {
        throw ValidationError("lexicon hash " + lex_hash +
                              " does not match the checkpoint's " + cp.lexicon_hash +
                              " (pass --force to evaluate anyway)");
    }

    Scorer scorer(cp.params, model);
    if (cp.scheme == TrainScheme::blindness) {
        scorer.enable_blinding(&lex, cp.placeholder_default);
    }

    CTFReport report = evaluate(scorer.fn(), testset, lex,
                                static_cast<std::size_t>(cfg.counterfactual_cap));
    report.config_hash = cfg.hash_hex();
    report.lexicon_hash = lex_hash;
    report.seed = std::to_string(cfg.seed);
    const std::string out = require(cfg.out, "--out");
    save_report_json(report, out);

    auto cell = [](const std::optional<double>& v) {
        char buf[16];
        if (v) {
            std::snprintf(buf, sizeof(buf), "%8.4f", *v);
        } else {
            std::snprintf(buf, sizeof(buf), "%8s", "n/a");
        }
        return std::string(buf);
    };
    std::printf("%12s %8s %8s %8s %8s %8s %8s %8s\n", "", "CTF_pos", "CTF_neg",
                "CTF_all", "Acc_pos", "Acc_neg", "Acc_all", "AUC");
    std::printf("%12s %s %s %8.4f %s %s %8.4f %8.4f\n", scheme_name(cp.scheme),
                cell(report.ctf_pos).c_str(), cell(report.ctf_neg).c_str(),
                report.ctf_all, cell(report.acc_pos).c_str(),
                cell(report.acc_neg).c_str(), report.acc_all, report.auc);
    std::printf("counted: %zu positive, %zu negative; skipped (no counterfactuals): %zu\n",
                report.counted_pos, report.counted_neg,
                report.skipped_no_counterfactual);
    std::printf("report: %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"identity-pair augmentation, text perturbation, and counterfactual "
                 "fairness evaluation"};
    app.require_subcommand(1);

    Flags fa, fp, ft, fe;

    CLI::App* aug = app.add_subcommand("augment-pairs",
                                       "expand known identity pairs through "
                                       "embedding neighborhoods");
    add_common(aug, fa);
    fa.passed["known-pairs"] =
        aug->add_option("--known-pairs", fa.values.known_pairs, "seed pair TSV");
    fa.passed["tau"] = aug->add_option("--tau", fa.values.tau, "admission threshold");
    fa.passed["top-k1"] =
        aug->add_option("--top-k1", fa.values.top_k1, "candidate neighborhood size");
    fa.passed["top-k2"] =
        aug->add_option("--top-k2", fa.values.top_k2, "overlap neighborhood size");
    fa.passed["lemmatize"] = aug->add_flag("--lemmatize,!--no-lemmatize",
                                           fa.values.lemmatize,
                                           "merge form-redundant pairs");
    fa.passed["analogy-top-k"] =
        aug->add_option("--analogy-top-k", fa.values.analogy_top_k,
                        "also emit diagnostic analogy pairs");
    fa.passed["placeholders"] =
        aug->add_option("--placeholders", fa.values.placeholders, "placeholder map TSV");

    CLI::App* per = app.add_subcommand("perturb",
                                       "emit replacement/blindness/swap instances");
    add_common(per, fp);
    fp.passed["dataset"] = per->add_option("--dataset", fp.values.dataset, "input CSV");
    fp.passed["lexicon"] = per->add_option("--lexicon", fp.values.lexicon, "lexicon TSV");
    fp.passed["placeholders"] =
        per->add_option("--placeholders", fp.values.placeholders, "placeholder map TSV");
    fp.passed["n-r"] = per->add_option("--n-r", fp.values.n_r, "replacement fraction");
    fp.passed["n-b"] = per->add_option("--n-b", fp.values.n_b, "blindness fraction");
    fp.passed["n-s"] = per->add_option("--n-s", fp.values.n_s, "swap fraction");
    fp.passed["placeholder"] = per->add_option("--placeholder",
                                               fp.values.placeholder_default,
                                               "default blindness placeholder");

    CLI::App* tr = app.add_subcommand("train", "train a classifier checkpoint");
    add_common(tr, ft);
    ft.passed["dataset"] = tr->add_option("--dataset", ft.values.dataset, "training CSV");
    ft.passed["lexicon"] = tr->add_option("--lexicon", ft.values.lexicon, "lexicon TSV");
    ft.passed["placeholders"] =
        tr->add_option("--placeholders", ft.values.placeholders, "placeholder map TSV");
    ft.passed["scheme"] = tr->add_option(
        "--scheme", ft.values.scheme, "plain | blindness | augmentation | logit-pairing");
    ft.passed["lambda1"] =
        tr->add_option("--lambda1", ft.values.lambda1, "replacement pairing penalty");
    ft.passed["lambda2"] =
        tr->add_option("--lambda2", ft.values.lambda2, "blindness pairing penalty");
    ft.passed["epochs"] = tr->add_option("--epochs", ft.values.epochs, "epoch count");
    ft.passed["batch-size"] =
        tr->add_option("--batch-size", ft.values.batch_size, "minibatch size");
    ft.passed["lr"] = tr->add_option("--lr", ft.values.learning_rate, "Adam step size");
    ft.passed["hidden-dim"] =
        tr->add_option("--hidden-dim", ft.values.hidden_dim, "hidden layer width");
    ft.passed["patience"] = tr->add_option("--patience",
                                           ft.values.early_stopping_patience,
                                           "early stopping patience (0 = off)");
    ft.passed["holdout-fraction"] =
        tr->add_option("--holdout-fraction", ft.values.holdout_fraction,
                       "stratified holdout share for early stopping");
    ft.passed["n-r"] = tr->add_option("--n-r", ft.values.n_r, "replacement fraction");
    ft.passed["n-b"] = tr->add_option("--n-b", ft.values.n_b, "blindness fraction");
    ft.passed["n-s"] = tr->add_option("--n-s", ft.values.n_s, "swap fraction");
    ft.passed["placeholder"] = tr->add_option("--placeholder",
                                              ft.values.placeholder_default,
                                              "default blindness placeholder");
    ft.passed["log"] = tr->add_option("--log", ft.values.log, "training log CSV path");

    CLI::App* ev = app.add_subcommand("evaluate",
                                      "score a checkpoint: CTF gap, accuracy, AUC");
    add_common(ev, fe);
    fe.passed["checkpoint"] =
        ev->add_option("--checkpoint", fe.values.checkpoint, "trained checkpoint");
    fe.passed["testset"] = ev->add_option("--testset", fe.values.testset, "test CSV");
    fe.passed["lexicon"] = ev->add_option("--lexicon", fe.values.lexicon, "lexicon TSV");
    fe.passed["placeholders"] =
        ev->add_option("--placeholders", fe.values.placeholders, "placeholder map TSV");
    fe.passed["cap"] = ev->add_option("--cap", fe.values.counterfactual_cap,
                                      "max counterfactuals per instance");
    ev->add_flag("--force", fe.force, "evaluate despite a lexicon hash mismatch");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (aug->parsed()) {
            return cmd_augment_pairs(fa);
        }
        if (per->parsed()) {
            return cmd_perturb(fp);
        }
        if (tr->parsed()) {
            return cmd_train(ft);
        }
        if (ev->parsed()) {
            return cmd_evaluate(fe);
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
