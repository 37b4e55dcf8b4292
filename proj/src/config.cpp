#include "fairtext/config.hpp"

#include <charconv>
#include <sstream>

#include <json.hpp>

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

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field,
              const std::string& origin) {
    auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    try {
        field = it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(origin + ": bad value for key '" + key + "'");
    }
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError(path + ": config must be a JSON object");
    }
    static const char* known_keys[] = {
        "embeddings",     "known_pairs",   "lexicon",
        "dataset",        "testset",       "checkpoint",
        "out",            "log",           "placeholders",
        "tau",            "top_k1",        "top_k2",
        "lemmatize",      "analogy_top_k", "n_r",
        "n_b",            "n_s",           "placeholder_default",
        "scheme",         "lambda1",       "lambda2",
        "epochs",         "batch_size",    "learning_rate",
        "hidden_dim",     "early_stopping_patience",
        "holdout_fraction", "seed",        "counterfactual_cap",
        "expected_dim",
    };
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known_keys) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ValidationError(path + ": unknown config key '" + key + "'");
        }
    }

    RunConfig c;
    read_key(j, "embeddings", c.embeddings, path);
    read_key(j, "known_pairs", c.known_pairs, path);
    read_key(j, "lexicon", c.lexicon, path);
    read_key(j, "dataset", c.dataset, path);
    read_key(j, "testset", c.testset, path);
    read_key(j, "checkpoint", c.checkpoint, path);
    read_key(j, "out", c.out, path);
    read_key(j, "log", c.log, path);
    read_key(j, "placeholders", c.placeholders, path);
    read_key(j, "tau", c.tau, path);
    read_key(j, "top_k1", c.top_k1, path);
    read_key(j, "top_k2", c.top_k2, path);
    read_key(j, "lemmatize", c.lemmatize, path);
    read_key(j, "analogy_top_k", c.analogy_top_k, path);
    read_key(j, "n_r", c.n_r, path);
    read_key(j, "n_b", c.n_b, path);
    read_key(j, "n_s", c.n_s, path);
    read_key(j, "placeholder_default", c.placeholder_default, path);
    read_key(j, "scheme", c.scheme, path);
    read_key(j, "lambda1", c.lambda1, path);
    read_key(j, "lambda2", c.lambda2, path);
    read_key(j, "epochs", c.epochs, path);
    read_key(j, "batch_size", c.batch_size, path);
    read_key(j, "learning_rate", c.learning_rate, path);
    read_key(j, "hidden_dim", c.hidden_dim, path);
    read_key(j, "early_stopping_patience", c.early_stopping_patience, path);
    read_key(j, "holdout_fraction", c.holdout_fraction, path);
    read_key(j, "seed", c.seed, path);
    read_key(j, "counterfactual_cap", c.counterfactual_cap, path);
    if (auto it = j.find("expected_dim"); it != j.end() && !it->is_null()) {
        int dim = 0;
        read_key(j, "expected_dim", dim, path);
        c.expected_dim = dim;
    }
    return c;
}

std::string RunConfig::canonical() const {
    // Path fields intentionally absent: artifacts must hash identically no
    // matter where their inputs live.
    std::ostringstream out;
    out << "analogy_top_k=" << analogy_top_k << '\n';
    out << "batch_size=" << batch_size << '\n';
    out << "counterfactual_cap=" << counterfactual_cap << '\n';
    out << "early_stopping_patience=" << early_stopping_patience << '\n';
    out << "epochs=" << epochs << '\n';
    out << "expected_dim=" << (expected_dim ? std::to_string(*expected_dim) : "")
        << '\n';
    out << "hidden_dim=" << hidden_dim << '\n';
    out << "holdout_fraction=" << format_double(holdout_fraction) << '\n';
    out << "lambda1=" << format_double(lambda1) << '\n';
    out << "lambda2=" << format_double(lambda2) << '\n';
    out << "learning_rate=" << format_double(learning_rate) << '\n';
    out << "lemmatize=" << (lemmatize ? "true" : "false") << '\n';
    out << "n_b=" << format_double(n_b) << '\n';
    out << "n_r=" << format_double(n_r) << '\n';
    out << "n_s=" << format_double(n_s) << '\n';
    out << "placeholder_default=" << placeholder_default << '\n';
    out << "scheme=" << scheme << '\n';
    out << "seed=" << seed << '\n';
    out << "tau=" << format_double(tau) << '\n';
    out << "top_k1=" << top_k1 << '\n';
    out << "top_k2=" << top_k2 << '\n';
    return out.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

std::string RunConfig::hash_hex() const { return hex16(hash()); }

AugmentationConfig RunConfig::augmentation_config() const {
    AugmentationConfig cfg;
    cfg.tau = tau;
    cfg.top_k1 = top_k1;
    cfg.top_k2 = top_k2;
    return cfg;
}

PerturbationConfig RunConfig::perturbation_config() const {
    PerturbationConfig cfg;
    cfg.n_r = n_r;
    cfg.n_b = n_b;
    cfg.n_s = n_s;
    cfg.seed = seed;
    cfg.placeholder_default = placeholder_default;
    return cfg;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.scheme = scheme_from_name(scheme);
    cfg.lambda1 = lambda1;
    cfg.lambda2 = lambda2;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = learning_rate;
    cfg.hidden_dim = hidden_dim;
    cfg.early_stopping_patience = early_stopping_patience;
    cfg.holdout_fraction = holdout_fraction;
    cfg.seed = seed;
    return cfg;
}

}  // namespace fairtext
