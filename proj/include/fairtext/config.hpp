#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fairtext/lexicon.hpp"
#include "fairtext/model.hpp"
#include "fairtext/perturb.hpp"

namespace fairtext {

// One flat configuration shared by every subcommand; a JSON config file plus
// flag overrides (flags win). The content hash covers every non-path field,
// so moving files around does not change artifact provenance.
struct RunConfig {
    // file paths (not hashed)
    std::string embeddings;
    std::string known_pairs;
    std::string lexicon;
    std::string dataset;
    std::string testset;
    std::string checkpoint;
    std::string out;
    std::string log;
    std::string placeholders;

    // pair augmentation
    double tau = 0.25;
    int top_k1 = 10;
    int top_k2 = 500;
    bool lemmatize = true;
    int analogy_top_k = 0;  // diagnostic pairs appended when > 0

    // perturbation
    double n_r = 0.5;
    double n_b = 0.1;
    double n_s = 0.1;
    std::string placeholder_default = "IDENTITY_TOKEN";

    // training
    std::string scheme = "plain";
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    int epochs = 25;
    int batch_size = 128;
    double learning_rate = 3e-4;
    int hidden_dim = 16;
    int early_stopping_patience = 0;
    double holdout_fraction = 0.1;

    // shared
    std::uint64_t seed = 0;
    int counterfactual_cap = 256;
    std::optional<int> expected_dim;

    // Parses the JSON object, rejecting unknown keys.
    static RunConfig from_file(const std::string& path);

    // Sorted key=value serialization of the non-path fields.
    std::string canonical() const;
    std::uint64_t hash() const;
    std::string hash_hex() const;

    AugmentationConfig augmentation_config() const;
    PerturbationConfig perturbation_config() const;
    TrainConfig train_config() const;
};

}  // namespace fairtext
