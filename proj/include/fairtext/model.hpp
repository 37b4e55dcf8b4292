#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairtext/embedding.hpp"
#include "fairtext/perturb.hpp"

namespace fairtext {

enum class TrainScheme { plain, blindness, augmentation, logit_pairing };

const char* scheme_name(TrainScheme scheme);
TrainScheme scheme_from_name(const std::string& name);

struct TrainConfig {
    TrainScheme scheme = TrainScheme::plain;
    double lambda1 = 0.0;  // weight of the replacement-pairing penalty
    double lambda2 = 0.0;  // weight of the blindness-pairing penalty
    int epochs = 25;
    int batch_size = 128;
    double learning_rate = 3e-4;
    int hidden_dim = 16;
    int early_stopping_patience = 0;  // 0 disables the holdout and early stop
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;  // throws ValidationError
};

// Bag-of-embeddings scorer: mean of token vectors -> one rectified hidden
// layer -> scalar logit. Parameters live in one flat double vector laid out
// as [W1 (hidden_dim rows of embed_dim), b1, w2, b2]; the Adam kernel steps
// the whole vector at once.
struct ModelParams {
    int embed_dim = 0;
    int hidden_dim = 0;
    std::vector<double> data;

    static ModelParams init(int embed_dim, int hidden_dim, std::uint64_t seed);

    std::size_t count() const { return data.size(); }
    const double* w1_row(int j) const { return data.data() + static_cast<std::size_t>(j) * embed_dim; }
    double* w1_row(int j) { return data.data() + static_cast<std::size_t>(j) * embed_dim; }
    const double* b1() const { return data.data() + static_cast<std::size_t>(hidden_dim) * embed_dim; }
    double* b1() { return data.data() + static_cast<std::size_t>(hidden_dim) * embed_dim; }
    const double* w2() const { return b1() + hidden_dim; }
    double* w2() { return b1() + hidden_dim; }
    double b2() const { return data.back(); }
    double& b2() { return data.back(); }

    bool finite() const;
};

// Mean of in-vocabulary token vectors, accumulated in double; all-OOV
// instances encode to the zero vector.
std::vector<double> encode(const EmbeddingModel& embeddings, const Instance& x);

double forward_logit_encoded(const ModelParams& params, const std::vector<double>& enc);
double forward_logit(const ModelParams& params, const Instance& x,
                     const EmbeddingModel& embeddings);

double sigmoid(double logit);
// Numerically stable binary cross entropy of one logit against label y.
double bce_with_logit(double logit, int label);

// Per-instance perturbation encodings used by the pairing penalty.
struct PairedEncodings {
    std::vector<std::vector<double>> replacements;  // encodings of phi_r(x)
    std::vector<std::vector<double>> blinded;       // encodings of phi_b(x)
};

// Batches are index lists into a shared encoding table, so the trainer can
// reuse one table across epochs. `paired` is parallel to `encs` (or empty);
// null entries mean no perturbations for that instance.

// Mean BCE over the batch.
double loss_plain(const ModelParams& params, const std::vector<std::vector<double>>& encs,
                  const std::vector<int>& labels, const std::vector<std::size_t>& batch);

// Mean BCE plus lambda1 * mean over instances of the exact mean absolute
// logit gap to the replacement set, plus the same for lambda2 over the
// blinded set. Instances with an empty set contribute zero to that term.
double loss_logit_pairing(const ModelParams& params,
                          const std::vector<std::vector<double>>& encs,
                          const std::vector<int>& labels,
                          const std::vector<std::size_t>& batch,
                          const std::vector<const PairedEncodings*>& paired,
                          double lambda1, double lambda2);

// Analytic gradient of the same objective; returns the loss. The lambda
// branches are skipped entirely when a lambda is zero, so plain gradients are
// bit-identical to logit_pairing with both lambdas zero.
double loss_and_grad(const ModelParams& params,
                     const std::vector<std::vector<double>>& encs,
                     const std::vector<int>& labels,
                     const std::vector<std::size_t>& batch,
                     const std::vector<const PairedEncodings*>& paired, double lambda1,
                     double lambda2, std::vector<double>& grad);

// Max over coordinates of |analytic - central difference| relative error.
double gradient_check(ModelParams& params, const std::vector<std::vector<double>>& encs,
                      const std::vector<int>& labels,
                      const std::vector<const PairedEncodings*>& paired, double lambda1,
                      double lambda2, double epsilon);

// All indices 0..n-1, for whole-set batches.
std::vector<std::size_t> full_batch(std::size_t n);

struct TrainingLogEntry {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> holdout_loss;
};

struct TrainingLog {
    std::vector<TrainingLogEntry> entries;
    int stopped_epoch = 0;  // last trained epoch (< epochs when stopped early)
};

void save_training_log_csv(const TrainingLog& log, const std::string& path);

struct TrainResult {
    ModelParams params;
    TrainingLog log;
};

// Scheme semantics: plain trains on the dataset as-is; blindness trains on
// the lexicon-blinded dataset (inference must blind the same way);
// augmentation appends every generated replacement/blinded/swapped instance;
// logit_pairing minimizes loss_logit_pairing over precomputed perturbation
// sets. The lexicon may be null only for the plain scheme.
TrainResult train(const EmbeddingModel& embeddings, const std::vector<Instance>& dataset,
                  const IdentityLexicon* lexicon, const TrainConfig& tcfg,
                  const PerturbationConfig& pcfg);

// Versioned binary container: magic, JSON header (dims, scheme, seed,
// provenance hashes), then the raw little-endian parameter doubles.
// Round-trips bit-exactly.
struct Checkpoint {
    ModelParams params;
    TrainScheme scheme = TrainScheme::plain;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string lexicon_hash;
    std::string placeholder_default = "IDENTITY_TOKEN";
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fairtext
