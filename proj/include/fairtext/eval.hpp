#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fairtext/lexicon.hpp"
#include "fairtext/model.hpp"
#include "fairtext/perturb.hpp"

namespace fairtext {

// Probability-of-positive function over instances.
using ScoreFn = std::function<double(const Instance&)>;

// Checkpointed model as a scorer. Blindness-scheme checkpoints blind the
// input through the lexicon before scoring, matching how they were trained.
class Scorer {
  public:
    Scorer(const ModelParams& params, const EmbeddingModel& embeddings);
    void enable_blinding(const IdentityLexicon* lexicon, std::string placeholder_default);

    double logit(const Instance& x) const;
    double prob(const Instance& x) const;
    ScoreFn fn() const;

  private:
    const ModelParams* params_;
    const EmbeddingModel* embeddings_;
    const IdentityLexicon* blind_lexicon_ = nullptr;
    std::string placeholder_default_;
};

// Mean |f(x) - f(x_r)| over the counterfactuals; empty when there are none.
std::optional<double> ctf_gap_instance(const ScoreFn& prob, const Instance& x,
                                       const std::vector<Instance>& counterfactuals);

struct CtfDatasetResult {
    std::optional<double> ctf_pos;  // empty when no counted instance of the class
    std::optional<double> ctf_neg;
    double ctf_all = 0.0;
    std::size_t counted_pos = 0;
    std::size_t counted_neg = 0;
    std::size_t skipped = 0;  // instances with no counterfactuals
};

// Counterfactuals come from counterfactuals_all(x, lexicon, cap). Instances
// without any are excluded from every mean and counted as skipped; all
// skipped is an error.
CtfDatasetResult ctf_gap_dataset(const ScoreFn& prob,
                                 const std::vector<Instance>& testset,
                                 const IdentityLexicon& lexicon, std::size_t cap);

struct AccuracyResult {
    std::optional<double> acc_pos;  // per-class accuracy; empty if class absent
    std::optional<double> acc_neg;
    double acc_all = 0.0;
};

// Prediction is 1 iff prob >= threshold (ties predict positive).
AccuracyResult accuracy(const ScoreFn& prob, const std::vector<Instance>& testset,
                        double threshold = 0.5);

// Mann-Whitney rank statistic with midrank tie handling: the probability that
// a random positive outscores a random negative, ties counting one half.
// Requires both classes.
double auc(const ScoreFn& prob, const std::vector<Instance>& testset);

struct CTFReport {
    std::optional<double> ctf_pos;
    std::optional<double> ctf_neg;
    double ctf_all = 0.0;
    std::optional<double> acc_pos;
    std::optional<double> acc_neg;
    double acc_all = 0.0;
    double auc = 0.0;
    std::size_t counted_pos = 0;
    std::size_t counted_neg = 0;
    std::size_t skipped_no_counterfactual = 0;
    std::string config_hash;
    std::string lexicon_hash;
    std::string seed;
};

CTFReport evaluate(const ScoreFn& prob, const std::vector<Instance>& testset,
                   const IdentityLexicon& lexicon, std::size_t cap);

// Single JSON object, stable key order, metrics with 6 decimal places,
// undefined per-class fields as null.
std::string report_to_json(const CTFReport& report);
void save_report_json(const CTFReport& report, const std::string& path);

}  // namespace fairtext
