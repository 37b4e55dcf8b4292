#include "fairtext/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fairtext/errors.hpp"
#include "fairtext/io.hpp"

namespace fairtext {

Scorer::Scorer(const ModelParams& params, const EmbeddingModel& embeddings)
    : params_(&params), embeddings_(&embeddings) {}

void Scorer::enable_blinding(const IdentityLexicon* lexicon,
                             std::string placeholder_default) {
    blind_lexicon_ = lexicon;
    placeholder_default_ = std::move(placeholder_default);
}

double Scorer::logit(const Instance& x) const {
    if (blind_lexicon_ != nullptr) {
        return forward_logit(*params_, blind_instance(x, *blind_lexicon_,
                                                      placeholder_default_),
                             *embeddings_);
    }
    return forward_logit(*params_, x, *embeddings_);
}

double Scorer::prob(const Instance& x) const { return sigmoid(logit(x)); }

ScoreFn Scorer::fn() const {
    return [this](const Instance& x) { return prob(x); };
}

std::optional<double> ctf_gap_instance(const ScoreFn& prob, const Instance& x,
                                       const std::vector<Instance>& counterfactuals) {
    if (counterfactuals.empty()) {
        return std::nullopt;
    }
    const double fx = prob(x);
    double sum = 0.0;
    for (const Instance& xr : counterfactuals) {
        sum += std::abs(fx - prob(xr));
    }
    return sum / static_cast<double>(counterfactuals.size());
}

CtfDatasetResult ctf_gap_dataset(const ScoreFn& prob,
                                 const std::vector<Instance>& testset,
                                 const IdentityLexicon& lexicon, std::size_t cap) {
    if (testset.empty()) {
        throw ValidationError("test set is empty");
    }
    CtfDatasetResult r;
    double sum_pos = 0.0, sum_neg = 0.0;
    for (const Instance& x : testset) {
        const auto gap = ctf_gap_instance(prob, x, counterfactuals_all(x, lexicon, cap));
        if (!gap) {
            ++r.skipped;
            continue;
        }
        if (x.label == 1) {
            sum_pos += *gap;
            ++r.counted_pos;
        } else {
            sum_neg += *gap;
            ++r.counted_neg;
        }
    }
    const std::size_t counted = r.counted_pos + r.counted_neg;
    if (counted == 0) {
        throw ValidationError("no evaluable instances: no test instance has counterfactuals");
    }
    if (r.counted_pos > 0) {
        r.ctf_pos = sum_pos / static_cast<double>(r.counted_pos);
    }
    if (r.counted_neg > 0) {
        r.ctf_neg = sum_neg / static_cast<double>(r.counted_neg);
    }
    r.ctf_all = (sum_pos + sum_neg) / static_cast<double>(counted);
    return r;
}

AccuracyResult accuracy(const ScoreFn& prob, const std::vector<Instance>& testset,
                        double threshold) {
    if (testset.empty()) {
        throw ValidationError("test set is empty");
    }
    std::size_t n_pos = 0, n_neg = 0, hit_pos = 0, hit_neg = 0;
    for (const Instance& x : testset) {
        const int pred = prob(x) >= threshold ? 1 : 0;
        if (x.label == 1) {
            ++n_pos;
            hit_pos += static_cast<std::size_t>(pred == 1);
        } else {
            ++n_neg;
            hit_neg += static_cast<std::size_t>(pred == 0);
        }
    }
    AccuracyResult r;
    if (n_pos > 0) {
        r.acc_pos = static_cast<double>(hit_pos) / static_cast<double>(n_pos);
    }
    if (n_neg > 0) {
        r.acc_neg = static_cast<double>(hit_neg) / static_cast<double>(n_neg);
    }
    r.acc_all = static_cast<double>(hit_pos + hit_neg) /
                static_cast<double>(testset.size());
    return r;
}

double auc(const ScoreFn& prob, const std::vector<Instance>& testset) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(testset.size());
    std::size_t n_pos = 0;
    for (const Instance& x : testset) {
        scored.emplace_back(prob(x), x.label);
        n_pos += static_cast<std::size_t>(x.label);
    }
    const std::size_t n_neg = scored.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw ValidationError("AUC requires both classes in the test set");
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    // Midranks: tied scores share the mean of their rank range.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        while (j < scored.size() && scored[j].first == scored[i].first) {
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (scored[k].second == 1) {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    const double u = rank_sum_pos -
                     0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

CTFReport evaluate(const ScoreFn& prob, const std::vector<Instance>& testset,
                   const IdentityLexicon& lexicon, std::size_t cap) {
    CTFReport report;
    const CtfDatasetResult ctf = ctf_gap_dataset(prob, testset, lexicon, cap);
    report.ctf_pos = ctf.ctf_pos;
    report.ctf_neg = ctf.ctf_neg;
    report.ctf_all = ctf.ctf_all;
    report.counted_pos = ctf.counted_pos;
    report.counted_neg = ctf.counted_neg;
    report.skipped_no_counterfactual = ctf.skipped;
    const AccuracyResult acc = accuracy(prob, testset, 0.5);
    report.acc_pos = acc.acc_pos;
    report.acc_neg = acc.acc_neg;
    report.acc_all = acc.acc_all;
    report.auc = auc(prob, testset);
    return report;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
}

std::string opt6(const std::optional<double>& v) {
    return v ? fixed6(*v) : std::string("null");
}

std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
    return out;
}

}  // namespace

std::string report_to_json(const CTFReport& report) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"ctf_pos\": " << opt6(report.ctf_pos) << ",\n";
    out << "  \"ctf_neg\": " << opt6(report.ctf_neg) << ",\n";
    out << "  \"ctf_all\": " << fixed6(report.ctf_all) << ",\n";
    out << "  \"acc_pos\": " << opt6(report.acc_pos) << ",\n";
    out << "  \"acc_neg\": " << opt6(report.acc_neg) << ",\n";
    out << "  \"acc_all\": " << fixed6(report.acc_all) << ",\n";
    out << "  \"auc\": " << fixed6(report.auc) << ",\n";
    out << "  \"counted_pos\": " << report.counted_pos << ",\n";
    out << "  \"counted_neg\": " << report.counted_neg << ",\n";
    out << "  \"skipped_no_counterfactual\": " << report.skipped_no_counterfactual
        << ",\n";
    out << "  \"config_hash\": " << json_string(report.config_hash) << ",\n";
    out << "  \"lexicon_hash\": " << json_string(report.lexicon_hash) << ",\n";
    out << "  \"seed\": " << json_string(report.seed) << "\n";
    out << "}\n";
    return out.str();
}

void save_report_json(const CTFReport& report, const std::string& path) {
    write_file_atomic(path, report_to_json(report));
}

}  // namespace fairtext
