#include "fairtext/model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fairtext/errors.hpp"
#include "fairtext/io.hpp"
#include "fairtext/rng.hpp"
#include "fairtext/simd.hpp"

namespace fairtext {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

}  // namespace

const char* scheme_name(TrainScheme scheme) {
    switch (scheme) {
        case TrainScheme::plain: return "plain";
        case TrainScheme::blindness: return "blindness";
        case TrainScheme::augmentation: return "augmentation";
        case TrainScheme::logit_pairing: return "logit_pairing";
    }
    return "unknown";
}

TrainScheme scheme_from_name(const std::string& name) {
    std::string n = name;
    std::replace(n.begin(), n.end(), '-', '_');
    if (n == "plain") {
        return TrainScheme::plain;
    }
    if (n == "blindness") {
        return TrainScheme::blindness;
    }
    if (n == "augmentation") {
        return TrainScheme::augmentation;
    }
    if (n == "logit_pairing") {
        return TrainScheme::logit_pairing;
    }
    throw ValidationError("unknown training scheme: '" + name + "'");
}

void TrainConfig::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw ValidationError("lambda penalties must be nonnegative");
    }
    if (epochs < 1) {
        throw ValidationError("epochs must be positive");
    }
    if (batch_size < 1) {
        throw ValidationError("batch_size must be positive");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("learning_rate must be positive and finite");
    }
    if (hidden_dim < 1) {
        throw ValidationError("hidden_dim must be positive");
    }
    if (early_stopping_patience < 0) {
        throw ValidationError("early_stopping_patience must be nonnegative");
    }
    if (early_stopping_patience > 0 &&
        (!(holdout_fraction > 0.0) || holdout_fraction >= 1.0)) {
        throw ValidationError("holdout_fraction must lie in (0, 1)");
    }
}

ModelParams ModelParams::init(int embed_dim, int hidden_dim, std::uint64_t seed) {
    if (embed_dim < 1 || hidden_dim < 1) {
        throw ValidationError("model dimensions must be positive");
    }
    ModelParams p;
    p.embed_dim = embed_dim;
    p.hidden_dim = hidden_dim;
    p.data.resize(static_cast<std::size_t>(hidden_dim) * embed_dim + 2 * hidden_dim + 1);
    DetRng rng(derive_seed(seed, "init"));
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    std::size_t i = 0;
    const std::size_t layer1 = static_cast<std::size_t>(hidden_dim) * embed_dim +
                               static_cast<std::size_t>(hidden_dim);
    for (; i < layer1; ++i) {
        p.data[i] = rng.uniform(-bound1, bound1);
    }
    for (; i < p.data.size(); ++i) {
        p.data[i] = rng.uniform(-bound2, bound2);
    }
    return p;
}

bool ModelParams::finite() const {
    return std::all_of(data.begin(), data.end(),
                       [](double v) { return std::isfinite(v); });
}

std::vector<double> encode(const EmbeddingModel& embeddings, const Instance& x) {
    const int d = embeddings.dim();
    std::vector<double> enc(static_cast<std::size_t>(d), 0.0);
    std::size_t count = 0;
    for (const std::string& t : x.tokens) {
        if (const auto idx = embeddings.index_of(t)) {
            simd::kernels().acc_f32(enc.data(), embeddings.row(*idx).data(),
                                    enc.size());
            ++count;
        }
    }
    if (count > 0) {
        const double inv = 1.0 / static_cast<double>(count);
        for (double& v : enc) {
            v *= inv;
        }
    }
    return enc;
}

namespace {

// Forward pass keeping the pre-activation vector for backprop.
double forward_pre(const ModelParams& p, const double* enc, std::vector<double>& pre,
                   std::vector<double>& act) {
    const auto& k = simd::kernels();
    const int h = p.hidden_dim;
    pre.resize(static_cast<std::size_t>(h));
    act.resize(static_cast<std::size_t>(h));
    for (int j = 0; j < h; ++j) {
        pre[j] = p.b1()[j] + k.dot_f64(p.w1_row(j), enc,
                                       static_cast<std::size_t>(p.embed_dim));
        act[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    }
    return p.b2() + k.dot_f64(p.w2(), act.data(), static_cast<std::size_t>(h));
}

// Accumulates d(loss)/d(params) for one forward pass with upstream dg.
void backprop(const ModelParams& p, const double* enc, const std::vector<double>& pre,
              const std::vector<double>& act, double dg, std::vector<double>& grad) {
    const auto& k = simd::kernels();
    const int h = p.hidden_dim;
    const int d = p.embed_dim;
    const std::size_t off_b1 = static_cast<std::size_t>(h) * d;
    const std::size_t off_w2 = off_b1 + h;
    for (int j = 0; j < h; ++j) {
        grad[off_w2 + j] += dg * act[j];
    }
    grad.back() += dg;
    for (int j = 0; j < h; ++j) {
        if (pre[j] > 0.0) {
            const double dpre = dg * p.w2()[j];
            k.axpy_f64(grad.data() + static_cast<std::size_t>(j) * d, dpre, enc,
                       static_cast<std::size_t>(d));
            grad[off_b1 + j] += dpre;
        }
    }
}

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

// Shared evaluator: computes the objective and, when `grad` is non-null, its
// gradient. Written once so the loss and the gradient can never drift apart.
double objective(const ModelParams& params, const std::vector<std::vector<double>>& encs,
                 const std::vector<int>& labels, const std::vector<std::size_t>& batch,
                 const std::vector<const PairedEncodings*>& paired, double lambda1,
                 double lambda2, std::vector<double>* grad) {
    if (batch.empty()) {
        throw ValidationError("batch must be nonempty");
    }
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw ValidationError("lambda penalties must be nonnegative");
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<double> pre, act, pre_r, act_r;
    double total = 0.0;
    for (std::size_t idx : batch) {
        const std::vector<double>& enc = encs[idx];
        const double g = forward_pre(params, enc.data(), pre, act);
        total += bce_with_logit(g, labels[idx]) * inv_n;
        if (grad != nullptr) {
            const double dg = (sigmoid(g) - static_cast<double>(labels[idx])) * inv_n;
            backprop(params, enc.data(), pre, act, dg, *grad);
        }
        const PairedEncodings* ps =
            idx < paired.size() ? paired[idx] : nullptr;
        if (ps == nullptr) {
            continue;
        }
        auto penalty = [&](const std::vector<std::vector<double>>& others,
                           double lambda) {
            if (lambda == 0.0 || others.empty()) {
                return;
            }
            const double inv_m = 1.0 / static_cast<double>(others.size());
            double gap_sum = 0.0;
            int sign_sum = 0;
            for (const std::vector<double>& enc_r : others) {
                const double g_r = forward_pre(params, enc_r.data(), pre_r, act_r);
                const double diff = g - g_r;
                gap_sum += std::abs(diff);
                const int s = sign_of(diff);
                sign_sum += s;
                if (grad != nullptr && s != 0) {
                    backprop(params, enc_r.data(), pre_r, act_r,
                             -lambda * inv_n * inv_m * static_cast<double>(s), *grad);
                }
            }
            total += lambda * inv_n * (gap_sum * inv_m);
            if (grad != nullptr && sign_sum != 0) {
                backprop(params, enc.data(), pre, act,
                         lambda * inv_n * inv_m * static_cast<double>(sign_sum), *grad);
            }
        };
        penalty(ps->replacements, lambda1);
        penalty(ps->blinded, lambda2);
    }
    return total;
}

}  // namespace

double sigmoid(double logit) {
    if (logit >= 0.0) {
        return 1.0 / (1.0 + std::exp(-logit));
    }
    const double e = std::exp(logit);
    return e / (1.0 + e);
}

double bce_with_logit(double logit, int label) {
    // softplus(logit) - y*logit, computed without overflow
    const double sp = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
    return sp - static_cast<double>(label) * logit;
}

double forward_logit_encoded(const ModelParams& params, const std::vector<double>& enc) {
    std::vector<double> pre, act;
    return forward_pre(params, enc.data(), pre, act);
}

double forward_logit(const ModelParams& params, const Instance& x,
                     const EmbeddingModel& embeddings) {
    const std::vector<double> enc = encode(embeddings, x);
    return forward_logit_encoded(params, enc);
}

std::vector<std::size_t> full_batch(std::size_t n) {
    std::vector<std::size_t> batch(n);
    for (std::size_t i = 0; i < n; ++i) {
        batch[i] = i;
    }
    return batch;
}

double loss_plain(const ModelParams& params, const std::vector<std::vector<double>>& encs,
                  const std::vector<int>& labels, const std::vector<std::size_t>& batch) {
    return objective(params, encs, labels, batch, {}, 0.0, 0.0, nullptr);
}

double loss_logit_pairing(const ModelParams& params,
                          const std::vector<std::vector<double>>& encs,
                          const std::vector<int>& labels,
                          const std::vector<std::size_t>& batch,
                          const std::vector<const PairedEncodings*>& paired,
                          double lambda1, double lambda2) {
    return objective(params, encs, labels, batch, paired, lambda1, lambda2, nullptr);
}

double loss_and_grad(const ModelParams& params,
                     const std::vector<std::vector<double>>& encs,
                     const std::vector<int>& labels,
                     const std::vector<std::size_t>& batch,
                     const std::vector<const PairedEncodings*>& paired, double lambda1,
                     double lambda2, std::vector<double>& grad) {
    grad.assign(params.count(), 0.0);
    return objective(params, encs, labels, batch, paired, lambda1, lambda2, &grad);
}

double gradient_check(ModelParams& params, const std::vector<std::vector<double>>& encs,
                      const std::vector<int>& labels,
                      const std::vector<const PairedEncodings*>& paired, double lambda1,
                      double lambda2, double epsilon) {
    if (epsilon < 1e-8 || epsilon > 1e-3) {
        throw ValidationError("gradient_check epsilon must lie in [1e-8, 1e-3]");
    }
    const std::vector<std::size_t> batch = full_batch(encs.size());
    std::vector<double> grad;
    loss_and_grad(params, encs, labels, batch, paired, lambda1, lambda2, grad);
    double worst = 0.0;
    for (std::size_t k = 0; k < params.data.size(); ++k) {
        const double saved = params.data[k];
        params.data[k] = saved + epsilon;
        const double up =
            loss_logit_pairing(params, encs, labels, batch, paired, lambda1, lambda2);
        params.data[k] = saved - epsilon;
        const double down =
            loss_logit_pairing(params, encs, labels, batch, paired, lambda1, lambda2);
        params.data[k] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double rel = std::abs(grad[k] - numeric) /
                           std::max(1e-12, std::abs(grad[k]) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

void save_training_log_csv(const TrainingLog& log, const std::string& path) {
    std::ostringstream body;
    body << "epoch,train_loss,train_accuracy,holdout_loss\n";
    for (const TrainingLogEntry& e : log.entries) {
        body << e.epoch << ',' << format_double(e.train_loss) << ','
             << format_double(e.train_accuracy) << ','
             << (e.holdout_loss ? format_double(*e.holdout_loss) : std::string())
             << '\n';
    }
    write_file_atomic(path, body.str());
}

namespace {

std::vector<std::size_t> stratified_holdout(const std::vector<int>& labels,
                                            const std::vector<std::size_t>& pool,
                                            double fraction, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t idx : pool) {
        (labels[idx] == 1 ? pos : neg).push_back(idx);
    }
    DetRng rng(derive_seed(seed, "holdout"));
    std::vector<std::size_t> held;
    for (auto* cls : {&pos, &neg}) {
        if (cls->empty()) {
            continue;
        }
        const double raw = fraction * static_cast<double>(cls->size());
        auto want = static_cast<std::size_t>(raw);
        if (static_cast<double>(want) < raw) {
            ++want;
        }
        want = std::max<std::size_t>(want, 1);
        want = std::min(want, cls->size() - 1);  // keep a training member per class
        if (want == 0) {
            continue;
        }
        for (std::size_t i : rng.sample_without_replacement(cls->size(), want)) {
            held.push_back((*cls)[i]);
        }
    }
    std::sort(held.begin(), held.end());
    return held;
}

}  // namespace

TrainResult train(const EmbeddingModel& embeddings, const std::vector<Instance>& dataset,
                  const IdentityLexicon* lexicon, const TrainConfig& tcfg,
                  const PerturbationConfig& pcfg) {
    tcfg.validate();
    pcfg.validate();
    if (dataset.empty()) {
        throw ValidationError("dataset is empty");
    }
    {
        std::size_t pos = 0;
        for (const Instance& x : dataset) {
            pos += static_cast<std::size_t>(x.label);
        }
        if (pos == 0 || pos == dataset.size()) {
            throw ValidationError("dataset must contain both classes");
        }
    }
    if (tcfg.scheme != TrainScheme::plain && lexicon == nullptr) {
        throw ValidationError(std::string("scheme ") + scheme_name(tcfg.scheme) +
                              " requires a lexicon");
    }

    // Scheme-specific training pool.
    std::vector<Instance> pool;
    switch (tcfg.scheme) {
        case TrainScheme::plain:
        case TrainScheme::logit_pairing:
            pool = dataset;
            break;
        case TrainScheme::blindness:
            pool.reserve(dataset.size());
            for (const Instance& x : dataset) {
                pool.push_back(blind_instance(x, *lexicon, pcfg.placeholder_default));
            }
            break;
        case TrainScheme::augmentation:
            pool = dataset;
            for (const Instance& x : dataset) {
                PerturbationSet set = generate_all(x, *lexicon, pcfg);
                for (auto& [p, inst] : set.replacements) {
                    pool.push_back(std::move(inst));
                }
                for (auto& [t, inst] : set.blinded) {
                    pool.push_back(std::move(inst));
                }
                for (auto& [p, inst] : set.swapped) {
                    pool.push_back(std::move(inst));
                }
            }
            break;
    }

    std::vector<std::vector<double>> encs(pool.size());
    std::vector<int> labels(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        encs[i] = encode(embeddings, pool[i]);
        labels[i] = pool[i].label;
    }

    std::vector<std::size_t> train_idx = full_batch(pool.size());
    std::vector<std::size_t> holdout_idx;
    if (tcfg.early_stopping_patience > 0) {
        holdout_idx = stratified_holdout(labels, train_idx, tcfg.holdout_fraction,
                                         tcfg.seed);
        std::vector<std::size_t> remaining;
        remaining.reserve(train_idx.size() - holdout_idx.size());
        std::size_t h = 0;
        for (std::size_t idx : train_idx) {
            if (h < holdout_idx.size() && holdout_idx[h] == idx) {
                ++h;
            } else {
                remaining.push_back(idx);
            }
        }
        train_idx = std::move(remaining);
    }

    // Pairing sets, only when the objective actually uses them.
    std::vector<PairedEncodings> paired_storage;
    std::vector<const PairedEncodings*> paired;
    if (tcfg.scheme == TrainScheme::logit_pairing &&
        (tcfg.lambda1 != 0.0 || tcfg.lambda2 != 0.0)) {
        paired_storage.resize(pool.size());
        paired.assign(pool.size(), nullptr);
        for (std::size_t idx : train_idx) {
            PairedEncodings& pe = paired_storage[idx];
            if (tcfg.lambda1 != 0.0) {
                for (const auto& [p, inst] : generate_ipr(pool[idx], *lexicon, pcfg)) {
                    pe.replacements.push_back(encode(embeddings, inst));
                }
            }
            if (tcfg.lambda2 != 0.0) {
                for (const auto& [t, inst] : generate_itb(pool[idx], *lexicon, pcfg)) {
                    pe.blinded.push_back(encode(embeddings, inst));
                }
            }
            paired[idx] = &pe;
        }
    }

    ModelParams params = ModelParams::init(embeddings.dim(), tcfg.hidden_dim, tcfg.seed);
    const std::size_t n_params = params.count();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grad(n_params, 0.0);
    DetRng shuffle_rng(derive_seed(tcfg.seed, "shuffle"));
    std::vector<std::size_t> perm = train_idx;

    TrainResult result;
    TrainingLog& log = result.log;
    long step = 0;
    ModelParams best_params = params;
    double best_holdout = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;
    bool stopped_early = false;

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        shuffle_rng.shuffle(perm);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < perm.size();
             start += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t stop =
                std::min(perm.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            const std::vector<std::size_t> batch(perm.begin() + start,
                                                 perm.begin() + stop);
            const double batch_loss = loss_and_grad(params, encs, labels, batch, paired,
                                                    tcfg.lambda1, tcfg.lambda2, grad);
            if (!std::isfinite(batch_loss)) {
                throw RuntimeFailure("training diverged at epoch " +
                                     std::to_string(epoch));
            }
            loss_sum += batch_loss * static_cast<double>(batch.size());
            ++step;
            const double bc1 = 1.0 / (1.0 - std::pow(kBeta1, static_cast<double>(step)));
            const double bc2 = 1.0 / (1.0 - std::pow(kBeta2, static_cast<double>(step)));
            simd::kernels().adam_step_f64(params.data.data(), m.data(), v.data(),
                                          grad.data(), n_params, kBeta1, kBeta2,
                                          tcfg.learning_rate, bc1, bc2, kAdamEps);
        }
        if (!params.finite()) {
            throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch));
        }

        TrainingLogEntry entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(perm.size());
        std::size_t correct = 0;
        for (std::size_t idx : train_idx) {
            const double p = sigmoid(forward_logit_encoded(params, encs[idx]));
            const int pred = p >= 0.5 ? 1 : 0;
            correct += static_cast<std::size_t>(pred == labels[idx]);
        }
        entry.train_accuracy =
            static_cast<double>(correct) / static_cast<double>(train_idx.size());
        log.stopped_epoch = epoch;

        if (!holdout_idx.empty()) {
            entry.holdout_loss = loss_plain(params, encs, labels, holdout_idx);
            if (*entry.holdout_loss < best_holdout) {
                best_holdout = *entry.holdout_loss;
                best_params = params;
                bad_epochs = 0;
            } else {
                ++bad_epochs;
            }
            log.entries.push_back(entry);
            if (bad_epochs >= tcfg.early_stopping_patience) {
                stopped_early = true;
                break;
            }
        } else {
            log.entries.push_back(entry);
        }
    }

    if (!holdout_idx.empty()) {
        params = best_params;  // keep the best holdout epoch, stopped early or not
    }
    (void)stopped_early;
    result.params = std::move(params);
    return result;
}

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'T', 'X', 'C', 'K', 'P', 'T', '\n'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i]))
             << (8 * i);
    }
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
    nlohmann::json header;
    header["format_version"] = 1;
    header["embed_dim"] = cp.params.embed_dim;
    header["hidden_dim"] = cp.params.hidden_dim;
    header["scheme"] = scheme_name(cp.scheme);
    header["seed"] = cp.seed;
    header["config_hash"] = cp.config_hash;
    header["lexicon_hash"] = cp.lexicon_hash;
    header["placeholder_default"] = cp.placeholder_default;
    header["param_count"] = cp.params.count();
    const std::string head = header.dump();

    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, static_cast<std::uint32_t>(head.size()));
    out += head;
    for (double value : cp.params.data) {
        const auto bits = std::bit_cast<std::uint64_t>(value);
        for (int i = 0; i < 8; ++i) {
            out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
        }
    }
    write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string raw = read_file(path);
    if (raw.size() < sizeof(kCheckpointMagic) + 4 ||
        std::memcmp(raw.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw ValidationError(path + ": not a checkpoint file");
    }
    const std::uint32_t head_len = get_u32(raw, sizeof(kCheckpointMagic));
    const std::size_t head_off = sizeof(kCheckpointMagic) + 4;
    if (raw.size() < head_off + head_len) {
        throw ValidationError(path + ": truncated checkpoint header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(raw.substr(head_off, head_len));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad checkpoint header: " + e.what());
    }
    Checkpoint cp;
    try {
        if (header.at("format_version").get<int>() != 1) {
            throw ValidationError(path + ": unsupported checkpoint version");
        }
        cp.params.embed_dim = header.at("embed_dim").get<int>();
        cp.params.hidden_dim = header.at("hidden_dim").get<int>();
        cp.scheme = scheme_from_name(header.at("scheme").get<std::string>());
        cp.seed = header.at("seed").get<std::uint64_t>();
        cp.config_hash = header.at("config_hash").get<std::string>();
        cp.lexicon_hash = header.at("lexicon_hash").get<std::string>();
        cp.placeholder_default = header.at("placeholder_default").get<std::string>();
        const auto count = header.at("param_count").get<std::size_t>();
        const std::size_t expect = static_cast<std::size_t>(cp.params.hidden_dim) *
                                       cp.params.embed_dim +
                                   2 * static_cast<std::size_t>(cp.params.hidden_dim) + 1;
        if (cp.params.embed_dim < 1 || cp.params.hidden_dim < 1 || count != expect) {
            throw ValidationError(path + ": inconsistent checkpoint dimensions");
        }
        const std::size_t body_off = head_off + head_len;
        if (raw.size() != body_off + count * 8) {
            throw ValidationError(path + ": checkpoint payload size mismatch");
        }
        cp.params.data.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) {
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(
                            raw[body_off + i * 8 + b]))
                        << (8 * b);
            }
            cp.params.data[i] = std::bit_cast<double>(bits);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad checkpoint header: " + e.what());
    }
    return cp;
}

}  // namespace fairtext
