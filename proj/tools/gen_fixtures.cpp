// Regenerates everything under data/: a synthetic embedding table with
// engineered identity clusters, a label-biased toy corpus, seed pair lists,
// and the config the end-to-end tests run with. Deterministic; run with the
// target directory as the only argument.

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fairtext/io.hpp"
#include "fairtext/rng.hpp"

namespace {

using fairtext::DetRng;
using fairtext::derive_seed;

constexpr std::uint64_t kMasterSeed = 7;
constexpr int kDim = 16;

struct Cluster {
    const char* name;
    int anchor_dim;           // component set to 1.0 for every member
    int split_dim;            // component split +/- kSplit between the sides
    std::vector<const char*> side_a;
    std::vector<const char*> side_b;
};

constexpr double kSplit = 0.35;
constexpr double kNoise = 0.12;

// Identity clusters: 14 mutually-similar members each, far from the other
// clusters, with the two substitutable sides separated inside the cluster so
// replacements actually move the encoder.
const std::vector<Cluster> identity_clusters = {
    {"gender", 2, 0,
     {"man", "boy", "he", "guy", "male", "king", "gentleman"},
     {"woman", "girl", "she", "lady", "female", "queen", "duchess"}},
    {"religion", 3, 1,
     {"muslim", "buddhist", "hindu", "atheist", "islamic", "sikh", "pagan"},
     {"christian", "jewish", "catholic", "protestant", "mormon", "methodist",
      "baptist"}},
    {"nationality", 4, 0,
     {"chinese", "mexican", "russian", "korean", "indian", "brazilian", "polish"},
     {"american", "german", "french", "japanese", "italian", "canadian", "spanish"}},
};

const std::vector<const char*> toxic_words = {
    "terrible", "awful",      "horrible", "stupid", "idiot", "dumb",     "trash",
    "garbage",  "worst",      "nasty",    "ugly",   "vile",  "pathetic", "hateful"};
const std::vector<const char*> benign_words = {
    "great",    "good", "wonderful", "lovely",  "kind",     "smart",   "brilliant",
    "helpful",  "friendly", "nice",  "excellent", "amazing", "pleasant", "generous"};
const std::vector<const char*> filler_words = {
    "the",  "a",      "is",   "are",  "was",   "should", "would",
    "people", "person", "world", "day", "time", "thing",  "very",
    "really", "said",  "says", "friend", "neighbor", "to", "of",
    "and",  "in",     "on",   "with", "that",  "you",    "they"};

std::string format_component(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
}

void emit_row(std::ostringstream& out, const std::string& token,
              const std::vector<double>& vec) {
    out << token;
    for (double v : vec) {
        out << ' ' << format_component(v);
    }
    out << '\n';
}

std::vector<double> noisy(DetRng& rng, double scale) {
    std::vector<double> v(kDim);
    for (double& c : v) {
        c = rng.uniform(-scale, scale);
    }
    return v;
}

void write_embeddings(const std::filesystem::path& dir) {
    DetRng rng(derive_seed(kMasterSeed, "embeddings"));
    std::ostringstream out;
    for (const Cluster& c : identity_clusters) {
        for (int side = 0; side < 2; ++side) {
            const auto& members = side == 0 ? c.side_a : c.side_b;
            const double split = side == 0 ? kSplit : -kSplit;
            for (const char* token : members) {
                std::vector<double> v = noisy(rng, kNoise);
                v[c.anchor_dim] += 1.0;
                v[c.split_dim] += split;
                emit_row(out, token, v);
            }
        }
    }
    int content_dim = 5;
    for (const auto* words : {&toxic_words, &benign_words}) {
        for (const char* token : *words) {
            std::vector<double> v = noisy(rng, kNoise);
            v[content_dim] += 1.0;
            emit_row(out, token, v);
        }
        ++content_dim;
    }
    std::size_t i = 0;
    for (const char* token : filler_words) {
        std::vector<double> v = noisy(rng, kNoise);
        v[7 + (i % 9)] += 0.8;
        emit_row(out, token, v);
        ++i;
    }
    fairtext::write_file_atomic((dir / "fixture_embeddings.txt").string(), out.str());
}

const Cluster& pick_cluster(DetRng& rng) {
    return identity_clusters[rng.bounded(identity_clusters.size())];
}

// Identity term for a label: side A goes with the positive class 90% of the
// time, side B with the negative class, which is the planted unintended bias.
std::string biased_identity(DetRng& rng, int label) {
    const Cluster& c = pick_cluster(rng);
    const bool side_a = (rng.uniform() < 0.9) == (label == 1);
    const auto& side = side_a ? c.side_a : c.side_b;
    return side[rng.bounded(side.size())];
}

// Content words predict the label, except that a noise fraction of draws come
// from the wrong class's list. The training corpus uses a high noise rate so
// the 90%-reliable identity shortcut genuinely lowers training loss; the test
// corpus is clean, so a model that ignores identity can still score perfectly.
std::string content_word(DetRng& rng, int label, double noise) {
    const int effective = rng.uniform() < noise ? 1 - label : label;
    const auto& words = effective == 1 ? toxic_words : benign_words;
    return words[rng.bounded(words.size())];
}

std::string filler(DetRng& rng) {
    return filler_words[rng.bounded(filler_words.size())];
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

void write_corpus(const std::filesystem::path& dir, const char* name,
                  const char* id_prefix, std::size_t rows, double content_noise) {
    DetRng rng(derive_seed(kMasterSeed, std::string("corpus:") + name));
    std::ostringstream out;
    out << "id,text,label\n";
    for (std::size_t i = 0; i < rows; ++i) {
        const int label = static_cast<int>(i % 2);
        const std::string c1 = content_word(rng, label, content_noise);
        std::string text;
        const std::uint64_t tmpl = rng.bounded(6);
        switch (tmpl) {
            case 0:
                text = "you are a " + c1 + " " + biased_identity(rng, label) + " !";
                break;
            case 1:
                text = "that " + biased_identity(rng, label) + " " + filler(rng) +
                       " is really " + c1 + " .";
                break;
            case 2:
                text = "the " + biased_identity(rng, label) + " people are " + c1 +
                       " and " + content_word(rng, label, content_noise) + " .";
                break;
            case 3:
                text = "my " + biased_identity(rng, label) + " friend said something " +
                       c1 + " !";
                break;
            case 4:  // two identity terms
                text = "the " + biased_identity(rng, label) + " and the " +
                       biased_identity(rng, label) + " are " + c1 + " .";
                break;
            default:  // no identity term
                text = "the " + filler(rng) + " " + filler(rng) + " is really " + c1 +
                       " .";
                break;
        }
        char id[32];
        std::snprintf(id, sizeof(id), "%s%04zu", id_prefix, i + 1);
        out << id << ',' << csv_quote(text) << ',' << label << '\n';
    }
    fairtext::write_file_atomic((dir / name).string(), out.str());
}

void write_seed_files(const std::filesystem::path& dir) {
    // Seeds inside the fixture vocabulary, one per cluster.
    fairtext::write_file_atomic(
        (dir / "fixture_known_pairs.tsv").string(),
        "first\tsecond\n"
        "man\twoman\n"
        "muslim\tchristian\n"
        "chinese\tamerican\n");
    // The full-scale seed list for use with a real embedding table.
    fairtext::write_file_atomic((dir / "known_pairs.tsv").string(),
                                "first\tsecond\n"
                                "man\twoman\n"
                                "democrat\trepublican\n"
                                "trump\tbiden\n"
                                "blacks\twhites\n"
                                "asian\tlatino\n"
                                "china\tamerica\n"
                                "africa\teurope\n"
                                "christian\tjewish\n"
                                "buddhist\tatheist\n"
                                "homosexual\theterosexual\n");
    fairtext::write_file_atomic((dir / "placeholders.tsv").string(),
                                "term\tplaceholder\n"
                                "man\tGENDER_TOKEN\n"
                                "woman\tGENDER_TOKEN\n"
                                "muslim\tRELIGION_TOKEN\n"
                                "christian\tRELIGION_TOKEN\n");
}

void write_config(const std::filesystem::path& dir) {
    fairtext::write_file_atomic((dir / "fixture_config.json").string(),
                                R"({
  "tau": 0.25,
  "top_k1": 6,
  "top_k2": 12,
  "n_r": 0.5,
  "n_b": 0.1,
  "n_s": 0.1,
  "epochs": 60,
  "batch_size": 32,
  "learning_rate": 0.02,
  "hidden_dim": 16,
  "seed": 42,
  "counterfactual_cap": 256,
  "expected_dim": 16
}
)");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <output-dir>\n", argv[0]);
        return 1;
    }
    const std::filesystem::path dir(argv[1]);
    std::filesystem::create_directories(dir);
    write_embeddings(dir);
    write_corpus(dir, "corpus_train.csv", "tr", 200, 0.35);
    write_corpus(dir, "corpus_test.csv", "te", 80, 0.0);
    write_seed_files(dir);
    write_config(dir);
    std::printf("fixtures written to %s\n", dir.string().c_str());
    return 0;
}
