#include "specd/models.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "specd/rng.hpp"

namespace specd {

namespace {

constexpr char kWordEotLabel[] = "\x1e";  // cannot appear in whitespace-split words

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

TokenizedCorpus tokenize_corpus(const std::string& text, TokenizerMode mode) {
    TokenizedCorpus out;
    if (mode == TokenizerMode::Byte) {
        out.spec.mode = TokenizerMode::Byte;
        out.spec.vocabulary = Vocabulary::plain(257);
        out.tokens.reserve(text.size());
        for (unsigned char c : text) out.tokens.push_back(static_cast<TokenId>(c));
        return out;
    }
    std::vector<std::string> words;
    std::istringstream iss(text);
    std::string w;
    while (iss >> w) words.push_back(w);
    std::set<std::string> distinct(words.begin(), words.end());
    std::vector<std::string> labels(distinct.begin(), distinct.end());
    labels.push_back(kWordEotLabel);
    std::map<std::string, TokenId> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<TokenId>(i);
    out.spec.mode = TokenizerMode::Word;
    out.spec.vocabulary = Vocabulary::with_labels(std::move(labels));
    out.tokens.reserve(words.size());
    for (const auto& word : words) out.tokens.push_back(index.at(word));
    return out;
}

Distribution NGramModel::smooth(const CountRow& row) const {
    double total = 0.0;
    for (const auto& [tok, c] : row) total += static_cast<double>(c);
    const double denom = total + alpha_ * static_cast<double>(vocab_.size);
    std::vector<double> probs(vocab_.size, alpha_ / denom);
    for (const auto& [tok, c] : row) {
        probs[static_cast<std::size_t>(tok)] = (static_cast<double>(c) + alpha_) / denom;
    }
    return Distribution::from_probs(std::move(probs));
}

Distribution NGramModel::predict(std::span<const TokenId> prefix) const {
    for (TokenId t : prefix) {
        require(t >= 0 && static_cast<std::size_t>(t) < vocab_.size, "OutOfRange",
                "prefix token out of range");
    }
    const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
    if (ctx_len == 0 || prefix.size() < ctx_len) return smooth(unigram_);
    Context ctx(prefix.end() - static_cast<std::ptrdiff_t>(ctx_len), prefix.end());
    auto it = counts_.find(ctx);
    if (it == counts_.end()) return smooth(unigram_);  // single-hop back-off
    return smooth(it->second);
}

NGramModel train_ngram(std::span<const TokenId> corpus, int order, double smoothing_alpha,
                       const Vocabulary& vocab) {
    require(order >= 1, "InvalidOrder", "n-gram order must be >= 1");
    require(corpus.size() >= static_cast<std::size_t>(order), "CorpusTooShort",
            "corpus shorter than the n-gram order");
    require(smoothing_alpha > 0.0, "InvalidAlpha", "smoothing alpha must be > 0");

    NGramModel m;
    m.order_ = order;
    m.alpha_ = smoothing_alpha;
    m.vocab_ = vocab;
    for (TokenId t : corpus) {
        require(t >= 0 && static_cast<std::size_t>(t) < vocab.size, "OutOfRange",
                "corpus token out of range");
        m.unigram_[t] += 1;
    }
    const std::size_t ctx_len = static_cast<std::size_t>(order - 1);
    if (ctx_len > 0) {
        for (std::size_t i = 0; i + ctx_len < corpus.size(); ++i) {
            NGramModel::Context ctx(corpus.begin() + static_cast<std::ptrdiff_t>(i),
                                    corpus.begin() + static_cast<std::ptrdiff_t>(i + ctx_len));
            m.counts_[std::move(ctx)][corpus[i + ctx_len]] += 1;
        }
    }
    return m;
}

void NGramModel::save(std::ostream& out) const {
    out << "NGRAM v1 order=" << order_ << " alpha=" << format_double(alpha_)
        << " vocab=" << vocab_.size << "\n";
    if (vocab_.labels) {
        out << "labels";
        for (const auto& l : *vocab_.labels) out << ' ' << l;
        out << "\n";
    }
    auto write_row = [&out](const CountRow& row) {
        for (const auto& [tok, c] : row) out << ' ' << tok << ':' << c;
        out << "\n";
    };
    out << "ctx 0 |";
    write_row(unigram_);
    for (const auto& [ctx, row] : counts_) {
        out << "ctx " << ctx.size();
        for (TokenId t : ctx) out << ' ' << t;
        out << " |";
        write_row(row);
    }
}

NGramModel NGramModel::load(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "ParseError", "empty model file");
    int order = 0;
    double alpha = 0.0;
    unsigned long vocab_size = 0;
    require(std::sscanf(line.c_str(), "NGRAM v1 order=%d alpha=%lf vocab=%lu", &order, &alpha,
                        &vocab_size) == 3,
            "ParseError", "bad model header: " + line);

    NGramModel m;
    m.order_ = order;
    m.alpha_ = alpha;

    bool vocab_set = false;
    bool have_unigram = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "labels") {
            std::vector<std::string> labels;
            std::string w;
            while (ls >> w) labels.push_back(w);
            require(labels.size() == vocab_size, "ParseError", "label count mismatch");
            m.vocab_ = Vocabulary::with_labels(std::move(labels));
            vocab_set = true;
            continue;
        }
        require(tag == "ctx", "ParseError", "unexpected line: " + line);
        if (!vocab_set) {
            m.vocab_ = Vocabulary::plain(vocab_size);
            vocab_set = true;
        }
        std::size_t k = 0;
        ls >> k;
        Context ctx(k);
        for (std::size_t i = 0; i < k; ++i) ls >> ctx[i];
        std::string bar;
        ls >> bar;
        require(bar == "|", "ParseError", "missing separator in: " + line);
        CountRow row;
        std::string pair;
        while (ls >> pair) {
            auto colon = pair.find(':');
            require(colon != std::string::npos, "ParseError", "bad count entry: " + pair);
            TokenId tok = 0;
            std::uint64_t c = 0;
            std::from_chars(pair.data(), pair.data() + colon, tok);
            std::from_chars(pair.data() + colon + 1, pair.data() + pair.size(), c);
            row[tok] = c;
        }
        if (k == 0) {
            m.unigram_ = std::move(row);
            have_unigram = true;
        } else {
            m.counts_[std::move(ctx)] = std::move(row);
        }
    }
    if (!vocab_set) m.vocab_ = Vocabulary::plain(vocab_size);
    require(have_unigram, "ParseError", "model file missing unigram row");
    return m;
}

bool operator==(const NGramModel& a, const NGramModel& b) {
    return a.order_ == b.order_ && a.alpha_ == b.alpha_ && a.vocab_.size == b.vocab_.size &&
           a.vocab_.labels == b.vocab_.labels && a.unigram_ == b.unigram_ &&
           a.counts_ == b.counts_;
}

SyntheticPair SyntheticPair::make(std::size_t vocab_size, std::size_t n_contexts,
                                  double divergence_knob, std::uint64_t seed) {
    require(vocab_size >= 2, "InvalidSize", "synthetic vocab size must be >= 2");
    require(n_contexts >= 1, "InvalidSize", "synthetic pair needs at least one context");
    require(divergence_knob >= 0.0, "InvalidSize", "divergence knob must be >= 0");

    SyntheticPair pair;
    pair.vocab_size_ = vocab_size;
    pair.knob_ = divergence_knob;
    Rng rng(seed);
    const double exponent = 1.0 / (1.0 + divergence_knob);
    for (std::size_t c = 0; c < n_contexts; ++c) {
        // Symmetric Dirichlet(1): normalized iid Exponential(1) draws.
        std::vector<double> raw(vocab_size);
        for (double& w : raw) {
            double u = rng.next_uniform();
            w = -std::log1p(-u) + 1e-12;
        }
        Distribution target = normalize(raw);
        std::vector<double> perturbed(vocab_size);
        for (std::size_t i = 0; i < vocab_size; ++i) {
            perturbed[i] = std::pow(target.probs()[i], exponent);
        }
        Distribution draft = divergence_knob == 0.0 ? target : normalize(perturbed);
        pair.target_rows_.push_back(std::move(target));
        pair.draft_rows_.push_back(std::move(draft));
    }
    return pair;
}

std::size_t SyntheticPair::context_index(std::span<const TokenId> prefix) const {
    // FNV-1a over the token ids.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId t : prefix) {
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(t));
        h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h % target_rows_.size());
}

namespace {

class SyntheticSideModel : public ProbModel {
public:
    SyntheticSideModel(SyntheticPair pair, bool target)
        : pair_(std::move(pair)), target_(target) {}

    std::size_t vocab_size() const override { return pair_.vocab_size(); }

    Distribution predict(std::span<const TokenId> prefix) const override {
        std::size_t c = pair_.context_index(prefix);
        return target_ ? pair_.target_row(c) : pair_.draft_row(c);
    }

private:
    SyntheticPair pair_;
    bool target_;
};

}  // namespace

std::shared_ptr<const ProbModel> SyntheticPair::target_model() const {
    return std::make_shared<SyntheticSideModel>(*this, true);
}

std::shared_ptr<const ProbModel> SyntheticPair::draft_model() const {
    return std::make_shared<SyntheticSideModel>(*this, false);
}

void TableModel::set_row(std::vector<TokenId> prefix, Distribution dist) {
    require(dist.size() == vocab_size_, "VocabMismatch", "row size mismatch");
    rows_.insert_or_assign(std::move(prefix), std::move(dist));
}

Distribution TableModel::predict(std::span<const TokenId> prefix) const {
    std::vector<TokenId> key(prefix.begin(), prefix.end());
    auto it = rows_.find(key);
    return it == rows_.end() ? fallback_ : it->second;
}

}  // namespace specd
