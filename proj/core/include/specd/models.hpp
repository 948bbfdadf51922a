#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "specd/core.hpp"

namespace specd {

// Anything that maps a token prefix to a next-token distribution. Plays both
// the draft (Q) and target (P) roles in the engine. Implementations are
// immutable after construction; concurrent predict calls are safe.
class ProbModel {
public:
    virtual ~ProbModel() = default;
    virtual std::size_t vocab_size() const = 0;
    virtual Distribution predict(std::span<const TokenId> prefix) const = 0;
};

enum class TokenizerMode { Byte, Word };

// Byte mode: ids 0..255 are raw bytes, 256 is end-of-text (257 total).
// Word mode: sorted distinct corpus words, then end-of-text as the last id.
struct TokenizerSpec {
    TokenizerMode mode = TokenizerMode::Byte;
    Vocabulary vocabulary;

    TokenId eot() const { return static_cast<TokenId>(vocabulary.size - 1); }
};

struct TokenizedCorpus {
    TokenizerSpec spec;
    std::vector<TokenId> tokens;  // corpus body, no eot appended
};

TokenizedCorpus tokenize_corpus(const std::string& text, TokenizerMode mode);

// Add-alpha n-gram model. Contexts are the last (order-1) tokens; unseen
// contexts back off in a single hop to the empty context.
class NGramModel : public ProbModel {
public:
    std::size_t vocab_size() const override { return vocab_.size; }
    const Vocabulary& vocabulary() const { return vocab_; }
    int order() const { return order_; }
    double smoothing_alpha() const { return alpha_; }

    Distribution predict(std::span<const TokenId> prefix) const override;

    void save(std::ostream& out) const;
    static NGramModel load(std::istream& in);

    friend NGramModel train_ngram(std::span<const TokenId> corpus, int order,
                                  double smoothing_alpha, const Vocabulary& vocab);
    friend bool operator==(const NGramModel& a, const NGramModel& b);

private:
    NGramModel() = default;

    using Context = std::vector<TokenId>;
    using CountRow = std::map<TokenId, std::uint64_t>;  // sparse, id-ordered

    Distribution smooth(const CountRow& row) const;

    int order_ = 1;
    double alpha_ = 1.0;
    Vocabulary vocab_;
    std::map<Context, CountRow> counts_;  // keys of length order-1
    CountRow unigram_;                    // empty-context fallback
};

// Errors: CorpusTooShort, InvalidOrder.
NGramModel train_ngram(std::span<const TokenId> corpus, int order, double smoothing_alpha,
                       const Vocabulary& vocab);

// Target/draft table pair over hashed prefix contexts. Target rows are seeded
// symmetric Dirichlet(1); the draft is the target raised to 1/(1+knob) and
// renormalized, so knob 0 gives draft == target and large knob tends to
// uniform while preserving support and argmax.
class SyntheticPair {
public:
    static SyntheticPair make(std::size_t vocab_size, std::size_t n_contexts,
                              double divergence_knob, std::uint64_t seed);

    std::size_t vocab_size() const { return vocab_size_; }
    std::size_t n_contexts() const { return target_rows_.size(); }
    double divergence_knob() const { return knob_; }

    std::size_t context_index(std::span<const TokenId> prefix) const;
    const Distribution& target_row(std::size_t context) const { return target_rows_[context]; }
    const Distribution& draft_row(std::size_t context) const { return draft_rows_[context]; }

    std::shared_ptr<const ProbModel> target_model() const;
    std::shared_ptr<const ProbModel> draft_model() const;

private:
    std::size_t vocab_size_ = 0;
    double knob_ = 0.0;
    std::vector<Distribution> target_rows_;
    std::vector<Distribution> draft_rows_;
};

// Fixed next-token distribution regardless of prefix; used by oracles.
class ConstantModel : public ProbModel {
public:
    explicit ConstantModel(Distribution dist) : dist_(std::move(dist)) {}
    std::size_t vocab_size() const override { return dist_.size(); }
    Distribution predict(std::span<const TokenId>) const override { return dist_; }

private:
    Distribution dist_;
};

// Lookup model over explicit prefix rows with a fallback; used in small
// enumeration tests where every reachable prefix is spelled out.
class TableModel : public ProbModel {
public:
    TableModel(std::size_t vocab_size, Distribution fallback)
        : vocab_size_(vocab_size), fallback_(std::move(fallback)) {}

    void set_row(std::vector<TokenId> prefix, Distribution dist);
    std::size_t vocab_size() const override { return vocab_size_; }
    Distribution predict(std::span<const TokenId> prefix) const override;

private:
    std::size_t vocab_size_;
    Distribution fallback_;
    std::map<std::vector<TokenId>, Distribution> rows_;
};

}  // namespace specd
