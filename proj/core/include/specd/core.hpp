#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specd/error.hpp"

namespace specd {

using TokenId = std::int32_t;

struct Vocabulary {
    std::size_t size = 0;
    std::optional<std::vector<std::string>> labels;  // length == size when set

    static Vocabulary plain(std::size_t size);
    static Vocabulary with_labels(std::vector<std::string> labels);

    const std::string& label(TokenId id) const;
};

// Normalized probability vector over a finite vocabulary. Construct via
// Distribution::from_probs (validates) or normalize() (scales raw weights).
class Distribution {
public:
    static Distribution from_probs(std::vector<double> probs);

    std::size_t size() const { return probs_.size(); }
    double operator[](TokenId id) const { return probs_[static_cast<std::size_t>(id)]; }
    const std::vector<double>& probs() const { return probs_; }

    TokenId argmax() const;  // ties broken by lowest TokenId

private:
    explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {}
    std::vector<double> probs_;
};

struct NucleusSet {
    std::vector<TokenId> members;  // ascending TokenId
    double mass = 0.0;

    bool contains(TokenId id) const;
};

// Scale a non-negative weight vector to sum to 1.
// Errors: AllZero, NegativeMass.
Distribution normalize(const std::vector<double>& raw);

// Negative log-likelihood in nats; +inf when the probability is zero so the
// verify loop can reject saturated tokens without a special case.
// Errors: OutOfRange.
double nll(const Distribution& dist, TokenId x);

inline bool nll_saturated(double v) { return !(v < 1e308); }

// Smallest descending-probability prefix with cumulative mass >= mass_target.
// Ties broken by ascending TokenId.
NucleusSet top_p_nucleus(const Distribution& dist, double mass_target);

// Power-temperature reshaping: normalize(p^(1/temperature)).
Distribution apply_temperature(const Distribution& dist, double temperature);

// Draw from a categorical distribution using a single uniform in [0,1).
TokenId sample_categorical(const Distribution& dist, double u);

double kl_divergence(const Distribution& from, const Distribution& to);

}  // namespace specd
