#include "specd/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace specd {

Vocabulary Vocabulary::plain(std::size_t size) {
    require(size >= 2, "InvalidSize", "vocabulary size must be >= 2");
    return Vocabulary{size, std::nullopt};
}

Vocabulary Vocabulary::with_labels(std::vector<std::string> labels) {
    require(labels.size() >= 2, "InvalidSize", "vocabulary size must be >= 2");
    std::set<std::string> uniq(labels.begin(), labels.end());
    require(uniq.size() == labels.size(), "InvalidSize", "vocabulary labels must be unique");
    Vocabulary v;
    v.size = labels.size();
    v.labels = std::move(labels);
    return v;
}

const std::string& Vocabulary::label(TokenId id) const {
    require(labels.has_value(), "OutOfRange", "vocabulary has no labels");
    require(id >= 0 && static_cast<std::size_t>(id) < size, "OutOfRange", "token id out of range");
    return (*labels)[static_cast<std::size_t>(id)];
}

Distribution Distribution::from_probs(std::vector<double> probs) {
    require(!probs.empty(), "InvalidSize", "empty probability vector");
    double sum = 0.0;
    for (double p : probs) {
        require(std::isfinite(p), "InvalidProbability", "non-finite probability entry");
        require(p >= 0.0, "NegativeMass", "negative probability entry");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "InvalidProbability", "probabilities must sum to 1");
    return Distribution(std::move(probs));
}

TokenId Distribution::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs_.size(); ++i) {
        if (probs_[i] > probs_[best]) best = i;
    }
    return static_cast<TokenId>(best);
}

bool NucleusSet::contains(TokenId id) const {
    return std::binary_search(members.begin(), members.end(), id);
}

Distribution normalize(const std::vector<double>& raw) {
    require(!raw.empty(), "InvalidSize", "empty weight vector");
    double sum = 0.0;
    for (double w : raw) {
        require(std::isfinite(w), "InvalidProbability", "non-finite weight");
        require(w >= 0.0, "NegativeMass", "negative weight");
        sum += w;
    }
    require(sum > 0.0, "AllZero", "all weights are zero");
    std::vector<double> probs(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) probs[i] = raw[i] / sum;
    // Guard against rounding drift so the Distribution invariant holds exactly
    // enough for downstream 1e-12 checks.
    double check = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (check != 1.0 && check > 0.0) {
        for (double& p : probs) p /= check;
    }
    return Distribution::from_probs(std::move(probs));
}

double nll(const Distribution& dist, TokenId x) {
    require(x >= 0 && static_cast<std::size_t>(x) < dist.size(), "OutOfRange",
            "token id out of range");
    double p = dist[x];
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(p);
}

NucleusSet top_p_nucleus(const Distribution& dist, double mass_target) {
    require(mass_target > 0.0 && mass_target <= 1.0, "InvalidProbability",
            "mass_target must be in (0, 1]");
    std::vector<TokenId> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
        return dist[a] > dist[b];  // stable sort keeps ascending id on ties
    });
    NucleusSet out;
    for (TokenId id : order) {
        out.members.push_back(id);
        out.mass += dist[id];
        if (out.mass >= mass_target) break;
    }
    std::sort(out.members.begin(), out.members.end());
    return out;
}

Distribution apply_temperature(const Distribution& dist, double temperature) {
    require(temperature > 0.0, "InvalidProbability", "temperature must be > 0");
    if (temperature == 1.0) return dist;
    std::vector<double> raw(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        double p = dist.probs()[i];
        raw[i] = p > 0.0 ? std::pow(p, 1.0 / temperature) : 0.0;
    }
    return normalize(raw);
}

TokenId sample_categorical(const Distribution& dist, double u) {
    require(u >= 0.0 && u < 1.0, "InvalidProbability", "uniform draw must be in [0,1)");
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist.probs()[i];
        if (u < acc) return static_cast<TokenId>(i);
    }
    // Rounding can leave acc slightly below 1; emit the last positive entry.
    for (std::size_t i = dist.size(); i-- > 0;) {
        if (dist.probs()[i] > 0.0) return static_cast<TokenId>(i);
    }
    fail("AllZero", "categorical sample from zero distribution");
}

double kl_divergence(const Distribution& from, const Distribution& to) {
    require(from.size() == to.size(), "VocabMismatch", "KL over mismatched vocabularies");
    double kl = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        double a = from.probs()[i];
        if (a <= 0.0) continue;
        double b = to.probs()[i];
        if (b <= 0.0) fail("NonFiniteKL", "support mismatch in KL divergence");
        kl += a * std::log(a / b);
    }
    return kl < 0.0 ? 0.0 : kl;
}

}  // namespace specd
