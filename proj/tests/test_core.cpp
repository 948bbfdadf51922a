#include <cmath>

#include "doctest.h"
#include "specd/core.hpp"
#include "specd/rng.hpp"

using namespace specd;

namespace {

Distribution dirichlet(std::size_t vocab, Rng& rng) {
    std::vector<double> raw(vocab);
    for (double& w : raw) w = -std::log1p(-rng.next_uniform()) + 1e-12;
    return normalize(raw);
}

}  // namespace

TEST_CASE("normalize scales proportionally") {
    Distribution d = normalize({2.0, 2.0});
    CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));

    Distribution one_hot = normalize({1.0, 0.0, 0.0});
    CHECK(one_hot[0] == 1.0);
    CHECK(one_hot[1] == 0.0);

    Distribution already = normalize({0.2, 0.3, 0.5});
    CHECK(already[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(already[1] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(already[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normalize error paths") {
    CHECK_THROWS_WITH_AS(normalize({0.0, 0.0}), doctest::Contains("AllZero"), Error);
    CHECK_THROWS_WITH_AS(normalize({1.0, -0.5}), doctest::Contains("NegativeMass"), Error);
}

TEST_CASE("normalize is idempotent") {
    Rng rng(11);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> raw(5);
        for (double& w : raw) w = rng.next_uniform() + 1e-6;
        Distribution once = normalize(raw);
        Distribution twice = normalize(once.probs());
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(std::abs(once.probs()[i] - twice.probs()[i]) <= 1e-12);
        }
    }
}

TEST_CASE("nll basics") {
    Distribution uniform4 = normalize({1, 1, 1, 1});
    CHECK(nll(uniform4, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Distribution certain = normalize({1.0, 0.0, 0.0});
    CHECK(nll(certain, 0) == 0.0);
    CHECK(nll_saturated(nll(certain, 1)));

    double p = std::exp(-2.0);
    Distribution boundary = Distribution::from_probs({p, 1.0 - p});
    CHECK(nll(boundary, 0) == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(nll(uniform4, 4), doctest::Contains("OutOfRange"), Error);
}

TEST_CASE("nll is non-negative, zero only at certainty") {
    Rng rng(21);
    for (int k = 0; k < 100; ++k) {
        Distribution d = dirichlet(6, rng);
        for (TokenId x = 0; x < 6; ++x) {
            double v = nll(d, x);
            CHECK(v >= 0.0);
            if (v == 0.0) CHECK(d[x] == 1.0);
        }
    }
}

TEST_CASE("top_p_nucleus sort-and-cut") {
    Distribution d = Distribution::from_probs({0.5, 0.3, 0.2});
    NucleusSet n = top_p_nucleus(d, 0.8);
    CHECK(n.members == std::vector<TokenId>{0, 1});
    CHECK(n.mass == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("top_p_nucleus ties broken by ascending id") {
    Distribution d = Distribution::from_probs({0.25, 0.25, 0.25, 0.25});
    NucleusSet n = top_p_nucleus(d, 0.5);
    CHECK(n.members == std::vector<TokenId>{0, 1});
    CHECK(n.mass == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("top_p_nucleus full support") {
    Distribution d = Distribution::from_probs({0.7, 0.3});
    NucleusSet n = top_p_nucleus(d, 1.0);
    CHECK(n.members == std::vector<TokenId>{0, 1});
}

TEST_CASE("nucleus mass matches member sum and is deterministic") {
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        Distribution d = dirichlet(8, rng);
        double eps = 2.0;
        NucleusSet a = top_p_nucleus(d, 1.0 - std::exp(-eps));
        NucleusSet b = top_p_nucleus(d, 1.0 - std::exp(-eps));
        CHECK(a.members == b.members);
        double mass = 0.0;
        for (TokenId id : a.members) mass += d[id];
        CHECK(std::abs(mass - a.mass) <= 1e-12);
        // Members dominate every excluded token.
        double cut = 1.0;
        for (TokenId id : a.members) cut = std::min(cut, d[id]);
        for (TokenId x = 0; x < 8; ++x) {
            if (!a.contains(x)) CHECK(d[x] <= cut);
        }
    }
}

TEST_CASE("sample_categorical inverts the cdf") {
    Distribution d = Distribution::from_probs({0.25, 0.5, 0.25});
    CHECK(sample_categorical(d, 0.0) == 0);
    CHECK(sample_categorical(d, 0.3) == 1);
    CHECK(sample_categorical(d, 0.9) == 2);
}

TEST_CASE("apply_temperature limits") {
    Distribution d = Distribution::from_probs({0.7, 0.2, 0.1});
    Distribution same = apply_temperature(d, 1.0);
    CHECK(same[0] == d[0]);
    Distribution flat = apply_temperature(d, 1e6);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(flat.probs()[i] == doctest::Approx(1.0 / 3).epsilon(1e-3));
    }
    CHECK(apply_temperature(d, 1e-3).argmax() == d.argmax());
}

TEST_CASE("vocabulary invariants") {
    CHECK_THROWS_AS(Vocabulary::plain(1), Error);
    CHECK_THROWS_AS(Vocabulary::with_labels({"a", "a"}), Error);
    Vocabulary v = Vocabulary::with_labels({"a", "b"});
    CHECK(v.label(1) == "b");
}
