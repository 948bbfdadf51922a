#include "specd/verifiers.hpp"

#include <algorithm>
#include <cmath>

namespace specd {

namespace testing {
bool corrupt_sd_residual = false;
}  // namespace testing

namespace {

void check_prob(double v, const char* what) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "InvalidProbability", what);
}

Distribution residual_from(const std::vector<double>& raw) {
    double sum = 0.0;
    for (double w : raw) sum += w;
    require(sum > 0.0, "DegenerateResidual", "residual distribution is all-zero");
    return normalize(raw);
}

}  // namespace

bool sd_accept(double p_x, double q_x, double u) {
    check_prob(p_x, "p outside [0,1]");
    check_prob(q_x, "q outside [0,1]");
    require(q_x > 0.0, "InvalidProbability", "draft proposed a zero-probability token");
    return u < std::min(1.0, p_x / q_x);
}

Distribution sd_residual(const Distribution& p, const Distribution& q) {
    require(p.size() == q.size(), "VocabMismatch", "residual over mismatched vocabularies");
    std::vector<double> raw(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        raw[i] = std::max(0.0, p.probs()[i] - q.probs()[i]);
    }
    if (testing::corrupt_sd_residual) {
        for (double& w : raw) w += 0.05;
    }
    return residual_from(raw);
}

bool md_accept(double p_x, double q_x, double alpha, double u) {
    check_prob(p_x, "p outside [0,1]");
    check_prob(q_x, "q outside [0,1]");
    require(q_x > 0.0, "InvalidProbability", "draft proposed a zero-probability token");
    require(alpha >= 0.0, "InvalidProbability", "alpha must be >= 0");
    if (alpha == 0.0) return true;  // accept-everything regime
    return u < std::min(1.0, p_x / (alpha * q_x));
}

Distribution md_residual(const Distribution& p, const Distribution& q, double beta) {
    require(p.size() == q.size(), "VocabMismatch", "residual over mismatched vocabularies");
    require(beta > 0.0, "InvalidProbability", "beta must be > 0");
    std::vector<double> raw(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        raw[i] = std::max(0.0, p.probs()[i] / beta - q.probs()[i]);
    }
    return residual_from(raw);
}

double md_beta_for_alpha(double alpha) { return std::max(alpha, 1.0); }

Distribution md_step_distribution(const Distribution& p, const Distribution& q, double alpha) {
    require(p.size() == q.size(), "VocabMismatch", "mismatched vocabularies");
    const std::size_t n = p.size();
    std::vector<double> accept(n);
    double accepted_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double qx = q.probs()[i];
        double a = 1.0;
        if (alpha > 0.0 && qx > 0.0) a = std::min(1.0, p.probs()[i] / (alpha * qx));
        accept[i] = qx * a;
        accepted_mass += qx * a;
    }
    double reject_mass = std::max(0.0, 1.0 - accepted_mass);
    std::vector<double> s(accept);
    if (reject_mass > 0.0) {
        Distribution resid = [&] {
            try {
                return md_residual(p, q, md_beta_for_alpha(alpha));
            } catch (const Error& e) {
                if (e.code() == "DegenerateResidual") return p;  // documented fallback
                throw;
            }
        }();
        for (std::size_t i = 0; i < n; ++i) s[i] += reject_mass * resid.probs()[i];
    }
    return normalize(s);
}

double md_solve_alpha(const Distribution& p, const Distribution& q, const MdPolicy& policy) {
    require(policy.distance_target > 0.0, "InvalidProbability", "distance target must be > 0");
    require(policy.md_tolerance >= 0.0 && policy.md_tolerance < policy.distance_target,
            "InvalidProbability", "tolerance must be in [0, distance_target)");
    const double d = policy.distance_target;
    const double tol = policy.md_tolerance;

    double kl_q = kl_divergence(q, p);
    if (kl_q <= d - tol) return 0.0;  // already close enough: accept everything

    auto band_error = [&](double kl) { return std::abs(kl - d); };
    auto kl_at = [&](double log2_alpha) {
        return kl_divergence(md_step_distribution(p, q, std::exp2(log2_alpha)), p);
    };

    double lo = -20.0;  // KL(s_alpha||p) -> KL(q||p) > D as alpha -> 0
    double hi = 6.0;
    if (kl_at(hi) > d) hi = 0.0;  // alpha = 1 is exact SD, KL = 0

    double best_alpha = std::exp2(lo);
    double best_err = band_error(kl_at(lo));
    for (int iter = 0; iter < 60; ++iter) {
        double mid = 0.5 * (lo + hi);
        double kl = kl_at(mid);
        if (band_error(kl) < best_err) {
            best_err = band_error(kl);
            best_alpha = std::exp2(mid);
        }
        if (kl > d) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return best_alpha;
}

bool cd_accept(double nll_x, double epsilon) {
    require(nll_x >= 0.0 || nll_saturated(nll_x), "InvalidProbability", "negative NLL");
    return nll_x <= epsilon;
}

EmaState ema_update(const EmaState& state, double r_new, double beta) {
    require(beta >= 0.0 && beta < 1.0, "InvalidProbability", "ema beta must be in [0,1)");
    EmaState out;
    out.initialized = true;
    if (!state.initialized) {
        out.value = r_new;
    } else {
        out.value = beta * state.value + (1.0 - beta) * r_new;
    }
    return out;
}

CdDecision cd_accept_smooth(const EmaState& state, double nll_x, const CdPolicy& policy,
                            EmaInit init) {
    EmaState seeded = state;
    if (!seeded.initialized && init == EmaInit::EpsilonSeed) {
        seeded.value = policy.epsilon;
        seeded.initialized = true;
    }
    CdDecision d;
    d.state = ema_update(seeded, nll_x, policy.ema_beta);
    d.accept = d.state.value <= policy.epsilon;
    return d;
}

double estimate_convergence_loss(double n_params, double n_tokens,
                                 const ScalingLawParams& params) {
    require(n_params > 0.0, "NonPositiveScale", "parameter count must be > 0");
    require(n_tokens > 0.0, "NonPositiveScale", "token count must be > 0");
    return params.E + params.A / std::pow(n_params, params.alpha) +
           params.B / std::pow(n_tokens, params.beta_exp);
}

}  // namespace specd
