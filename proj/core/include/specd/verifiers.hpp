#pragma once

#include <variant>

#include "specd/core.hpp"

namespace specd {

// Lossless speculative sampling: accept with probability min(1, p/q).
struct SdPolicy {};

// Relaxed acceptance p/(alpha*q) with the KL of the induced one-step
// distribution steered into [distance_target - tolerance, + tolerance].
struct MdPolicy {
    double distance_target = 0.3;
    double md_tolerance = 0.05;
    double temperature = 0.3;  // applied to both p and q before verification
};

// Accept a draft token iff its (EMA-smoothed) target NLL is <= epsilon.
struct CdPolicy {
    double epsilon = 2.0;
    double ema_beta = 0.2;
};

using VerifyPolicy = std::variant<SdPolicy, MdPolicy, CdPolicy>;

enum class EmaInit { FirstSample, EpsilonSeed };

struct EmaState {
    double value = 0.0;
    bool initialized = false;
};

struct ScalingLawParams {
    double E = 1.69;
    double A = 406.4;
    double B = 410.7;
    double alpha = 0.34;
    double beta_exp = 0.28;
};

// --- speculative sampling -------------------------------------------------

// true iff u < min(1, p_x / q_x).
bool sd_accept(double p_x, double q_x, double u);

// normalize(max(0, p - q)). Errors: DegenerateResidual when p == q.
Distribution sd_residual(const Distribution& p, const Distribution& q);

// --- mentored decoding ----------------------------------------------------

// true iff u < min(1, p_x / (alpha * q_x)); alpha == 0 accepts everything.
bool md_accept(double p_x, double q_x, double alpha, double u);

// normalize(max(0, p/beta - q)). Errors: DegenerateResidual.
Distribution md_residual(const Distribution& p, const Distribution& q, double beta);

// Residual scale coupled to alpha: beta = max(alpha, 1), so the sampled
// distribution reduces to the lossless residual when alpha <= 1.
double md_beta_for_alpha(double alpha);

// Exact one-step emitted-token distribution under MD acceptance + residual,
// with the uniform integrated analytically. Falls back to p when the residual
// degenerates.
Distribution md_step_distribution(const Distribution& p, const Distribution& q, double alpha);

// Bisection on log2(alpha) for KL(s_alpha || p) inside the policy band.
// Returns 0 when KL(q||p) is already below the band; otherwise the in-band
// alpha, or the band-closest alpha visited when the band is never hit.
double md_solve_alpha(const Distribution& p, const Distribution& q, const MdPolicy& policy);

// --- consultant decoding --------------------------------------------------

// true iff nll_x <= epsilon (accept on equality; saturated NLL rejects).
bool cd_accept(double nll_x, double epsilon);

// value' = beta * value + (1 - beta) * r_new. An uninitialized state adopts
// r_new directly (first-sample rule); epsilon seeding is handled by
// cd_accept_smooth, which pre-initializes the state to epsilon.
EmaState ema_update(const EmaState& state, double r_new, double beta);

struct CdDecision {
    bool accept = false;
    EmaState state;
};

CdDecision cd_accept_smooth(const EmaState& state, double nll_x, const CdPolicy& policy,
                            EmaInit init = EmaInit::FirstSample);

// Chinchilla-style loss estimate E + A/N^alpha + B/D^beta.
// Errors: NonPositiveScale.
double estimate_convergence_loss(double n_params, double n_tokens,
                                 const ScalingLawParams& params = {});

namespace testing {
// Fault-injection hook for the oracle suite: perturbs sd_residual so the
// losslessness sweep must flag it.
extern bool corrupt_sd_residual;
}  // namespace testing

}  // namespace specd
