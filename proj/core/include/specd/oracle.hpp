#pragma once

#include <map>
#include <vector>

#include "specd/engine.hpp"

namespace specd {

struct EnumerationResult {
    std::map<std::vector<TokenId>, double> law;  // emitted sequence -> exact probability
    double total_mass = 0.0;
};

// Draft selection and replacement selection can be collapsed to argmax
// independently; the engine always uses the same mode for both.
struct StepLawOptions {
    DecodeMode draft_mode = DecodeMode::Sample;
    DecodeMode resample_mode = DecodeMode::Sample;
    double temperature = 1.0;
};

// Exact law of the first emitted token for one draft-verify position, with the
// accept/reject uniform integrated analytically (accept branch weight
// min(1, p/q) and friends). Mirrors the engine's decode-mode and policy
// semantics branch by branch, independently of the engine's control flow.
// Errors: VocabTooLarge (vocab > 16).
Distribution exact_step_law(const VerifyPolicy& policy, const Distribution& p,
                            const Distribution& q, const StepLawOptions& opts);

Distribution exact_step_law(const VerifyPolicy& policy, const Distribution& p,
                            const Distribution& q, DecodeMode mode, double temperature = 1.0);

// Full tree enumeration of the emitted-sequence law over whole generations.
// CD requires ema_beta == 0 here; smoothed CD is validated by Monte Carlo.
// Errors: StateSpaceTooLarge (vocab > 5, draft_len > 2, max_tokens > 3, or
// smoothed CD).
EnumerationResult exact_sequence_law(const ProbModel& draft, const ProbModel& target,
                                     std::span<const TokenId> prompt, const EngineConfig& cfg);

// Autoregressive law of the target model alone, for the losslessness check.
EnumerationResult autoregressive_law(const ProbModel& target, std::span<const TokenId> prompt,
                                     const EngineConfig& cfg);

struct MonteCarloResult {
    Distribution empirical;
    double tv_distance = 0.0;  // to exact_step_law
    std::size_t n_samples = 0;
};

// Runs the real engine n_samples times on frozen single-context models and
// compares the first emitted token's empirical law against the exact one.
MonteCarloResult monte_carlo_law(const VerifyPolicy& policy, const Distribution& p,
                                 const Distribution& q, const EngineConfig& cfg,
                                 std::size_t n_samples, std::uint64_t seed);

double total_variation(const Distribution& a, const Distribution& b);

}  // namespace specd
