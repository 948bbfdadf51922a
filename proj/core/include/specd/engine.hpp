#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "specd/core.hpp"
#include "specd/models.hpp"
#include "specd/rng.hpp"
#include "specd/verifiers.hpp"

namespace specd {

enum class DecodeMode { Greedy, Sample };

struct EngineConfig {
    int draft_len = 6;
    DecodeMode decode_mode = DecodeMode::Greedy;
    double temperature = 1.0;  // sample mode only
    VerifyPolicy policy = SdPolicy{};
    int max_tokens = 64;
    std::uint64_t seed = 0;
    TokenId eot = -1;  // -1 disables end-of-text handling
    EmaInit ema_init = EmaInit::FirstSample;
    bool ema_reset_per_step = false;  // ablation switch; default persists
};

struct PositionTrace {
    TokenId draft_token = -1;
    double q_x = 0.0;
    double p_x = 0.0;
    double nll = 0.0;
    bool accepted = false;
};

struct StepResult {
    int n_accepted = 0;
    std::vector<TokenId> emitted;      // n_accepted + 1 tokens absent truncation
    std::vector<double> emitted_nll;   // raw target NLL per emitted token
    int draft_calls = 0;               // draft forward passes spent this step
    EmaState ema_after;                // CD only
    std::vector<PositionTrace> trace;  // one record per verified position
};

struct Transcript {
    std::vector<TokenId> prompt;
    std::vector<StepResult> steps;
    std::int64_t total_tokens = 0;
    std::int64_t target_calls = 0;  // one batched verification pass per step
    std::int64_t draft_calls = 0;

    std::vector<double> nll_stream() const;
};

struct DraftPhaseResult {
    std::vector<TokenId> tokens;
    std::vector<Distribution> q_dists;  // effective (decode-tempered) draw laws
};

// Autoregressive draft of cfg.draft_len tokens. Sample mode draws from the
// temperature-adjusted draft distribution; greedy takes the argmax.
DraftPhaseResult draft_phase(const ProbModel& draft, std::span<const TokenId> prefix,
                             const EngineConfig& cfg, Rng& rng);

// One verification scan over the drafted positions. RNG draw order per step is
// fixed: draft samples first, then one uniform per SD/MD-verified position,
// then at most one residual/bonus draw.
StepResult verify_phase(const ProbModel& target, std::span<const TokenId> prefix,
                        const DraftPhaseResult& draft, const EngineConfig& cfg, EmaState ema,
                        Rng& rng);

// Full draft-and-verify loop; deterministic given cfg.seed.
// Errors: VocabMismatch.
Transcript generate(const ProbModel& draft, const ProbModel& target,
                    std::span<const TokenId> prompt, const EngineConfig& cfg);

// Line-delimited transcript records for replay and golden tests.
void write_transcript(std::ostream& out, const Transcript& t);
Transcript read_transcript(std::istream& in);

}  // namespace specd
