#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "specd/engine.hpp"

namespace specd {

// Time-unit stand-in for walltime: autoregressive target decoding of the same
// token count is the speedup baseline.
struct CostModel {
    double draft_cost = 1.0 / 144.0;  // 0.5B/72B parameter-count analogy
    double target_cost = 1.0;         // per batched verification pass
    double overhead = 0.0;            // per step
};

struct RunMetrics {
    double aal = 1.0;              // tokens per target call (accepted + bonus)
    double llm_calls_ratio = 1.0;  // target calls per token
    double modeled_speedup = 1.0;
    double ppl = 1.0;
    std::int64_t total_tokens = 0;
    std::int64_t target_calls = 0;
    std::int64_t draft_calls = 0;
    double nll_sum = 0.0;  // pooled for token-weighted aggregation
};

// Errors: EmptyTranscript.
RunMetrics compute_metrics(const Transcript& t, const CostModel& cost,
                           std::span<const double> nll_stream);

RunMetrics compute_metrics(const Transcript& t, const CostModel& cost);

// Token-weighted: sums the integer counters, recomputes the ratios from the
// sums, pools the NLL mean. Errors: EmptyList.
RunMetrics aggregate(std::span<const RunMetrics> runs, const CostModel& cost);

}  // namespace specd
