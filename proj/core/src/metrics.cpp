#include "specd/metrics.hpp"

#include <cmath>

namespace specd {

namespace {

RunMetrics from_counters(std::int64_t total_tokens, std::int64_t target_calls,
                         std::int64_t draft_calls, double nll_sum, const CostModel& cost) {
    RunMetrics m;
    m.total_tokens = total_tokens;
    m.target_calls = target_calls;
    m.draft_calls = draft_calls;
    m.nll_sum = nll_sum;
    m.aal = static_cast<double>(total_tokens) / static_cast<double>(target_calls);
    m.llm_calls_ratio = static_cast<double>(target_calls) / static_cast<double>(total_tokens);
    m.ppl = std::exp(nll_sum / static_cast<double>(total_tokens));
    // Baseline: one target pass per token, autoregressively.
    double baseline = static_cast<double>(total_tokens) * cost.target_cost;
    double actual = static_cast<double>(draft_calls) * cost.draft_cost +
                    static_cast<double>(target_calls) * (cost.target_cost + cost.overhead);
    m.modeled_speedup = baseline / actual;
    return m;
}

}  // namespace

RunMetrics compute_metrics(const Transcript& t, const CostModel& cost,
                           std::span<const double> nll_stream) {
    require(t.total_tokens >= 1 && t.target_calls >= 1, "EmptyTranscript",
            "metrics over an empty transcript");
    require(static_cast<std::int64_t>(nll_stream.size()) == t.total_tokens, "InvalidSize",
            "nll stream length must match token count");
    double nll_sum = 0.0;
    for (double v : nll_stream) nll_sum += v;
    return from_counters(t.total_tokens, t.target_calls, t.draft_calls, nll_sum, cost);
}

RunMetrics compute_metrics(const Transcript& t, const CostModel& cost) {
    std::vector<double> stream = t.nll_stream();
    return compute_metrics(t, cost, stream);
}

RunMetrics aggregate(std::span<const RunMetrics> runs, const CostModel& cost) {
    require(!runs.empty(), "EmptyList", "aggregate over an empty run list");
    std::int64_t total_tokens = 0;
    std::int64_t target_calls = 0;
    std::int64_t draft_calls = 0;
    double nll_sum = 0.0;
    for (const auto& r : runs) {
        total_tokens += r.total_tokens;
        target_calls += r.target_calls;
        draft_calls += r.draft_calls;
        nll_sum += r.nll_sum;
    }
    return from_counters(total_tokens, target_calls, draft_calls, nll_sum, cost);
}

}  // namespace specd
