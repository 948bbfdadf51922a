#include <benchmark/benchmark.h>

#include "specd/engine.hpp"
#include "specd/oracle.hpp"

namespace {

using namespace specd;

SyntheticPair make_pair(std::size_t vocab) { return SyntheticPair::make(vocab, 32, 0.5, 7); }

void BM_GenerateSd(benchmark::State& state) {
    SyntheticPair pair = make_pair(64);
    auto draft = pair.draft_model();
    auto target = pair.target_model();
    EngineConfig cfg;
    cfg.policy = SdPolicy{};
    cfg.decode_mode = DecodeMode::Sample;
    cfg.draft_len = static_cast<int>(state.range(0));
    cfg.max_tokens = 256;
    std::vector<TokenId> prompt = {0};
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = seed++;
        benchmark::DoNotOptimize(generate(*draft, *target, prompt, cfg));
    }
}
BENCHMARK(BM_GenerateSd)->Arg(6)->Arg(20);

void BM_GenerateCd(benchmark::State& state) {
    SyntheticPair pair = make_pair(64);
    auto draft = pair.draft_model();
    auto target = pair.target_model();
    EngineConfig cfg;
    cfg.policy = CdPolicy{2.0, 0.2};
    cfg.decode_mode = DecodeMode::Sample;
    cfg.draft_len = static_cast<int>(state.range(0));
    cfg.max_tokens = 256;
    std::vector<TokenId> prompt = {0};
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = seed++;
        benchmark::DoNotOptimize(generate(*draft, *target, prompt, cfg));
    }
}
BENCHMARK(BM_GenerateCd)->Arg(6)->Arg(20);

void BM_ExactStepLawSd(benchmark::State& state) {
    SyntheticPair pair = make_pair(8);
    const Distribution& p = pair.target_row(0);
    const Distribution& q = pair.draft_row(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_step_law(SdPolicy{}, p, q, DecodeMode::Sample));
    }
}
BENCHMARK(BM_ExactStepLawSd);

void BM_MdSolveAlpha(benchmark::State& state) {
    SyntheticPair pair = SyntheticPair::make(16, 8, 2.0, 3);
    MdPolicy md;
    for (auto _ : state) {
        benchmark::DoNotOptimize(md_solve_alpha(pair.target_row(0), pair.draft_row(0), md));
    }
}
BENCHMARK(BM_MdSolveAlpha);

}  // namespace

BENCHMARK_MAIN();
