#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "specd/engine.hpp"
#include "specd/metrics.hpp"

namespace specd {

struct CorpusSource {
    std::string corpus_path;
    TokenizerMode tokenizer = TokenizerMode::Byte;
    int draft_order = 2;
    int target_order = 4;
    double smoothing_alpha = 1.0;
};

struct SyntheticSource {
    std::size_t vocab_size = 8;
    std::size_t n_contexts = 16;
    double divergence_knob = 0.5;
    std::uint64_t seed = 0;
};

// One policy grid cell after expansion: a concrete policy plus the grid
// coordinates that go into the CSV.
struct PolicyCell {
    VerifyPolicy policy;
    std::string name;                 // "sd" | "md" | "cd"
    std::optional<double> epsilon;    // CD only
    std::optional<double> beta;       // CD only
};

struct ExperimentConfig {
    int schema_version = 1;
    std::optional<CorpusSource> corpus;
    std::optional<SyntheticSource> synthetic;
    std::vector<PolicyCell> policies;
    std::vector<int> draft_lens;
    DecodeMode decode_mode = DecodeMode::Greedy;
    double temperature = 1.0;
    int max_tokens = 64;
    int n_prompts = 1;
    std::vector<std::uint64_t> seeds;
    CostModel cost_model;
    std::string output_csv = "results.csv";
    std::optional<std::string> transcript_dir;

    // Errors: ConfigError.
    static ExperimentConfig parse_file(const std::string& path);
    static ExperimentConfig parse_json_text(const std::string& text);
};

struct ResultRow {
    std::string policy;
    int draft_len = 0;
    std::optional<double> epsilon;
    std::optional<double> beta;
    std::uint64_t seed = 0;
    int prompt_index = 0;
    RunMetrics metrics;
};

struct BuiltModels {
    std::shared_ptr<const ProbModel> draft;
    std::shared_ptr<const ProbModel> target;
    std::vector<TokenId> prompt_pool;  // deterministic prompt tokens
    TokenId eot = -1;
};

// Errors: ModelBuildError (wrapping the underlying cause).
BuiltModels build_models(const ExperimentConfig& cfg);

// Runs the full (policy x draft_len x seed x prompt) grid. Rows come back in
// deterministic parameter-tuple order regardless of job count.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const BuiltModels& models,
                                      unsigned jobs = 1);

// Exact column order: policy, draft_len, epsilon, beta, seed, total_tokens,
// target_calls, draft_calls, aal, llm_calls_ratio, modeled_speedup, ppl.
void write_csv(std::ostream& out, std::span<const ResultRow> rows);

struct OracleReport {
    bool ok = true;
    int sd_losslessness_instances = 0;
    int sequence_instances = 0;
    int md_band_instances = 0;
    int cd_nucleus_instances = 0;
    std::string first_failure;  // names the property and the seed
};

// Full property sweep backing the `oracle` CLI verb.
OracleReport run_oracle_suite();
void write_oracle_report(std::ostream& out, const OracleReport& report);

}  // namespace specd
